//! Region adjacency graph and Ward agglomeration restricted to spatial neighbors.
//!
//! Superpixels start as singleton clusters described by pixel count `n` and
//! mean feature `mu`. At every step the adjacent pair with the smallest Ward
//! increase `n_a·n_b/(n_a+n_b)·‖mu_a − mu_b‖²` is merged (ties go to the
//! lexicographically smallest `(min id, max id)`), and the new cluster takes id
//! `L + step`. Merge heights may decrease along the sequence: a pair that only
//! becomes adjacent late can be cheaper than earlier merges.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::LabelMap;
use crate::slic::SuperpixelSegmentation;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionAdjacencyGraph {
    adjacency: Vec<BTreeSet<u32>>,
}

impl RegionAdjacencyGraph {
    pub fn from_labels(labels: &LabelMap) -> Self {
        let n = labels.label_count();
        let w = labels.width();
        let l = labels.labels();
        let mut adjacency = vec![BTreeSet::new(); n];
        for (i, &a) in l.iter().enumerate() {
            if (i + 1) % w != 0 {
                let b = l[i + 1];
                if a != b {
                    adjacency[a as usize].insert(b);
                    adjacency[b as usize].insert(a);
                }
            }
            if let Some(&b) = l.get(i + w) {
                if a != b {
                    adjacency[a as usize].insert(b);
                    adjacency[b as usize].insert(a);
                }
            }
        }
        Self { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: u32) -> &BTreeSet<u32> {
        &self.adjacency[node as usize]
    }

    pub fn are_adjacent(&self, a: u32, b: u32) -> bool {
        self.adjacency[a as usize].contains(&b)
    }

    /// Sorted `(lo, hi)` edge list.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, set)| {
                set.iter()
                    .filter(move |&&b| b > a as u32)
                    .map(move |&b| (a as u32, b))
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Number of connected components of the graph.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.node_count()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.node_count() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &nb in &self.adjacency[v] {
                    if !seen[nb as usize] {
                        seen[nb as usize] = true;
                        stack.push(nb as usize);
                    }
                }
            }
        }
        count
    }
}

pub fn build_rag(seg: &SuperpixelSegmentation) -> RegionAdjacencyGraph {
    RegionAdjacencyGraph::from_labels(seg.labels())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterNode {
    pub id: u32,
    /// Original superpixel labels, sorted.
    pub members: Vec<u32>,
    pub n: usize,
    pub mu: Vec<f64>,
}

impl ClusterNode {
    pub fn merged(a: &ClusterNode, b: &ClusterNode, id: u32) -> ClusterNode {
        let n = a.n + b.n;
        let (wa, wb) = (a.n as f64, b.n as f64);
        let mu =
            a.mu.iter()
                .zip(&b.mu)
                .map(|(x, y)| (wa * x + wb * y) / (wa + wb))
                .collect();
        let mut members = Vec::with_capacity(a.members.len() + b.members.len());
        members.extend_from_slice(&a.members);
        members.extend_from_slice(&b.members);
        members.sort_unstable();
        ClusterNode { id, members, n, mu }
    }
}

pub fn ward_delta(a: &ClusterNode, b: &ClusterNode) -> f64 {
    let (na, nb) = (a.n as f64, b.n as f64);
    let dist2: f64 = a.mu.iter().zip(&b.mu).map(|(x, y)| (x - y) * (x - y)).sum();
    na * nb / (na + nb) * dist2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub a: u32,
    pub b: u32,
    pub height: f64,
    pub new_id: u32,
}

/// Ordered merge record plus the singleton descriptors it started from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DendrogramDoc", into = "DendrogramDoc")]
pub struct Dendrogram {
    pub initial_count: usize,
    pub merges: Vec<Merge>,
    pub superpixel_means: Vec<Vec<f64>>,
    pub superpixel_counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DendrogramDoc {
    initial_count: usize,
    merges: Vec<(u32, u32, f64, u32)>,
    superpixel_means: Vec<Vec<f64>>,
    superpixel_counts: Vec<usize>,
}

impl From<Dendrogram> for DendrogramDoc {
    fn from(d: Dendrogram) -> Self {
        DendrogramDoc {
            initial_count: d.initial_count,
            merges: d
                .merges
                .iter()
                .map(|m| (m.a, m.b, m.height, m.new_id))
                .collect(),
            superpixel_means: d.superpixel_means,
            superpixel_counts: d.superpixel_counts,
        }
    }
}

impl TryFrom<DendrogramDoc> for Dendrogram {
    type Error = Error;

    fn try_from(doc: DendrogramDoc) -> Result<Self> {
        let d = Dendrogram {
            initial_count: doc.initial_count,
            merges: doc
                .merges
                .into_iter()
                .map(|(a, b, height, new_id)| Merge {
                    a,
                    b,
                    height,
                    new_id,
                })
                .collect(),
            superpixel_means: doc.superpixel_means,
            superpixel_counts: doc.superpixel_counts,
        };
        d.validate()?;
        Ok(d)
    }
}

impl Dendrogram {
    /// Checks id numbering and single consumption of every cluster id.
    pub fn validate(&self) -> Result<()> {
        let l = self.initial_count;
        if self.merges.len() >= l.max(1) {
            return Err(Error::InvalidParameter(format!(
                "{} merges for {l} superpixels",
                self.merges.len()
            )));
        }
        if self.superpixel_counts.len() != l || self.superpixel_means.len() != l {
            return Err(Error::InvalidParameter(
                "superpixel descriptors do not match initial_count".into(),
            ));
        }
        let mut consumed = HashSet::new();
        for (i, m) in self.merges.iter().enumerate() {
            let new_id = (l + i) as u32;
            if m.new_id != new_id {
                return Err(Error::InvalidParameter(format!(
                    "merge {i} has id {} (expected {new_id})",
                    m.new_id
                )));
            }
            for id in [m.a, m.b] {
                if id >= new_id || !consumed.insert(id) {
                    return Err(Error::InvalidParameter(format!(
                        "merge {i} references unavailable cluster {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest reachable cluster count (number of RAG components).
    pub fn min_clusters(&self) -> usize {
        self.initial_count - self.merges.len()
    }

    /// Cluster id of every superpixel after applying the first `applied` merges.
    pub fn assignment(&self, applied: usize) -> Vec<u32> {
        let l = self.initial_count;
        let mut parent: Vec<u32> = (0..(l + applied) as u32).collect();
        for m in &self.merges[..applied] {
            parent[m.a as usize] = m.new_id;
            parent[m.b as usize] = m.new_id;
        }
        (0..l as u32)
            .map(|mut id| {
                while parent[id as usize] != id {
                    id = parent[id as usize];
                }
                id
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug)]
struct Candidate {
    delta: f64,
    lo: u32,
    hi: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the smallest (delta, lo, hi).
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .delta
            .total_cmp(&self.delta)
            .then_with(|| other.lo.cmp(&self.lo))
            .then_with(|| other.hi.cmp(&self.hi))
    }
}

fn candidate(a: &ClusterNode, b: &ClusterNode) -> Candidate {
    Candidate {
        delta: ward_delta(a, b),
        lo: a.id.min(b.id),
        hi: a.id.max(b.id),
    }
}

/// Greedy adjacency-constrained Ward agglomeration down to one cluster per
/// connected RAG component.
pub fn agglomerate(seg: &SuperpixelSegmentation, rag: &RegionAdjacencyGraph) -> Result<Dendrogram> {
    let l = seg.len();
    if rag.node_count() != l {
        return Err(Error::DimensionMismatch(format!(
            "RAG has {} nodes, segmentation has {l} superpixels",
            rag.node_count()
        )));
    }
    let mut nodes: Vec<Option<ClusterNode>> = seg
        .stats()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Some(ClusterNode {
                id: i as u32,
                members: vec![i as u32],
                n: s.count,
                mu: s.mean.clone(),
            })
        })
        .collect();
    if let Some(i) = seg.stats().iter().position(|s| s.count == 0) {
        return Err(Error::InvalidParameter(format!("superpixel {i} is empty")));
    }
    let mut neighbors: Vec<HashSet<u32>> = (0..l as u32)
        .map(|i| rag.neighbors(i).iter().copied().collect())
        .collect();

    let mut heap = BinaryHeap::new();
    for (a, b) in rag.edges() {
        heap.push(candidate(
            nodes[a as usize].as_ref().unwrap(),
            nodes[b as usize].as_ref().unwrap(),
        ));
    }

    let mut merges = Vec::new();
    while let Some(best) = heap.pop() {
        let alive = |id: u32| nodes[id as usize].is_some();
        if !alive(best.lo) || !alive(best.hi) {
            continue;
        }
        let new_id = nodes.len() as u32;
        let a = nodes[best.lo as usize].take().unwrap();
        let b = nodes[best.hi as usize].take().unwrap();
        let merged = ClusterNode::merged(&a, &b, new_id);

        let mut adj: HashSet<u32> = std::mem::take(&mut neighbors[a.id as usize]);
        adj.extend(std::mem::take(&mut neighbors[b.id as usize]));
        adj.remove(&a.id);
        adj.remove(&b.id);
        let mut adj_sorted: Vec<u32> = adj.iter().copied().collect();
        adj_sorted.sort_unstable();
        for &nb in &adj_sorted {
            let set = &mut neighbors[nb as usize];
            set.remove(&a.id);
            set.remove(&b.id);
            set.insert(new_id);
            heap.push(candidate(&merged, nodes[nb as usize].as_ref().unwrap()));
        }
        merges.push(Merge {
            a: a.id,
            b: b.id,
            height: best.delta,
            new_id,
        });
        nodes.push(Some(merged));
        neighbors.push(adj);
    }

    Ok(Dendrogram {
        initial_count: l,
        merges,
        superpixel_means: seg.stats().iter().map(|s| s.mean.clone()).collect(),
        superpixel_counts: seg.stats().iter().map(|s| s.count).collect(),
    })
}

/// Cluster nodes alive after the first `L − k` merges, ordered by id.
pub fn clusters_at(dendrogram: &Dendrogram, k: usize) -> Result<Vec<ClusterNode>> {
    let applied = merges_for(dendrogram, k)?;
    let mut nodes: Vec<Option<ClusterNode>> = dendrogram
        .superpixel_counts
        .iter()
        .zip(&dendrogram.superpixel_means)
        .enumerate()
        .map(|(i, (&n, mu))| {
            Some(ClusterNode {
                id: i as u32,
                members: vec![i as u32],
                n,
                mu: mu.clone(),
            })
        })
        .collect();
    for m in &dendrogram.merges[..applied] {
        let a = nodes[m.a as usize].take().unwrap();
        let b = nodes[m.b as usize].take().unwrap();
        nodes.push(Some(ClusterNode::merged(&a, &b, m.new_id)));
    }
    Ok(nodes.into_iter().flatten().collect())
}

fn merges_for(dendrogram: &Dendrogram, k: usize) -> Result<usize> {
    let l = dendrogram.initial_count;
    let min = dendrogram.min_clusters();
    if k < min || k > l {
        return Err(Error::ClusterCountOutOfRange { k, min, max: l });
    }
    Ok(l - k)
}

/// Label map with `k` clusters, densely renumbered in row-major first-appearance order.
pub fn cut_dendrogram(
    dendrogram: &Dendrogram,
    seg: &SuperpixelSegmentation,
    k: usize,
) -> Result<LabelMap> {
    if seg.len() != dendrogram.initial_count {
        return Err(Error::DimensionMismatch(format!(
            "dendrogram over {} superpixels, segmentation has {}",
            dendrogram.initial_count,
            seg.len()
        )));
    }
    let applied = merges_for(dendrogram, k)?;
    let cluster = dendrogram.assignment(applied);
    let labels = seg.labels();
    let raw = labels
        .labels()
        .iter()
        .map(|&l| cluster[l as usize])
        .collect();
    Ok(LabelMap::new(labels.height(), labels.width(), raw)?.densified())
}
