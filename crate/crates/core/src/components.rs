//! 4-connected component labeling and undersized-fragment absorption.

use std::collections::HashSet;

use crate::raster::LabelMap;

/// 4-connected components of equal-label pixels.
#[derive(Clone, Debug)]
pub struct Components {
    /// Component id per pixel, numbered in row-major order of first pixel.
    pub ids: Vec<u32>,
    /// Pixel count per component.
    pub sizes: Vec<usize>,
    /// Source label per component.
    pub labels: Vec<u32>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Undirected component adjacency as sorted, deduplicated `(lo, hi)` pairs.
    pub fn adjacency(&self, width: usize) -> Vec<(u32, u32)> {
        let mut pairs = Vec::new();
        for (i, &a) in self.ids.iter().enumerate() {
            let x = i % width;
            if x + 1 < width {
                let b = self.ids[i + 1];
                if a != b {
                    pairs.push((a.min(b), a.max(b)));
                }
            }
            if let Some(&b) = self.ids.get(i + width) {
                if a != b {
                    pairs.push((a.min(b), a.max(b)));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

pub fn label_components(labels: &LabelMap) -> Components {
    let (h, w) = (labels.height(), labels.width());
    let src = labels.labels();
    let mut ids = vec![u32::MAX; h * w];
    let mut sizes = Vec::new();
    let mut comp_labels = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if ids[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        let label = src[start];
        let mut size = 0;
        ids[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if ids[j] == u32::MAX && src[j] == label {
                    ids[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
        comp_labels.push(label);
    }
    Components {
        ids,
        sizes,
        labels: comp_labels,
    }
}

/// True when every label's pixel set is a single 4-connected component.
pub fn is_label_connected(labels: &LabelMap) -> bool {
    let comps = label_components(labels);
    let mut seen = HashSet::new();
    comps.labels.iter().all(|l| seen.insert(*l))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbsorbOptions {
    /// Components with fewer pixels than this are absorbed.
    pub min_size: f64,
    /// Also absorb every component that is not the largest piece of its label,
    /// so the output never has more regions than distinct input labels.
    pub absorb_secondary: bool,
}

struct Forest {
    parent: Vec<usize>,
}

impl Forest {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
}

/// Relabels undersized components into their largest adjacent component
/// (ties to the smaller component id) until none remain. Output is dense.
pub fn absorb_small_components(labels: &LabelMap, opts: AbsorbOptions) -> LabelMap {
    let comps = label_components(labels);
    let n = comps.count();
    let mut neighbors: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (a, b) in comps.adjacency(labels.width()) {
        neighbors[a as usize].insert(b as usize);
        neighbors[b as usize].insert(a as usize);
    }

    // Secondary pieces: every component except the largest (first on ties) of its label.
    let mut pending_secondary = vec![false; n];
    if opts.absorb_secondary {
        let mut primary: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
        for c in 0..n {
            primary
                .entry(comps.labels[c])
                .and_modify(|p| {
                    if comps.sizes[c] > comps.sizes[*p] {
                        *p = c;
                    }
                })
                .or_insert(c);
        }
        for c in 0..n {
            pending_secondary[c] = primary[&comps.labels[c]] != c;
        }
    }

    let mut forest = Forest {
        parent: (0..n).collect(),
    };
    let mut size = comps.sizes.clone();
    loop {
        let mut merged = false;
        for c in 0..n {
            if forest.find(c) != c {
                continue;
            }
            let undersized = (size[c] as f64) < opts.min_size;
            if !undersized && !pending_secondary[c] {
                continue;
            }
            let mut best: Option<usize> = None;
            let adjacent: Vec<usize> = neighbors[c].iter().copied().collect();
            for nb in adjacent {
                let r = forest.find(nb);
                if r == c {
                    continue;
                }
                best = match best {
                    None => Some(r),
                    Some(b) if size[r] > size[b] || (size[r] == size[b] && r < b) => Some(r),
                    keep => keep,
                };
            }
            let Some(target) = best else { continue };
            forest.parent[c] = target;
            size[target] += size[c];
            pending_secondary[c] = false;
            let moved = std::mem::take(&mut neighbors[c]);
            for nb in moved {
                let r = forest.find(nb);
                if r != target {
                    neighbors[target].insert(r);
                }
            }
            merged = true;
        }
        if !merged {
            break;
        }
    }

    let mut dense = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut out = Vec::with_capacity(comps.ids.len());
    for &id in &comps.ids {
        let r = forest.find(id as usize);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        out.push(dense[r]);
    }
    LabelMap::new(labels.height(), labels.width(), out).expect("same dims")
}
