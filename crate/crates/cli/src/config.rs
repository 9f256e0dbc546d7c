//! Run configuration: TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spixel::slic::SlicParams;
use spixel::stain::{StainMatrix, SuppressionParams};
use spixel::upsample::UpsampleMode;

pub const DEFAULT_DIAMETERS: [usize; 6] = [40, 60, 80, 120, 160, 240];

/// Compactness used for RGB and HED features when none is configured.
pub const COLOR_COMPACTNESS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RgbSlic,
    HedSlic,
    FeatureSlic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RgbSlic => "rgb-slic",
            Method::HedSlic => "hed-slic",
            Method::FeatureSlic => "feature-slic",
        }
    }

    pub fn default_compactness(self) -> f64 {
        match self {
            Method::RgbSlic | Method::HedSlic => COLOR_COMPACTNESS,
            Method::FeatureSlic => SlicParams::default().compactness,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rgb-slic" => Method::RgbSlic,
            "hed-slic" => Method::HedSlic,
            "feature-slic" => Method::FeatureSlic,
            other => {
                bail!("unknown method {other:?} (expected rgb-slic, hed-slic or feature-slic)")
            }
        })
    }
}

/// Target cluster count for a dendrogram cut; `None` keeps raw superpixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum ClusterCount {
    #[default]
    None,
    K(usize),
}

impl fmt::Display for ClusterCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterCount::None => f.write_str("none"),
            ClusterCount::K(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for ClusterCount {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(ClusterCount::None);
        }
        let k: usize = s
            .parse()
            .with_context(|| format!("cluster count {s:?} is not an integer or \"none\""))?;
        if k == 0 {
            bail!("cluster count must be >= 1");
        }
        Ok(ClusterCount::K(k))
    }
}

impl Serialize for ClusterCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ClusterCount::None => s.serialize_str("none"),
            ClusterCount::K(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ClusterCount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(0) => Err(serde::de::Error::custom("cluster count must be >= 1")),
            Raw::Int(k) => Ok(ClusterCount::K(k as usize)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// SLIC settings as written in a config file. Compactness may be left out
/// to get the per-method default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicSection {
    pub step: usize,
    pub compactness: Option<f64>,
    pub iterations: usize,
    pub min_region_frac: f64,
    pub normalize_features: Option<bool>,
}

impl Default for SlicSection {
    fn default() -> Self {
        let p = SlicParams::default();
        Self {
            step: p.step,
            compactness: None,
            iterations: p.iterations,
            min_region_frac: p.min_region_frac,
            normalize_features: p.normalize_features,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Methods to sweep; empty means just the top-level `method`.
    pub methods: Vec<Method>,
    pub diameters: Vec<usize>,
    pub cluster_counts: Vec<ClusterCount>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            methods: Vec::new(),
            diameters: DEFAULT_DIAMETERS.to_vec(),
            cluster_counts: vec![ClusterCount::None],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub image: Option<PathBuf>,
    pub method: Method,
    /// FTM tensor for feature-slic.
    pub features: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Label ignored by every metric (e.g. an unannotated class).
    pub ignore_label: Option<u32>,
    pub slic: SlicSection,
    pub suppression: SuppressionParams,
    /// Row-major H, E, DAB optical-density vectors; default basis if absent.
    pub stain_matrix: Option<Vec<f64>>,
    pub upsample: UpsampleMode,
    pub sweep: SweepSection,
    /// Cut used by `cluster` and `render`.
    pub k: ClusterCount,
    pub tolerance: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// Fill the runtime_ms column. Off by default so reports are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image: None,
            method: Method::RgbSlic,
            features: None,
            ground_truth: None,
            ignore_label: None,
            slic: SlicSection::default(),
            suppression: SuppressionParams::default(),
            stain_matrix: None,
            upsample: UpsampleMode::default(),
            sweep: SweepSection::default(),
            k: ClusterCount::None,
            tolerance: spixel::metrics::DEFAULT_TOLERANCE_PX,
            out: PathBuf::from("out"),
            seed: 0,
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn slic_params(&self, method: Method, step: usize) -> SlicParams {
        SlicParams {
            step,
            compactness: self
                .slic
                .compactness
                .unwrap_or_else(|| method.default_compactness()),
            iterations: self.slic.iterations,
            min_region_frac: self.slic.min_region_frac,
            normalize_features: self.slic.normalize_features,
        }
    }

    pub fn stain_matrix(&self) -> Result<StainMatrix> {
        match &self.stain_matrix {
            Some(v) => Ok(StainMatrix::from_slice(v)?),
            None => Ok(StainMatrix::default()),
        }
    }

    pub fn sweep_methods(&self) -> Vec<Method> {
        if self.sweep.methods.is_empty() {
            vec![self.method]
        } else {
            self.sweep.methods.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for method in self.sweep_methods().into_iter().chain([self.method]) {
            if method == Method::FeatureSlic && self.features.is_none() {
                bail!("feature-slic needs a feature tensor (--features)");
            }
            self.slic_params(method, self.slic.step).validate()?;
        }
        if self.sweep.diameters.is_empty() {
            bail!("sweep diameters must not be empty");
        }
        if self.sweep.cluster_counts.is_empty() {
            bail!("sweep cluster counts must not be empty");
        }
        for &d in &self.sweep.diameters {
            self.slic_params(self.method, d).validate()?;
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            bail!("tolerance {} must be >= 0", self.tolerance);
        }
        self.suppression.validate()?;
        self.stain_matrix()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_count_parsing() {
        assert_eq!("none".parse::<ClusterCount>().unwrap(), ClusterCount::None);
        assert_eq!(" 12 ".parse::<ClusterCount>().unwrap(), ClusterCount::K(12));
        assert!("0".parse::<ClusterCount>().is_err());
        assert!("many".parse::<ClusterCount>().is_err());
        assert_eq!(ClusterCount::K(4).to_string(), "4");
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            method = "hed-slic"
            tolerance = 2.0
            k = 8
            [slic]
            step = 60
            compactness = 0.5
            [suppression]
            alpha = 0.0
            [sweep]
            methods = ["rgb-slic", "hed-slic"]
            diameters = [40, 80]
            cluster_counts = ["none", 4, 16]
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.method, Method::HedSlic);
        assert_eq!(cfg.slic.step, 60);
        assert_eq!(cfg.slic.iterations, 10);
        assert_eq!(cfg.suppression.alpha, 0.0);
        assert_eq!(cfg.suppression.sigma, 15.0);
        assert_eq!(cfg.k, ClusterCount::K(8));
        assert_eq!(
            cfg.sweep.cluster_counts,
            vec![ClusterCount::None, ClusterCount::K(4), ClusterCount::K(16)]
        );
        let back: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("stepp = 3").is_err());
    }

    #[test]
    fn compactness_defaults_per_method() {
        let cfg = RunConfig::default();
        assert_eq!(
            cfg.slic_params(Method::RgbSlic, 40).compactness,
            COLOR_COMPACTNESS
        );
        assert_eq!(cfg.slic_params(Method::FeatureSlic, 40).compactness, 10.0);
        let mut cfg = cfg;
        cfg.slic.compactness = Some(3.0);
        assert_eq!(cfg.slic_params(Method::HedSlic, 40).compactness, 3.0);
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.method = Method::FeatureSlic;
        assert!(cfg.validate().is_err());
        cfg.features = Some("x.ftm".into());
        assert!(cfg.validate().is_ok());
        cfg.sweep.diameters.clear();
        assert!(cfg.validate().is_err());
    }
}
