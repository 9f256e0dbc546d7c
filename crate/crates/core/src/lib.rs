//! Superpixel pre-segmentation of stained histology patches.
//!
//! The crate is organised around three raster types ([`RasterImage`],
//! [`FeatureMap`], [`LabelMap`]) and the stages that connect them:
//!
//! - [`stain`]: RGB to HED optical-density deconvolution and hematoxylin suppression.
//! - [`slic`]: SLIC clustering over arbitrary C-channel feature maps.
//! - [`merge`]: region adjacency graph and adjacency-constrained Ward agglomeration.
//! - [`metrics`]: achievable segmentation accuracy and tolerance-based boundary F1.
//! - [`overlay`] and [`polygon`]: rendering and GeoJSON export for annotation tools.

pub mod components;
pub mod error;
pub mod ftm;
pub mod labelio;
pub mod merge;
pub mod metrics;
pub mod overlay;
pub mod polygon;
pub mod raster;
pub mod slic;
pub mod stain;
pub mod synthetic;
pub mod upsample;

pub use error::{Error, Result};
pub use raster::{FeatureMap, LabelMap, RasterImage};
