//! Augmented-autoencoder style 6D object pose estimation at desk scale.
//!
//! The crate covers the whole pipeline around an orientation codebook:
//!
//! - [`geom`]: rotations, poses, pinhole intrinsics, view-sphere sampling
//! - [`render`]: depth-only rasterizer, mesh IO, synthetic codebook views
//! - [`codebook`]: latent-code codebook, exact cosine kNN, binary file format
//! - [`pipeline`]: crop, projective distance, translation, perspective correction
//! - [`icp`]: point-to-plane ICP refinement on depth
//! - [`metrics`]: VSD, ADD/ADI, recall and AUC
//! - [`augment`]: domain-randomization image augmentations
//! - [`toy`]: a small augmented autoencoder trained on rotating squares
//! - [`cli`]: the batch command surface behind the `aae` binary

pub mod augment;
pub mod cli;
pub mod codebook;
pub mod error;
pub mod geom;
pub mod icp;
pub mod image;
pub mod kdtree;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod toy;

pub use error::{Error, Result};
