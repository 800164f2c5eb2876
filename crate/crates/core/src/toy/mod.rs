//! A small augmented autoencoder trained on rotating squares.
//!
//! Training on randomly scaled and shifted squares while reconstructing a
//! fixed-size centered square of the same rotation yields a 2-D code that
//! depends on rotation only and traces sinusoids of period `π/2`.

pub mod analyze;
pub mod loss;
pub mod model;
pub mod squares;
pub mod train;

pub use analyze::{analyze_latent, fit_sinusoid, LatentReport, LatentTrace, SineFit};
pub use loss::bootstrapped_l2;
pub use model::{Activation, Adam, Autoencoder, ToyModel};
pub use squares::{draw_square, Distribution, SquareSpec, CANVAS};
pub use train::{load_checkpoint, save_checkpoint, train, TrainConfig, TrainResult};
