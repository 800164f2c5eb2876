//! Training loop, checkpoint format and loss-curve CSV.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{Activation, Adam, Autoencoder, Layer, ToyModel};
use super::squares::{draw_square, Distribution, SquareSpec, CANVAS};
use crate::augment::{augment, AugmentConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::Rng;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AAET";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const LOSS_INTERVAL: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub bootstrap_k: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub latent_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            batch_size: 64,
            iterations: 10_000,
            bootstrap_k: 4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            latent_dim: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::Config("learning_rate and epsilon must be > 0".into()));
        }
        if self.batch_size == 0 || self.bootstrap_k == 0 || self.latent_dim == 0 {
            return Err(Error::Config(
                "batch_size, bootstrap_k and latent_dim must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Encoder widths of the toy network.
    pub fn layer_dims(&self) -> [usize; 4] {
        [CANVAS * CANVAS, 256, 64, self.latent_dim]
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: ToyModel,
    /// `(iteration, batch loss)` every [`LOSS_INTERVAL`] iterations and at the end.
    pub losses: Vec<(usize, f64)>,
}

/// Freshly initialized model for a config.
pub fn init_model(cfg: &TrainConfig) -> Result<ToyModel> {
    Autoencoder::new(&cfg.layer_dims(), &mut Rng::split(cfg.seed, 0))
}

fn copy_row(batch: &mut Array2<f32>, row: usize, img: &Image) {
    batch
        .row_mut(row)
        .as_slice_mut()
        .expect("row-major batch")
        .copy_from_slice(&img.data);
}

/// Draws one training pair. Equal distributions give a plain autoencoder
/// pair; otherwise the target is drawn from `target_dist` at the input's rotation.
pub fn sample_pair(
    input_dist: Distribution,
    target_dist: Distribution,
    augment_cfg: Option<&AugmentConfig>,
    rng: &mut Rng,
) -> Result<(Image, Image)> {
    let spec = input_dist.sample(rng);
    let clean = draw_square(&spec, CANVAS)?;
    let target = if input_dist == target_dist {
        clean.clone()
    } else {
        let t: SquareSpec = target_dist.sample(rng).with_rotation(spec.r);
        draw_square(&t, CANVAS)?
    };
    let input = match augment_cfg {
        Some(cfg) => augment(&clean, cfg, rng).0,
        None => clean,
    };
    Ok((input, target))
}

/// Trains the toy autoencoder. Deterministic for a given config.
pub fn train(
    cfg: &TrainConfig,
    input_dist: Distribution,
    target_dist: Distribution,
    augment_cfg: Option<&AugmentConfig>,
) -> Result<TrainResult> {
    cfg.validate()?;
    if let Some(a) = augment_cfg {
        a.validate()?;
    }
    let mut model = init_model(cfg)?;
    let mut adam = Adam::new(&model, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut rng = Rng::split(cfg.seed, 1);
    let d = CANVAS * CANVAS;
    let mut x = Array2::<f32>::zeros((cfg.batch_size, d));
    let mut y = Array2::<f32>::zeros((cfg.batch_size, d));
    let mut losses = Vec::new();
    for it in 0..cfg.iterations {
        for b in 0..cfg.batch_size {
            let (input, target) = sample_pair(input_dist, target_dist, augment_cfg, &mut rng)?;
            copy_row(&mut x, b, &input);
            copy_row(&mut y, b, &target);
        }
        let (loss, grads) = model.loss_and_gradients(x.view(), y.view(), cfg.bootstrap_k)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { iteration: it });
        }
        if it % LOSS_INTERVAL == 0 || it + 1 == cfg.iterations {
            log::debug!("iteration {it}: loss {loss}");
            losses.push((it, loss as f64));
        }
        adam.update(&mut model, &grads);
        if it % LOSS_INTERVAL == 0 && !model.is_finite() {
            return Err(Error::TrainingDiverged { iteration: it });
        }
    }
    Ok(TrainResult { model, losses })
}

/// Flattens images into batch rows.
pub fn images_to_batch(images: &[Image]) -> Result<Array2<f32>> {
    let d = images.first().map_or(0, |i| i.data.len());
    let mut batch = Array2::zeros((images.len(), d));
    for (i, img) in images.iter().enumerate() {
        if img.data.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: img.data.len(),
            });
        }
        copy_row(&mut batch, i, img);
    }
    Ok(batch)
}

pub fn write_loss_csv(mut w: impl Write, losses: &[(usize, f64)]) -> Result<()> {
    writeln!(w, "iteration,loss")?;
    for (it, loss) in losses {
        writeln!(w, "{it},{loss}")?;
    }
    Ok(())
}

/// Little-endian checkpoint:
///
/// ```text
/// magic "AAET" | version u32 | layer count u32 | encoder layer count u32
/// per layer: inputs u32 | outputs u32 | activation u8 (0 relu, 1 tanh, 2 sigmoid, 3 identity)
///            | weights f32[inputs * outputs] (row-major, inputs x outputs) | bias f32[outputs]
/// ```
pub fn write_checkpoint(model: &ToyModel, mut w: impl Write) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    for v in [
        CHECKPOINT_VERSION,
        model.layers.len() as u32,
        model.encoder_layers as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for layer in &model.layers {
        w.write_all(&(layer.inputs() as u32).to_le_bytes())?;
        w.write_all(&(layer.outputs() as u32).to_le_bytes())?;
        w.write_all(&[layer.activation.code()])?;
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<ToyModel> {
    let mut offset = 0u64;
    let mut take = |n: usize, r: &mut dyn Read| -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        r.read_exact(&mut buf).map_err(|_| Error::Format {
            offset,
            msg: "truncated checkpoint".into(),
        })?;
        offset += n as u64;
        Ok(buf)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    if take(4, &mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: "bad checkpoint magic".into(),
        });
    }
    let header = take(12, &mut r)?;
    let version = u32_at(&header[0..4]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (n, encoder_layers) = (u32_at(&header[4..8]) as usize, u32_at(&header[8..12]) as usize);
    if n == 0 || encoder_layers == 0 || encoder_layers > n {
        return Err(Error::Format {
            offset: 4,
            msg: format!("invalid layer counts {n}/{encoder_layers}"),
        });
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let h = take(9, &mut r)?;
        let (inputs, outputs) = (u32_at(&h[0..4]) as usize, u32_at(&h[4..8]) as usize);
        let activation = Activation::from_code(h[8]).ok_or_else(|| Error::Format {
            offset: 0,
            msg: format!("unknown activation code {}", h[8]),
        })?;
        if let Some(prev) = layers.last().map(|l: &Layer<f32>| l.outputs()) {
            if prev != inputs {
                return Err(Error::Dimension {
                    expected: prev,
                    actual: inputs,
                });
            }
        }
        let floats = |bytes: Vec<u8>| -> Vec<f32> {
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect()
        };
        let weights = floats(take(inputs * outputs * 4, &mut r)?);
        let bias = floats(take(outputs * 4, &mut r)?);
        layers.push(Layer {
            weights: Array2::from_shape_vec((inputs, outputs), weights).expect("sized by header"),
            bias: Array1::from_vec(bias),
            activation,
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format {
            offset,
            msg: "trailing bytes".into(),
        });
    }
    let model = Autoencoder { layers, encoder_layers };
    if !model.is_finite() {
        return Err(Error::Format {
            offset: 0,
            msg: "non-finite weights".into(),
        });
    }
    Ok(model)
}

pub fn save_checkpoint(model: &ToyModel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(model, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ToyModel> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        TrainConfig {
            iterations: 3,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_initial_model() {
        let cfg = TrainConfig {
            iterations: 0,
            ..tiny()
        };
        let out = train(&cfg, Distribution::A, Distribution::A, None).unwrap();
        assert_eq!(out.model, init_model(&cfg).unwrap());
        assert!(out.losses.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&tiny(), Distribution::D, Distribution::A, None).unwrap();
        let b = train(&tiny(), Distribution::D, Distribution::A, None).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.losses.iter().map(|l| l.0).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn aae_targets_share_rotation() {
        let mut rng = Rng::seed_from_u64(2);
        let (input, target) = sample_pair(Distribution::D, Distribution::A, None, &mut rng).unwrap();
        assert_ne!(input, target);
        let (input, target) = sample_pair(Distribution::B, Distribution::B, None, &mut rng).unwrap();
        assert_eq!(input, target);
    }

    #[test]
    fn checkpoint_roundtrip_and_errors() {
        let model = init_model(&tiny()).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), model);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        bytes.push(0);
        assert!(read_checkpoint(bytes.as_slice()).is_err());
    }

    #[test]
    fn loss_csv_layout() {
        let mut out = Vec::new();
        write_loss_csv(&mut out, &[(0, 1.5), (100, 0.25)]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "iteration,loss\n0,1.5\n100,0.25\n");
    }
}
