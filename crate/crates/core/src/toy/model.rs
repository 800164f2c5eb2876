//! Fully-connected autoencoder with hand-written backpropagation.

use std::fmt::Debug;
use std::ops::AddAssign;

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use super::loss::bootstrapped_into;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Float type the network can run in.
pub trait Scalar:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + AddAssign + Debug + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + LinalgScalar + ScalarOperand + AddAssign + Debug + Send + Sync + 'static
{
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(&self, z: &mut Array2<T>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(T::zero())),
            Activation::Tanh => z.mapv_inplace(|v| v.tanh()),
            Activation::Sigmoid => z.mapv_inplace(|v| T::one() / (T::one() + (-v).exp())),
            Activation::Identity => {}
        }
    }

    /// Turns `dL/da` into `dL/dz` in place, given the activation output `a`.
    fn backprop<T: Scalar>(&self, grad: &mut Array2<T>, a: &Array2<T>) {
        match self {
            Activation::Relu => Zip::from(grad).and(a).for_each(|g, &a| {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }),
            Activation::Tanh => Zip::from(grad).and(a).for_each(|g, &a| *g = *g * (T::one() - a * a)),
            Activation::Sigmoid => Zip::from(grad).and(a).for_each(|g, &a| *g = *g * a * (T::one() - a)),
            Activation::Identity => {}
        }
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Identity => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Sigmoid),
            3 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Dense layer `a = act(x W + b)` with `W` stored as `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Encoder followed by its mirrored decoder; the code is the output of
/// layer `encoder_layers - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub layers: Vec<Layer<T>>,
    pub encoder_layers: usize,
}

pub type ToyModel = Autoencoder<f32>;

/// Per-layer activations of one batch; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub activations: Vec<Array2<T>>,
    encoder_layers: usize,
}

impl<T> ForwardPass<T> {
    pub fn codes(&self) -> &Array2<T> {
        &self.activations[self.encoder_layers]
    }

    pub fn reconstruction(&self) -> &Array2<T> {
        self.activations.last().expect("at least the input")
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub bias: Vec<Array1<T>>,
}

impl<T: Scalar> Autoencoder<T> {
    /// Encoder widths `dims` (input first, code last), decoder mirrored.
    /// Hidden layers use ReLU, the code is linear and the output a sigmoid.
    /// Weights are Xavier-uniform, biases zero.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {dims:?}")));
        }
        let mut widths = dims.to_vec();
        widths.extend(dims.iter().rev().skip(1));
        let encoder_layers = dims.len() - 1;
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (widths[i], widths[i + 1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_simple_fn((fan_in, fan_out), || T::from_f64(rng.uniform(-a, a)).unwrap());
                let activation = if i == n - 1 {
                    Activation::Sigmoid
                } else if i == encoder_layers - 1 {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Autoencoder { layers, encoder_layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.encoder_layers - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_batch(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    fn run(&self, x: ArrayView2<T>, layers: usize) -> Vec<Array2<T>> {
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_owned());
        for layer in &self.layers[..layers] {
            let input = acts.last().expect("input pushed");
            let mut z = if is_sparse(input) {
                sparse_dot(input, &layer.weights)
            } else {
                input.dot(&layer.weights)
            };
            z += &layer.bias;
            layer.activation.apply(&mut z);
            acts.push(z);
        }
        acts
    }

    /// Batch rows are flattened images.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<ForwardPass<T>> {
        self.check_batch(&x)?;
        Ok(ForwardPass {
            activations: self.run(x, self.layers.len()),
            encoder_layers: self.encoder_layers,
        })
    }

    /// Latent codes only.
    pub fn encode(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_batch(&x)?;
        Ok(self.run(x, self.encoder_layers).pop().expect("code layer"))
    }

    /// Gradients given `dL/dx̂` at the reconstruction.
    pub fn backward(&self, pass: &ForwardPass<T>, grad_output: Array2<T>) -> Gradients<T> {
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut bias = Vec::with_capacity(n);
        let mut grad = grad_output;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&mut grad, &pass.activations[i + 1]);
            let input = &pass.activations[i];
            weights.push(if is_sparse(input) {
                sparse_transpose_dot(input, &grad)
            } else {
                input.t().dot(&grad)
            });
            bias.push(grad.sum_axis(Axis(0)));
            if i > 0 {
                grad = grad.dot(&layer.weights.t());
            }
        }
        weights.reverse();
        bias.reverse();
        Gradients { weights, bias }
    }

    /// Mean over the batch of the per-sample bootstrapped loss, with gradients.
    pub fn loss_and_gradients(&self, x: ArrayView2<T>, target: ArrayView2<T>, k: usize) -> Result<(T, Gradients<T>)> {
        if x.dim() != target.dim() {
            return Err(Error::Dimension {
                expected: x.len(),
                actual: target.len(),
            });
        }
        let pass = self.forward(x)?;
        let (loss, grad) = bootstrapped_batch(pass.reconstruction(), &target, k);
        Ok((loss, self.backward(&pass, grad)))
    }

    /// Loss only; used by gradient checks.
    pub fn loss(&self, x: ArrayView2<T>, target: ArrayView2<T>, k: usize) -> Result<T> {
        let pass = self.forward(x)?;
        Ok(bootstrapped_batch(pass.reconstruction(), &target, k).0)
    }
}

/// Mostly-zero inputs (binary images) take the sparse product path.
fn is_sparse<T: Scalar>(x: &Array2<T>) -> bool {
    let nonzero = x.iter().filter(|v| !v.is_zero()).count();
    nonzero * 4 < x.len()
}

/// `x W` accumulating only rows of `W` selected by nonzero inputs.
fn sparse_dot<T: Scalar>(x: &Array2<T>, w: &Array2<T>) -> Array2<T> {
    let mut z = Array2::zeros((x.nrows(), w.ncols()));
    for (xr, mut zr) in x.outer_iter().zip(z.outer_iter_mut()) {
        for (p, &v) in xr.iter().enumerate() {
            if !v.is_zero() {
                zr.scaled_add(v, &w.row(p));
            }
        }
    }
    z
}

/// `xᵀ g` accumulating only rows selected by nonzero inputs.
fn sparse_transpose_dot<T: Scalar>(x: &Array2<T>, g: &Array2<T>) -> Array2<T> {
    let mut out = Array2::zeros((x.ncols(), g.ncols()));
    for (xr, gr) in x.outer_iter().zip(g.outer_iter()) {
        for (p, &v) in xr.iter().enumerate() {
            if !v.is_zero() {
                out.row_mut(p).scaled_add(v, &gr);
            }
        }
    }
    out
}

/// Batch-mean bootstrapped loss and `dL/dx̂`.
fn bootstrapped_batch<T: Scalar>(recon: &Array2<T>, target: &ArrayView2<T>, k: usize) -> (T, Array2<T>) {
    let (b, d) = recon.dim();
    let scale = T::from_f64(1.0 / b as f64).unwrap();
    let two = T::from_f64(2.0).unwrap();
    let mut grad = Array2::zeros((b, d));
    let mut mask = vec![false; d];
    let mut scratch = Vec::with_capacity(d);
    let mut total = T::zero();
    for ((x_hat, x), mut g) in recon.outer_iter().zip(target.outer_iter()).zip(grad.outer_iter_mut()) {
        let x_hat = x_hat.as_slice().expect("row-major batch");
        let x = x.to_vec();
        total = total + bootstrapped_into(&x, x_hat, k, &mut mask, &mut scratch);
        for i in 0..d {
            if mask[i] {
                g[i] = two * (x_hat[i] - x[i]) * scale;
            }
        }
    }
    (total * scale, grad)
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &Autoencoder<T>, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros = Gradients {
            weights: model.layers.iter().map(|l| Array2::zeros(l.weights.dim())).collect(),
            bias: model.layers.iter().map(|l| Array1::zeros(l.bias.dim())).collect(),
        };
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, model: &mut Autoencoder<T>, grads: &Gradients<T>) {
        self.step += 1;
        let f = |v: f64| T::from_f64(v).unwrap();
        let (b1, b2) = (f(self.beta1), f(self.beta2));
        let lr_t = self.learning_rate * (1.0 - self.beta2.powi(self.step)).sqrt() / (1.0 - self.beta1.powi(self.step));
        let (lr_t, eps) = (f(lr_t), f(self.epsilon));
        let one = T::one();
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let params = [
                (
                    layer.weights.as_slice_mut(),
                    self.m.weights[i].as_slice_mut(),
                    self.v.weights[i].as_slice_mut(),
                    grads.weights[i].as_slice(),
                ),
                (
                    layer.bias.as_slice_mut(),
                    self.m.bias[i].as_slice_mut(),
                    self.v.bias[i].as_slice_mut(),
                    grads.bias[i].as_slice(),
                ),
            ];
            for (w, m, v, g) in params {
                let (w, m, v, g) = (
                    w.expect("contiguous"),
                    m.expect("contiguous"),
                    v.expect("contiguous"),
                    g.expect("contiguous"),
                );
                for j in 0..w.len() {
                    m[j] = b1 * m[j] + (one - b1) * g[j];
                    v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                    w[j] = w[j] - lr_t * m[j] / (v[j].sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn small(seed: u64) -> Autoencoder<f64> {
        Autoencoder::new(&[16, 8, 4, 2], &mut Rng::seed_from_u64(seed)).unwrap()
    }

    fn batch(rows: usize, seed: u64) -> Array2<f64> {
        let mut rng = Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, 16), || rng.next_f64())
    }

    #[test]
    fn architecture_mirrors_encoder() {
        let m = small(1);
        let widths: Vec<(usize, usize)> = m.layers.iter().map(|l| (l.inputs(), l.outputs())).collect();
        assert_eq!(widths, vec![(16, 8), (8, 4), (4, 2), (2, 4), (4, 8), (8, 16)]);
        assert_eq!(m.latent_dim(), 2);
        assert_eq!(m.layers[2].activation, Activation::Identity);
        assert_eq!(m.layers[5].activation, Activation::Sigmoid);
    }

    #[test]
    fn zero_weights_give_half() {
        let mut m = small(1);
        for l in &mut m.layers {
            l.weights.fill(0.0);
        }
        let pass = m.forward(batch(3, 2).view()).unwrap();
        assert!(pass.reconstruction().iter().all(|&v| v == 0.5));
        assert!(m.forward(Array2::zeros((2, 15)).view()).is_err());
    }

    #[test]
    fn duplicated_sample_has_same_gradient() {
        let m = small(4);
        let x = batch(1, 5);
        let t = batch(1, 6);
        let x2 = ndarray::concatenate![Axis(0), x, x];
        let t2 = ndarray::concatenate![Axis(0), t, t];
        let (l1, g1) = m.loss_and_gradients(x.view(), t.view(), 4).unwrap();
        let (l2, g2) = m.loss_and_gradients(x2.view(), t2.view(), 4).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.weights.iter().zip(&g2.weights) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = small(11);
        let x = batch(3, 12);
        let t = batch(3, 13).mapv(|v| (v > 0.5) as u8 as f64);
        let (_, g) = m.loss_and_gradients(x.view(), t.view(), 4).unwrap();
        let eps = 1e-4;
        let mut worst = 0.0f64;
        for li in 0..m.layers.len() {
            let shape = m.layers[li].weights.dim();
            for idx in 0..shape.0 * shape.1 {
                let (r, c) = (idx / shape.1, idx % shape.1);
                let mut plus = m.clone();
                plus.layers[li].weights[[r, c]] += eps;
                let mut minus = m.clone();
                minus.layers[li].weights[[r, c]] -= eps;
                let numeric = (plus.loss(x.view(), t.view(), 4).unwrap() - minus.loss(x.view(), t.view(), 4).unwrap())
                    / (2.0 * eps);
                let analytic = g.weights[li][[r, c]];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn adam_reduces_loss_on_fixed_batch() {
        let mut m = small(7);
        let x = batch(8, 8);
        let mut adam = Adam::new(&m, 1e-2, 0.9, 0.999, 1e-8);
        let before = m.loss(x.view(), x.view(), 1).unwrap();
        for _ in 0..300 {
            let (_, g) = m.loss_and_gradients(x.view(), x.view(), 1).unwrap();
            adam.update(&mut m, &g);
        }
        assert!(m.loss(x.view(), x.view(), 1).unwrap() < before / 2.0);
    }
}
