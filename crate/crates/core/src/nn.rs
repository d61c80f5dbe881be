//! Minimal dense-network kernel: batched forward passes, hand-written
//! reverse-mode gradients, Adam, and a bit-exact binary parameter format.
//!
//! Everything is 64-bit. Hidden layers use ReLU, the output layer is linear.
//! Matrix products go through `ndarray`'s gemm; the backward pass, optimizer
//! and serialization are implemented here.

use std::io::{Read, Write};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::CheckpointError;

const MLP_MAGIC: &[u8; 5] = b"WGMLP";
const MLP_VERSION: u8 = 1;

/// Dense multi-layer perceptron. `widths` lists the layer sizes including
/// input and output; weights are stored row-major as `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Cached activations from a batched forward pass, consumed by `backward`.
pub struct ForwardTrace {
    /// `activations[0]` is the input batch; `activations[l + 1]` is the
    /// output of layer `l` after its activation function.
    activations: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

impl ForwardTrace {
    /// Network output for the traced batch.
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace holds >= 1 layer")
    }

    /// Smallest |pre-activation| over all hidden units, used to detect
    /// inputs that sit on a ReLU kink.
    pub fn min_abs_hidden_pre(&self) -> f64 {
        let hidden = self.pre.len().saturating_sub(1);
        let mut m = f64::INFINITY;
        for p in &self.pre[..hidden] {
            for v in p.iter() {
                m = m.min(v.abs());
            }
        }
        m
    }
}

/// Per-parameter values shaped exactly like an [`Mlp`]: gradients, Adam
/// moments, and anything else that mirrors the parameter tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * s);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * s);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

impl Mlp {
    /// Fan-in uniform initialization: each layer's weights and biases are
    /// drawn from `U(-1/sqrt(in), 1/sqrt(in))`, layer by layer, weights
    /// row-major then bias, so a seed fully determines the parameters.
    pub fn new(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        assert!(widths.iter().all(|&w| w > 0), "zero-width layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            let w = Array2::from_shape_fn((n_out, n_in), |_| rng.random_range(-bound..bound));
            let b = Array1::from_shape_fn(n_out, |_| rng.random_range(-bound..bound));
            weights.push(w);
            biases.push(b);
        }
        Mlp {
            widths: widths.to_vec(),
            weights,
            biases,
        }
    }

    /// All-zero parameters (useful for tests and hand-set networks).
    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2);
        Mlp {
            widths: widths.to_vec(),
            weights: (0..widths.len() - 1)
                .map(|l| Array2::zeros((widths[l + 1], widths[l])))
                .collect(),
            biases: (0..widths.len() - 1)
                .map(|l| Array1::zeros(widths[l + 1]))
                .collect(),
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn weight(&self, layer: usize) -> &Array2<f64> {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.biases[layer]
    }

    /// Flat parameter access in serialization order (layer by layer, weights
    /// row-major then bias). Used by the finite-difference oracle.
    pub fn param(&self, mut idx: usize) -> f64 {
        for l in 0..self.num_layers() {
            if idx < self.weights[l].len() {
                return self.weights[l].as_slice().unwrap()[idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in 0..self.num_layers() {
            if idx < self.weights[l].len() {
                return &mut self.weights[l].as_slice_mut().unwrap()[idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return &mut self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    /// Gradient value at the same flat index as [`Mlp::param`].
    pub fn grad_at(grads: &Gradients, mut idx: usize) -> f64 {
        for l in 0..grads.weights.len() {
            if idx < grads.weights[l].len() {
                return grads.weights[l].as_slice().unwrap()[idx];
            }
            idx -= grads.weights[l].len();
            if idx < grads.biases[l].len() {
                return grads.biases[l][idx];
            }
            idx -= grads.biases[l].len();
        }
        panic!("gradient index out of range");
    }

    /// Deterministic single-sample forward pass. Plain dot-product loops:
    /// the gemm path pays packing overhead that dwarfs a one-row product.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input length mismatch");
        let last = self.num_layers() - 1;
        let mut a = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.num_layers() {
            let w = self.weights[l].as_slice().expect("standard layout");
            let b = &self.biases[l];
            let n_in = self.widths[l];
            let n_out = self.widths[l + 1];
            next.clear();
            next.reserve(n_out);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = b[o];
                for (wi, ai) in row.iter().zip(&a) {
                    z += wi * ai;
                }
                next.push(if l < last { z.max(0.0) } else { z });
            }
            std::mem::swap(&mut a, &mut next);
        }
        a
    }

    /// Batched forward pass; rows are samples.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_batch_view(&x.view())
    }

    fn forward_batch_view(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let last = self.num_layers() - 1;
        let mut a = x.to_owned();
        for l in 0..self.num_layers() {
            let mut z = a.dot(&self.weights[l].t());
            z += &self.biases[l];
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Forward pass that caches everything `backward` needs.
    pub fn forward_trace(&self, x: &Array2<f64>) -> ForwardTrace {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let last = self.num_layers() - 1;
        let mut activations = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let mut z = activations[l].dot(&self.weights[l].t());
            z += &self.biases[l];
            pre.push(z.clone());
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        ForwardTrace { activations, pre }
    }

    /// Exact reverse-mode gradients for a traced batch. `upstream` is
    /// dLoss/dOutput with the same shape as the output batch; returns the
    /// parameter gradients and dLoss/dInput.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(trace, upstream, &mut grads);
        (grads, input_grad)
    }

    /// [`Mlp::backward`] writing into caller-owned gradient buffers, sparing
    /// the per-call allocations on the training hot path.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        upstream: &Array2<f64>,
        grads: &mut Gradients,
    ) -> Array2<f64> {
        let mut delta = upstream.clone();
        for l in (0..self.num_layers()).rev() {
            general_mat_mul(1.0, &delta.t(), &trace.activations[l], 0.0, &mut grads.weights[l]);
            grads.biases[l].assign(&delta.sum_axis(Axis(0)));
            let mut prev = delta.dot(&self.weights[l]);
            if l > 0 {
                Zip::from(&mut prev).and(&trace.pre[l - 1]).for_each(|d, &p| {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            } else {
                return prev;
            }
        }
        unreachable!("num_layers >= 1")
    }

    /// dLoss/dInput only, skipping the parameter-gradient outer products.
    pub fn backward_input_only(&self, trace: &ForwardTrace, upstream: &Array2<f64>) -> Array2<f64> {
        let mut delta = upstream.clone();
        for l in (0..self.num_layers()).rev() {
            let mut prev = delta.dot(&self.weights[l]);
            if l > 0 {
                Zip::from(&mut prev).and(&trace.pre[l - 1]).for_each(|d, &p| {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            } else {
                return prev;
            }
        }
        unreachable!("num_layers >= 1")
    }

    /// Soft-update toward `online`: `self = tau * online + (1 - tau) * self`,
    /// applied elementwise in exactly that expression order.
    pub fn blend_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.widths, online.widths, "blend between unlike networks");
        for (t, o) in self.weights.iter_mut().zip(&online.weights) {
            Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        for (t, o) in self.biases.iter_mut().zip(&online.biases) {
            Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
    }

    // -- serialization ------------------------------------------------------

    /// Binary layout: magic `WGMLP`, version byte, u32 layer count, the layer
    /// widths as u32, then every parameter as little-endian f64 (layer by
    /// layer, weights row-major, then bias). Round-trips are bit-exact.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MLP_MAGIC)?;
        w.write_all(&[MLP_VERSION])?;
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for &width in &self.widths {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        for l in 0..self.num_layers() {
            for v in self.weights[l].iter() {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in self.biases[l].iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 5];
        read_exact(r, &mut magic)?;
        if &magic != MLP_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u8(r)?;
        if version != MLP_VERSION {
            return Err(CheckpointError::UnsupportedVersion {
                found: version,
                supported: MLP_VERSION,
            });
        }
        let n = read_u32(r)? as usize;
        if !(2..=64).contains(&n) {
            return Err(CheckpointError::Corrupt(format!("layer count {n}")));
        }
        let mut widths = Vec::with_capacity(n);
        for _ in 0..n {
            let w = read_u32(r)? as usize;
            if w == 0 || w > 1_000_000 {
                return Err(CheckpointError::Corrupt(format!("layer width {w}")));
            }
            widths.push(w);
        }
        let mut net = Mlp::zeros(&widths);
        for l in 0..net.num_layers() {
            for v in net.weights[l].iter_mut() {
                *v = read_f64(r)?;
            }
            for v in net.biases[l].iter_mut() {
                *v = read_f64(r)?;
            }
        }
        Ok(net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut cursor = bytes;
        Mlp::read_from(&mut cursor)
    }
}

pub(crate) fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CheckpointError::Corrupt("unexpected end of stream".into())
        } else {
            CheckpointError::Corrupt(e.to_string())
        }
    })
}

pub(crate) fn read_u8(r: &mut impl Read) -> Result<u8, CheckpointError> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64, CheckpointError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam optimizer state for one [`Mlp`]; moments are shaped exactly like the
/// parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// One bias-corrected Adam update applied in place.
    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..net.num_layers() {
            Zip::from(&mut net.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut net.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Adam for a single scalar parameter (the entropy temperature).
#[derive(Debug, Clone, Copy)]
pub struct ScalarAdam {
    lr: f64,
    step: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        ScalarAdam {
            lr,
            step: 0,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn apply(&mut self, param: &mut f64, grad: f64) {
        self.step += 1;
        let t = self.step as i32;
        self.m = ADAM_BETA1 * self.m + (1.0 - ADAM_BETA1) * grad;
        self.v = ADAM_BETA2 * self.v + (1.0 - ADAM_BETA2) * grad * grad;
        let m_hat = self.m / (1.0 - ADAM_BETA1.powi(t));
        let v_hat = self.v / (1.0 - ADAM_BETA2.powi(t));
        *param -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}
