//! Basic trainable layers: dense, embedding lookup, layer normalization.
//!
//! Layers hold block handles into a [`ParamStore`]; forward passes read the
//! store, backward passes accumulate into a [`Gradients`] buffer and return
//! the gradient with respect to their input.

use rand::Rng;

use crate::neural::ops::{add_bias, bias_grad_acc, matmul, matmul_nt, matmul_tn_acc};
use crate::neural::store::{BlockId, Gradients, ParamStore};
use crate::seed::stream;

/// Xavier-uniform weight draw for a (fan_out x fan_in) matrix.
pub(crate) fn xavier_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect()
}

pub(crate) fn normal_draw(rng: &mut impl Rng, len: usize, sd: f64) -> Vec<f64> {
    (0..len).map(|_| sd * crate::seed::standard_normal(rng)).collect()
}

/// Fully connected layer; weight shape is [out_dim, in_dim].
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub w: BlockId,
    pub b: BlockId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        seed: u64,
    ) -> Dense {
        let mut rng = stream(seed, &format!("init-{name}"));
        let w = store.alloc(
            format!("{name}.w"),
            vec![out_dim, in_dim],
            xavier_uniform(&mut rng, in_dim, out_dim),
        );
        let b = store.alloc(format!("{name}.b"), vec![out_dim], vec![0.0; out_dim]);
        Dense { w, b, in_dim, out_dim }
    }

    /// x is [rows, in_dim] flattened; returns [rows, out_dim].
    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let rows = self.rows(x);
        let mut y = matmul_nt(x, store.values(self.w), rows, self.in_dim, self.out_dim);
        add_bias(&mut y, store.values(self.b), rows, self.out_dim);
        y
    }

    /// Accumulate parameter gradients and return dLoss/dx.
    /// `x` must be the same input the forward pass saw.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        x: &[f64],
        dy: &[f64],
    ) -> Vec<f64> {
        let rows = self.rows(x);
        debug_assert_eq!(dy.len(), rows * self.out_dim);
        matmul_tn_acc(grads.slice_mut(self.w), dy, x, self.out_dim, rows, self.in_dim);
        bias_grad_acc(grads.slice_mut(self.b), dy, rows, self.out_dim);
        matmul(dy, store.values(self.w), rows, self.out_dim, self.in_dim)
    }

    fn rows(&self, x: &[f64]) -> usize {
        debug_assert_eq!(x.len() % self.in_dim, 0, "input not a multiple of in_dim");
        x.len() / self.in_dim
    }
}

/// Embedding table; row 0 is reserved for out-of-vocabulary lookups by the
/// categorical codec convention.
#[derive(Debug, Clone)]
pub(crate) struct Embedding {
    pub table: BlockId,
    pub rows: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, rows: usize, dim: usize, seed: u64) -> Embedding {
        let mut rng = stream(seed, &format!("init-{name}"));
        let table = store.alloc(
            name.to_string(),
            vec![rows, dim],
            normal_draw(&mut rng, rows * dim, 0.02),
        );
        Embedding { table, rows, dim }
    }

    /// Gather rows by id; returns [ids.len(), dim].
    pub fn forward(&self, store: &ParamStore, ids: &[usize]) -> Vec<f64> {
        let table = store.values(self.table);
        let mut out = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            debug_assert!(id < self.rows, "embedding id {id} out of {}", self.rows);
            out.extend_from_slice(&table[id * self.dim..(id + 1) * self.dim]);
        }
        out
    }

    /// Scatter-add output gradients back into the table rows.
    pub fn backward(&self, grads: &mut Gradients, ids: &[usize], dy: &[f64]) {
        debug_assert_eq!(dy.len(), ids.len() * self.dim);
        let g = grads.slice_mut(self.table);
        for (i, &id) in ids.iter().enumerate() {
            let row = &mut g[id * self.dim..(id + 1) * self.dim];
            for (gv, dv) in row.iter_mut().zip(&dy[i * self.dim..(i + 1) * self.dim]) {
                *gv += dv;
            }
        }
    }
}

pub(crate) const LN_EPS: f64 = 1e-5;

/// Per-position layer normalization with learned affine rescale.
#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    pub gamma: BlockId,
    pub beta: BlockId,
    pub dim: usize,
}

/// Saved normalized activations and inverse deviations for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> LayerNorm {
        let gamma = store.alloc(format!("{name}.g"), vec![dim], vec![1.0; dim]);
        let beta = store.alloc(format!("{name}.b"), vec![dim], vec![0.0; dim]);
        LayerNorm { gamma, beta, dim }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> (Vec<f64>, LnCache) {
        let d = self.dim;
        let rows = x.len() / d;
        debug_assert_eq!(x.len(), rows * d);
        let gamma = store.values(self.gamma);
        let beta = store.values(self.beta);
        let mut y = vec![0.0; x.len()];
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &x[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = inv;
            for c in 0..d {
                let h = (row[c] - mean) * inv;
                xhat[r * d + c] = h;
                y[r * d + c] = gamma[c] * h + beta[c];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        cache: &LnCache,
        dy: &[f64],
    ) -> Vec<f64> {
        let d = self.dim;
        let rows = cache.inv_std.len();
        debug_assert_eq!(dy.len(), rows * d);
        let gamma = store.values(self.gamma);
        let mut dx = vec![0.0; dy.len()];
        {
            let dgamma = grads.slice_mut(self.gamma);
            for r in 0..rows {
                for c in 0..d {
                    dgamma[c] += dy[r * d + c] * cache.xhat[r * d + c];
                }
            }
        }
        bias_grad_acc(grads.slice_mut(self.beta), dy, rows, d);
        for r in 0..rows {
            let xhat = &cache.xhat[r * d..(r + 1) * d];
            let dyr = &dy[r * d..(r + 1) * d];
            let mut mean_dh = 0.0;
            let mut mean_dh_xhat = 0.0;
            for c in 0..d {
                let dh = dyr[c] * gamma[c];
                mean_dh += dh;
                mean_dh_xhat += dh * xhat[c];
            }
            mean_dh /= d as f64;
            mean_dh_xhat /= d as f64;
            for c in 0..d {
                let dh = dyr[c] * gamma[c];
                dx[r * d + c] = cache.inv_std[r] * (dh - mean_dh - xhat[c] * mean_dh_xhat);
            }
        }
        dx
    }
}
