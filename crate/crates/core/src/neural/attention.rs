//! Multi-head self-attention over padded token batches.

use crate::neural::layers::Dense;
use crate::neural::ops::softmax_row;
use crate::neural::store::{Gradients, ParamStore};

/// Additive score bias applied to padding keys; exp() underflows it to an
/// exactly zero attention weight.
pub(crate) const PAD_BIAS: f64 = -1e30;

#[derive(Debug, Clone)]
pub(crate) struct MultiHeadAttention {
    pub wq: Dense,
    pub wk: Dense,
    pub wv: Dense,
    pub wo: Dense,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
}

/// Activations saved by the forward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttnActs {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Attention weights, [b, heads, l, l] flattened.
    pub probs: Vec<f64>,
    /// Concatenated per-head context, input of the output projection.
    pub ctx: Vec<f64>,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        n_heads: usize,
        seed: u64,
    ) -> MultiHeadAttention {
        assert_eq!(d_model % n_heads, 0, "d_model must divide into heads");
        MultiHeadAttention {
            wq: Dense::new(store, &format!("{name}.q"), d_model, d_model, seed),
            wk: Dense::new(store, &format!("{name}.k"), d_model, d_model, seed),
            wv: Dense::new(store, &format!("{name}.v"), d_model, d_model, seed),
            wo: Dense::new(store, &format!("{name}.o"), d_model, d_model, seed),
            n_heads,
            d_model,
            d_head: d_model / n_heads,
        }
    }

    /// x is [(b*l), d_model]; mask is [b*l] with 1.0 at real positions.
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        mask: &[f64],
        b: usize,
        l: usize,
    ) -> (Vec<f64>, AttnActs) {
        let d = self.d_model;
        let dh = self.d_head;
        let scale = 1.0 / (dh as f64).sqrt();
        debug_assert_eq!(x.len(), b * l * d);
        debug_assert_eq!(mask.len(), b * l);

        let q = self.wq.forward(store, x);
        let k = self.wk.forward(store, x);
        let v = self.wv.forward(store, x);
        let mut probs = vec![0.0; b * self.n_heads * l * l];
        let mut ctx = vec![0.0; b * l * d];

        let mut scores = vec![0.0; l];
        for s in 0..b {
            let rows = s * l;
            for h in 0..self.n_heads {
                let off = h * dh;
                for i in 0..l {
                    let qi = &q[(rows + i) * d + off..(rows + i) * d + off + dh];
                    for (j, sc) in scores.iter_mut().enumerate() {
                        let kj = &k[(rows + j) * d + off..(rows + j) * d + off + dh];
                        let mut dot = 0.0;
                        for (a, b2) in qi.iter().zip(kj) {
                            dot += a * b2;
                        }
                        *sc = dot * scale + if mask[rows + j] == 0.0 { PAD_BIAS } else { 0.0 };
                    }
                    softmax_row(&mut scores);
                    let p_row = ((s * self.n_heads + h) * l + i) * l;
                    probs[p_row..p_row + l].copy_from_slice(&scores);
                    let out = &mut ctx[(rows + i) * d + off..(rows + i) * d + off + dh];
                    for (j, &p) in scores.iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let vj = &v[(rows + j) * d + off..(rows + j) * d + off + dh];
                        for (o, vv) in out.iter_mut().zip(vj) {
                            *o += p * vv;
                        }
                    }
                }
            }
        }
        let out = self.wo.forward(store, &ctx);
        (out, AttnActs { q, k, v, probs, ctx })
    }

    /// Returns dLoss/dx. `x` must be the forward input.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        x: &[f64],
        acts: &AttnActs,
        b: usize,
        l: usize,
        dy: &[f64],
    ) -> Vec<f64> {
        let d = self.d_model;
        let dh = self.d_head;
        let scale = 1.0 / (dh as f64).sqrt();

        let dctx = self.wo.backward(store, grads, &acts.ctx, dy);
        let mut dq = vec![0.0; b * l * d];
        let mut dk = vec![0.0; b * l * d];
        let mut dv = vec![0.0; b * l * d];

        let mut dp = vec![0.0; l];
        let mut ds = vec![0.0; l];
        for s in 0..b {
            let rows = s * l;
            for h in 0..self.n_heads {
                let off = h * dh;
                for i in 0..l {
                    let dout = &dctx[(rows + i) * d + off..(rows + i) * d + off + dh];
                    let p_row = ((s * self.n_heads + h) * l + i) * l;
                    let p = &acts.probs[p_row..p_row + l];
                    // dP and dV from ctx = P * V.
                    for (j, dpj) in dp.iter_mut().enumerate() {
                        let vj = &acts.v[(rows + j) * d + off..(rows + j) * d + off + dh];
                        let mut acc = 0.0;
                        for (a, b2) in dout.iter().zip(vj) {
                            acc += a * b2;
                        }
                        *dpj = acc;
                        if p[j] != 0.0 {
                            let dvj =
                                &mut dv[(rows + j) * d + off..(rows + j) * d + off + dh];
                            for (g, a) in dvj.iter_mut().zip(dout) {
                                *g += p[j] * a;
                            }
                        }
                    }
                    // Softmax backward; zero weights stay zero.
                    let inner: f64 = p.iter().zip(&dp).map(|(pv, dv2)| pv * dv2).sum();
                    for j in 0..l {
                        ds[j] = p[j] * (dp[j] - inner);
                    }
                    // dQ_i += sum_j ds_ij * K_j * scale; dK_j += ds_ij * Q_i * scale.
                    let qi = acts.q[(rows + i) * d + off..(rows + i) * d + off + dh].to_vec();
                    let dqi = &mut dq[(rows + i) * d + off..(rows + i) * d + off + dh];
                    for (j, &dsj) in ds.iter().enumerate() {
                        if dsj == 0.0 {
                            continue;
                        }
                        let kj = &acts.k[(rows + j) * d + off..(rows + j) * d + off + dh];
                        let dkj = &mut dk[(rows + j) * d + off..(rows + j) * d + off + dh];
                        for c in 0..dh {
                            dqi[c] += dsj * kj[c] * scale;
                            dkj[c] += dsj * qi[c] * scale;
                        }
                    }
                }
            }
        }

        let mut dx = self.wq.backward(store, grads, x, &dq);
        for (a, g) in dx.iter_mut().zip(self.wk.backward(store, grads, x, &dk)) {
            *a += g;
        }
        for (a, g) in dx.iter_mut().zip(self.wv.backward(store, grads, x, &dv)) {
            *a += g;
        }
        dx
    }
}
