//! Finite-difference verification of analytic gradients.

use std::collections::BTreeMap;

use crate::neural::attention::MultiHeadAttention;
use crate::neural::encoder::EncoderBlock;
use crate::neural::layers::{normal_draw, Dense, Embedding, LayerNorm};
use crate::neural::ops::{
    bce_from_logit, gelu_bwd, gelu_fwd, relu_bwd, relu_fwd, sigmoid, softmax_row,
};
use crate::neural::store::{Gradients, ParamStore};
use crate::seed::stream;

pub const DEFAULT_EPS: f64 = 1e-4;

/// Worst relative error per parameter block and overall.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_block: BTreeMap<String, f64>,
    pub max_rel_err: f64,
}

/// Compare analytic gradients against a five-point central-difference stencil
/// at sampled coordinates of every block. `run` must be a pure function of the
/// store contents. Relative error uses a small absolute floor so that
/// coordinates with near-zero true gradient are compared on an absolute scale.
pub(crate) fn run_grad_check(
    store: &mut ParamStore,
    mut run: impl FnMut(&ParamStore) -> (f64, Gradients),
    eps: f64,
    samples_per_block: usize,
    seed: u64,
) -> GradCheckReport {
    let (_, analytic) = run(store);
    let blocks: Vec<_> = store
        .iter()
        .enumerate()
        .map(|(pos, (id, b))| (pos, b.name.clone(), id, b.values.len()))
        .collect();

    let mut per_block = BTreeMap::new();
    let mut max_rel_err = 0.0f64;
    for (pos, name, id, len) in blocks {
        let mut rng = stream(seed, &format!("gc-{name}"));
        let picks = rand::seq::index::sample(&mut rng, len, samples_per_block.min(len));
        let mut worst = 0.0f64;
        for i in picks {
            let old = store.values(id)[i];
            let at = |v: f64, store: &mut ParamStore, run: &mut dyn FnMut(&ParamStore) -> (f64, Gradients)| {
                store.values_mut(id)[i] = v;
                run(store).0
            };
            let lp = at(old + eps, store, &mut run);
            let lp2 = at(old + 2.0 * eps, store, &mut run);
            let lm = at(old - eps, store, &mut run);
            let lm2 = at(old - 2.0 * eps, store, &mut run);
            store.values_mut(id)[i] = old;
            let numeric = (8.0 * (lp - lm) - (lp2 - lm2)) / (12.0 * eps);
            let a = analytic.by_index(pos)[i];
            let rel = (a - numeric).abs() / (1e-3 + a.abs().max(numeric.abs()));
            worst = worst.max(rel);
        }
        max_rel_err = max_rel_err.max(worst);
        per_block.insert(name, worst);
    }
    GradCheckReport { per_block, max_rel_err }
}

fn draw(seed: u64, label: &str, len: usize, scale: f64) -> Vec<f64> {
    let mut rng = stream(seed, label);
    normal_draw(&mut rng, len, scale)
}

/// Named finite-difference checks covering every layer type in the model zoo:
/// dense + relu + sigmoid cross-entropy, embedding lookup, layer norm,
/// multi-head attention with padding, gelu feed-forward, a full encoder block,
/// the masked-token head, and the fusion head.
pub fn layer_gradcheck_suite(eps: f64, seed: u64) -> Vec<(String, GradCheckReport)> {
    let mut out = Vec::new();

    // Dense stack with relu hidden layer and binary cross-entropy loss.
    {
        let mut store = ParamStore::new();
        let l1 = Dense::new(&mut store, "l1", 4, 3, seed);
        let l2 = Dense::new(&mut store, "l2", 3, 1, seed);
        let x = draw(seed, "dense-x", 5 * 4, 1.0);
        let labels = [1u8, 0, 1, 1, 0];
        let report = run_grad_check(
            &mut store,
            |store| {
                let z1 = l1.forward(store, &x);
                let h = relu_fwd(&z1);
                let z = l2.forward(store, &h);
                let n = labels.len() as f64;
                let mut grads = Gradients::zeros_like(store);
                let mut loss = 0.0;
                let mut dz = vec![0.0; z.len()];
                for (i, (&zi, &yi)) in z.iter().zip(&labels).enumerate() {
                    loss += bce_from_logit(zi, yi) / n;
                    dz[i] = (sigmoid(zi) - f64::from(yi)) / n;
                }
                let dh = l2.backward(store, &mut grads, &h, &dz);
                let dz1 = relu_bwd(&z1, &dh);
                l1.backward(store, &mut grads, &x, &dz1);
                (loss, grads)
            },
            eps,
            8,
            seed,
        );
        out.push(("dense_relu_sigmoid".to_string(), report));
    }

    // Embedding gather with repeated and unused rows, quadratic loss.
    {
        let mut store = ParamStore::new();
        let emb = Embedding::new(&mut store, "emb", 6, 3, seed);
        let ids = [1usize, 3, 3, 0, 5];
        let report = run_grad_check(
            &mut store,
            |store| {
                let g = emb.forward(store, &ids);
                let loss = 0.5 * g.iter().map(|v| v * v).sum::<f64>();
                let mut grads = Gradients::zeros_like(store);
                emb.backward(&mut grads, &ids, &g);
                (loss, grads)
            },
            eps,
            12,
            seed,
        );
        out.push(("embedding_lookup".to_string(), report));
    }

    // Layer norm over two rows, quadratic loss on the affine output.
    {
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", 5);
        // Non-unit gains so the gamma path is exercised.
        for (i, v) in store.values_mut(ln.gamma).iter_mut().enumerate() {
            *v = 1.0 + 0.1 * i as f64;
        }
        let x = draw(seed, "ln-x", 2 * 5, 1.0);
        let report = run_grad_check(
            &mut store,
            |store| {
                let (y, cache) = ln.forward(store, &x);
                let loss = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
                let mut grads = Gradients::zeros_like(store);
                ln.backward(store, &mut grads, &cache, &y);
                (loss, grads)
            },
            eps,
            10,
            seed,
        );
        out.push(("layer_norm".to_string(), report));
    }

    // Multi-head attention with one padded position, quadratic loss.
    {
        let mut store = ParamStore::new();
        let attn = MultiHeadAttention::new(&mut store, "attn", 8, 2, seed);
        let (b, l) = (2usize, 3usize);
        let x = draw(seed, "attn-x", b * l * 8, 1.0);
        let mask = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0];
        let report = run_grad_check(
            &mut store,
            |store| {
                let (y, acts) = attn.forward(store, &x, &mask, b, l);
                let loss = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
                let mut grads = Gradients::zeros_like(store);
                attn.backward(store, &mut grads, &x, &acts, b, l, &y);
                (loss, grads)
            },
            eps,
            10,
            seed,
        );
        out.push(("attention".to_string(), report));
    }

    // Position-wise feed-forward with gelu, quadratic loss.
    {
        let mut store = ParamStore::new();
        let up = Dense::new(&mut store, "up", 6, 12, seed);
        let down = Dense::new(&mut store, "down", 12, 6, seed);
        let x = draw(seed, "ff-x", 4 * 6, 1.0);
        let report = run_grad_check(
            &mut store,
            |store| {
                let z = up.forward(store, &x);
                let g = gelu_fwd(&z);
                let y = down.forward(store, &g);
                let loss = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
                let mut grads = Gradients::zeros_like(store);
                let dg = down.backward(store, &mut grads, &g, &y);
                let dz = gelu_bwd(&z, &dg);
                up.backward(store, &mut grads, &x, &dz);
                (loss, grads)
            },
            eps,
            10,
            seed,
        );
        out.push(("feed_forward_gelu".to_string(), report));
    }

    // Full encoder block: attention, residuals, norms, gelu feed-forward.
    {
        let mut store = ParamStore::new();
        let block = EncoderBlock::build(&mut store, "block0.", 8, 2, 16, seed);
        let (b, l) = (2usize, 4usize);
        let x = draw(seed, "enc-x", b * l * 8, 0.7);
        let mask = [1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let report = run_grad_check(
            &mut store,
            |store| {
                let (y, acts) = block.forward(store, x.clone(), &mask, b, l);
                let loss = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
                let mut grads = Gradients::zeros_like(store);
                block.backward(store, &mut grads, &acts, &mask, b, l, &y);
                (loss, grads)
            },
            eps,
            8,
            seed,
        );
        out.push(("encoder_block".to_string(), report));
    }

    // Masked-token head: dense to vocabulary logits, cross-entropy at targets.
    {
        let mut store = ParamStore::new();
        let head = Dense::new(&mut store, "mlm", 6, 9, seed);
        let x = draw(seed, "mlm-x", 3 * 6, 1.0);
        let targets = [2usize, 0, 7];
        let report = run_grad_check(
            &mut store,
            |store| {
                let z = head.forward(store, &x);
                let n = targets.len();
                let mut probs = z.clone();
                let mut loss = 0.0;
                let mut dz = vec![0.0; z.len()];
                for (r, &t) in targets.iter().enumerate() {
                    let row = &mut probs[r * 9..(r + 1) * 9];
                    softmax_row(row);
                    loss -= row[t].ln() / n as f64;
                    for c in 0..9 {
                        dz[r * 9 + c] = (row[c] - f64::from(u8::from(c == t))) / n as f64;
                    }
                }
                let mut grads = Gradients::zeros_like(store);
                head.backward(store, &mut grads, &x, &dz);
                (loss, grads)
            },
            eps,
            12,
            seed,
        );
        out.push(("mlm_head".to_string(), report));
    }

    // Fusion head over concatenated representations, cross-entropy loss.
    {
        let mut store = ParamStore::new();
        let hidden = Dense::new(&mut store, "fuse.hidden", 10, 6, seed);
        let head = Dense::new(&mut store, "fuse.out", 6, 1, seed);
        let x = draw(seed, "fuse-x", 4 * 10, 1.0);
        let labels = [0u8, 1, 1, 0];
        let report = run_grad_check(
            &mut store,
            |store| {
                let z1 = hidden.forward(store, &x);
                let h = relu_fwd(&z1);
                let z = head.forward(store, &h);
                let n = labels.len() as f64;
                let mut grads = Gradients::zeros_like(store);
                let mut loss = 0.0;
                let mut dz = vec![0.0; z.len()];
                for (i, (&zi, &yi)) in z.iter().zip(&labels).enumerate() {
                    loss += bce_from_logit(zi, yi) / n;
                    dz[i] = (sigmoid(zi) - f64::from(yi)) / n;
                }
                let dh = head.backward(store, &mut grads, &h, &dz);
                let dz1 = relu_bwd(&z1, &dh);
                hidden.backward(store, &mut grads, &x, &dz1);
                (loss, grads)
            },
            eps,
            10,
            seed,
        );
        out.push(("fusion_head".to_string(), report));
    }

    out
}
