//! Shared training machinery: the optimizer, epoch shuffling, and
//! order-stable parallel gradient accumulation.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neural::store::{Gradients, ParamStore};

/// Per-epoch mean training loss, in epoch order.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
}

/// Adaptive moment estimation with fixed default decay rates.
///
/// Blocks outside the trainable mask are skipped entirely: neither their
/// values nor their moment estimates move, so frozen parameters stay
/// bit-identical across a training phase.
pub(crate) struct Adam {
    lr: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Adam {
        let m = store.iter().map(|(_, b)| vec![0.0; b.len()]).collect::<Vec<_>>();
        let v = m.clone();
        Adam { lr, t: 0, m, v }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, trainable: &[bool]) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for (b, id) in ids.into_iter().enumerate() {
            if !trainable[b] {
                continue;
            }
            let g = grads.by_index(b);
            let values = store.values_mut(id);
            for i in 0..values.len() {
                let m = &mut self.m[b][i];
                let v = &mut self.v[b][i];
                *m = BETA1 * *m + (1.0 - BETA1) * g[i];
                *v = BETA2 * *v + (1.0 - BETA2) * g[i] * g[i];
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                values[i] -= self.lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Shuffled index order for one epoch.
pub(crate) fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Fixed shard width for within-batch gradient accumulation. Chunking by a
/// constant (not by thread count) keeps the reduction order, and therefore
/// every trained parameter bit, independent of the machine.
pub(crate) const GRAD_CHUNK: usize = 4;

/// Run `f` over fixed-size chunks of `items` in parallel, then fold the
/// per-chunk losses and gradients in chunk order.
pub(crate) fn parallel_grads<T: Sync>(
    store: &ParamStore,
    items: &[T],
    f: impl Fn(&[T], &mut Gradients) -> f64 + Sync,
) -> (f64, Gradients) {
    let shards: Vec<(f64, Gradients)> = items
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = Gradients::zeros_like(store);
            let loss = f(chunk, &mut grads);
            (loss, grads)
        })
        .collect();
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(store);
    for (loss, shard) in shards {
        total += loss;
        grads.add_assign(&shard);
    }
    (total, grads)
}

pub(crate) fn check_finite(loss: f64, context: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric(format!(
            "non-finite training loss ({loss}) at {context}; \
             lower the learning rate or rescale the inputs"
        )))
    }
}
