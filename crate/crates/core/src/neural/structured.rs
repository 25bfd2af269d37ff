//! Entity-embedding MLP over encoded categorical and scaled continuous inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{self, ModelKind};
use crate::neural::gradcheck::{run_grad_check, GradCheckReport};
use crate::neural::layers::{Dense, Embedding};
use crate::neural::ops::{bce_from_logit, relu_bwd, relu_fwd, sigmoid};
use crate::neural::store::{Gradients, ParamBlock, ParamStore};
use crate::neural::trainer::{check_finite, epoch_order, Adam, TrainLog};
use crate::seed::stream;

/// Embedding width for a categorical feature with `n` training levels:
/// half the cardinality, rounded half up, never below one.
pub fn embedding_size(n: usize) -> usize {
    ((n + 1) / 2).max(1)
}

/// Embedding tables plus hidden relu stack, without the output head.
/// Reused as the structured tail of the fusion model.
#[derive(Debug, Clone)]
pub(crate) struct StructuredCore {
    pub embeddings: Vec<Embedding>,
    pub hidden: Vec<Dense>,
    pub input_dim: usize,
    pub rep_dim: usize,
}

/// Activations kept for the backward pass.
pub(crate) struct StructuredActs {
    pub x0: Vec<f64>,
    /// Pre-activation outputs per hidden layer.
    pub zs: Vec<Vec<f64>>,
    /// Post-relu outputs per hidden layer; the last one is the representation.
    pub hs: Vec<Vec<f64>>,
}

impl StructuredCore {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        cardinalities: &[usize],
        n_continuous: usize,
        hidden: &[usize],
        seed: u64,
    ) -> StructuredCore {
        let embeddings: Vec<Embedding> = cardinalities
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                Embedding::new(
                    store,
                    &format!("{prefix}emb{j}"),
                    n + 1,
                    embedding_size(n),
                    seed,
                )
            })
            .collect();
        let input_dim =
            embeddings.iter().map(|e| e.dim).sum::<usize>() + n_continuous;
        let mut layers = Vec::with_capacity(hidden.len());
        let mut in_dim = input_dim;
        for (i, &width) in hidden.iter().enumerate() {
            layers.push(Dense::new(store, &format!("{prefix}hidden{i}"), in_dim, width, seed));
            in_dim = width;
        }
        StructuredCore { embeddings, hidden: layers, input_dim, rep_dim: in_dim }
    }

    /// Concatenate embedding lookups and continuous values into model input rows.
    pub fn assemble(
        &self,
        store: &ParamStore,
        codes: &[&[usize]],
        cont: &[&[f64]],
    ) -> Result<Vec<f64>> {
        let n = codes.len();
        let mut x0 = Vec::with_capacity(n * self.input_dim);
        for (row_codes, row_cont) in codes.iter().zip(cont) {
            if row_codes.len() != self.embeddings.len() {
                return Err(Error::validation(format!(
                    "{} categorical codes, model declares {}",
                    row_codes.len(),
                    self.embeddings.len()
                )));
            }
            for (emb, &code) in self.embeddings.iter().zip(*row_codes) {
                if code >= emb.rows {
                    return Err(Error::validation(format!(
                        "categorical code {code} outside embedding table of {} rows",
                        emb.rows
                    )));
                }
                let table = store.values(emb.table);
                x0.extend_from_slice(&table[code * emb.dim..(code + 1) * emb.dim]);
            }
            let n_cont = self.input_dim
                - self.embeddings.iter().map(|e| e.dim).sum::<usize>();
            if row_cont.len() != n_cont {
                return Err(Error::validation(format!(
                    "{} continuous values, model declares {n_cont}",
                    row_cont.len()
                )));
            }
            x0.extend_from_slice(row_cont);
        }
        Ok(x0)
    }

    /// Hidden stack from assembled input to the penultimate representation.
    pub fn forward(&self, store: &ParamStore, x0: Vec<f64>) -> StructuredActs {
        let mut zs = Vec::with_capacity(self.hidden.len());
        let mut hs = Vec::with_capacity(self.hidden.len());
        let mut h = x0.clone();
        for layer in &self.hidden {
            let z = layer.forward(store, &h);
            h = relu_fwd(&z);
            zs.push(z);
            hs.push(h.clone());
        }
        StructuredActs { x0, zs, hs }
    }

    /// Backward from a gradient on the representation into all tail parameters.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        acts: &StructuredActs,
        codes: &[&[usize]],
        drep: &[f64],
    ) {
        let mut dh = drep.to_vec();
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let dz = relu_bwd(&acts.zs[i], &dh);
            let input = if i == 0 { &acts.x0 } else { &acts.hs[i - 1] };
            dh = layer.backward(store, grads, input, &dz);
        }
        // Scatter the input gradient into the embedding tables.
        for (s, row_codes) in codes.iter().enumerate() {
            let mut offset = s * self.input_dim;
            for (emb, &code) in self.embeddings.iter().zip(*row_codes) {
                emb.backward(grads, &[code], &dh[offset..offset + emb.dim]);
                offset += emb.dim;
            }
        }
    }
}

/// Structured-data model: entity embeddings, relu hidden stack, sigmoid head.
#[derive(Debug)]
pub struct MlpStructuredModel {
    pub store: ParamStore,
    pub(crate) core: StructuredCore,
    pub(crate) head: Dense,
    pub cardinalities: Vec<usize>,
    pub n_continuous: usize,
    pub hidden_widths: Vec<usize>,
}

impl MlpStructuredModel {
    pub fn new(
        cardinalities: &[usize],
        n_continuous: usize,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::config("hidden widths must be non-empty positive"));
        }
        if let Some(&n) = cardinalities.iter().find(|&&n| n == 0) {
            return Err(Error::config(format!("categorical cardinality {n} must be >= 1")));
        }
        if cardinalities.is_empty() && n_continuous == 0 {
            return Err(Error::config("model needs at least one input feature"));
        }
        let mut store = ParamStore::new();
        let core = StructuredCore::build(&mut store, "", cardinalities, n_continuous, hidden, seed);
        let head = Dense::new(&mut store, "head", core.rep_dim, 1, seed);
        Ok(MlpStructuredModel {
            store,
            core,
            head,
            cardinalities: cardinalities.to_vec(),
            n_continuous,
            hidden_widths: hidden.to_vec(),
        })
    }

    pub fn rep_dim(&self) -> usize {
        self.core.rep_dim
    }

    /// Default-probability predictions for a batch.
    pub fn predict(&self, codes: &[Vec<usize>], cont: &[Vec<f64>]) -> Result<Vec<f64>> {
        let (z, _) = self.logits(&self.store, codes, cont)?;
        Ok(z.into_iter().map(sigmoid).collect())
    }

    /// Penultimate representations, flattened [n, rep_dim].
    pub fn penultimate(&self, codes: &[Vec<usize>], cont: &[Vec<f64>]) -> Result<Vec<f64>> {
        let refs = borrow_rows(codes, cont)?;
        let x0 = self.core.assemble(&self.store, &refs.0, &refs.1)?;
        let acts = self.core.forward(&self.store, x0);
        Ok(acts.hs.last().cloned().unwrap_or(acts.x0))
    }

    fn logits(
        &self,
        store: &ParamStore,
        codes: &[Vec<usize>],
        cont: &[Vec<f64>],
    ) -> Result<(Vec<f64>, StructuredActs)> {
        let refs = borrow_rows(codes, cont)?;
        let x0 = self.core.assemble(store, &refs.0, &refs.1)?;
        let acts = self.core.forward(store, x0);
        let rep = acts.hs.last().unwrap();
        let z = self.head.forward(store, rep);
        Ok((z, acts))
    }

    /// Finite-difference verification of the full analytic gradient on one batch.
    pub fn grad_check(
        &mut self,
        codes: &[Vec<usize>],
        cont: &[Vec<f64>],
        labels: &[u8],
        eps: f64,
        samples_per_block: usize,
        seed: u64,
    ) -> Result<GradCheckReport> {
        validate_batch(codes.len(), cont.len(), labels)?;
        let core = self.core.clone();
        let head = self.head.clone();
        Ok(run_grad_check(
            &mut self.store,
            |store| loss_and_grads(&core, &head, store, codes, cont, labels).expect("checked batch"),
            eps,
            samples_per_block,
            seed,
        ))
    }

    pub fn params_hash(&self) -> String {
        self.store.hash_all()
    }

    fn checkpoint(&self) -> StructuredCheckpoint {
        StructuredCheckpoint {
            cardinalities: self.cardinalities.clone(),
            n_continuous: self.n_continuous,
            hidden: self.hidden_widths.clone(),
            params: self.store.export(),
        }
    }

    fn restore(ck: StructuredCheckpoint) -> Result<Self> {
        let mut model = MlpStructuredModel::new(&ck.cardinalities, ck.n_continuous, &ck.hidden, 0)?;
        model.store.load_values(&ck.params)?;
        Ok(model)
    }

    pub fn to_model_string(&self) -> Result<String> {
        model_io::model_to_string(&self.checkpoint())
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        Self::restore(model_io::model_from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        model_io::save_model(path, &self.checkpoint())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::restore(model_io::load_model(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct StructuredCheckpoint {
    cardinalities: Vec<usize>,
    n_continuous: usize,
    hidden: Vec<usize>,
    params: Vec<ParamBlock>,
}

impl ModelKind for StructuredCheckpoint {
    const KIND: &'static str = "structured-mlp";

    fn dims(&self) -> Vec<usize> {
        vec![
            self.cardinalities.len() + self.n_continuous,
            *self.hidden.last().unwrap_or(&0),
        ]
    }
}

fn borrow_rows<'a>(
    codes: &'a [Vec<usize>],
    cont: &'a [Vec<f64>],
) -> Result<(Vec<&'a [usize]>, Vec<&'a [f64]>)> {
    if codes.len() != cont.len() {
        return Err(Error::validation(format!(
            "{} categorical rows vs {} continuous rows",
            codes.len(),
            cont.len()
        )));
    }
    Ok((
        codes.iter().map(Vec::as_slice).collect(),
        cont.iter().map(Vec::as_slice).collect(),
    ))
}

fn validate_batch(n_codes: usize, n_cont: usize, labels: &[u8]) -> Result<()> {
    if n_codes != labels.len() || n_cont != labels.len() || labels.is_empty() {
        return Err(Error::validation(format!(
            "batch arity mismatch: {n_codes} code rows, {n_cont} continuous rows, {} labels",
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    Ok(())
}

/// Mean cross-entropy and full analytic gradient over one batch.
pub(crate) fn loss_and_grads(
    core: &StructuredCore,
    head: &Dense,
    store: &ParamStore,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    labels: &[u8],
) -> Result<(f64, Gradients)> {
    let refs = borrow_rows(codes, cont)?;
    let x0 = core.assemble(store, &refs.0, &refs.1)?;
    let acts = core.forward(store, x0);
    let rep = acts.hs.last().unwrap();
    let z = head.forward(store, rep);

    let n = labels.len() as f64;
    let mut grads = Gradients::zeros_like(store);
    let mut loss = 0.0;
    let mut dz = vec![0.0; z.len()];
    for (i, (&zi, &yi)) in z.iter().zip(labels).enumerate() {
        loss += bce_from_logit(zi, yi) / n;
        dz[i] = (sigmoid(zi) - f64::from(yi)) / n;
    }
    let drep = head.backward(store, &mut grads, rep, &dz);
    core.backward(store, &mut grads, &acts, &refs.0, &drep);
    Ok((loss, grads))
}

/// Schedule-free training settings for the structured model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuredTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for StructuredTrainConfig {
    fn default() -> Self {
        StructuredTrainConfig { lr: 1e-3, epochs: 30, batch: 32, seed: 7 }
    }
}

/// Mini-batch adaptive gradient training with binary cross-entropy.
/// Deterministic given the seed; zero epochs leave the model untouched.
pub fn train_structured(
    model: &mut MlpStructuredModel,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    labels: &[u8],
    config: &StructuredTrainConfig,
) -> Result<TrainLog> {
    validate_batch(codes.len(), cont.len(), labels)?;
    if !(config.lr.is_finite() && config.lr > 0.0) {
        return Err(Error::config(format!("learning rate {} must be positive", config.lr)));
    }
    if config.batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }

    let n = labels.len();
    let trainable = model.store.mask_where(|_| true);
    let mut opt = Adam::new(&model.store, config.lr);
    let mut log = TrainLog::default();
    let core = model.core.clone();
    let head = model.head.clone();

    for epoch in 0..config.epochs {
        let mut rng = stream(config.seed, &format!("shuffle-{epoch}"));
        let order = epoch_order(n, &mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch).enumerate() {
            let batch_codes: Vec<Vec<usize>> =
                batch.iter().map(|&i| codes[i].clone()).collect();
            let batch_cont: Vec<Vec<f64>> = batch.iter().map(|&i| cont[i].clone()).collect();
            let batch_labels: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = loss_and_grads(
                &core,
                &head,
                &model.store,
                &batch_codes,
                &batch_cont,
                &batch_labels,
            )?;
            check_finite(loss, &format!("epoch {epoch} batch {b}"))?;
            opt.step(&mut model.store, &grads, &trainable);
            epoch_loss += loss * batch.len() as f64;
        }
        log.epoch_loss.push(epoch_loss / n as f64);
    }
    Ok(log)
}
