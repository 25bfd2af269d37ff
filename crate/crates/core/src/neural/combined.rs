//! Fusion model: the structured tail and the text encoder tail feed one
//! joint head, trained in phases that can hold the tails frozen.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{self, ModelKind};
use crate::neural::encoder::{pack, pooled_with, EncoderConfig, EncoderCore, TextClassifier};
use crate::neural::layers::Dense;
use crate::neural::ops::{bce_from_logit, relu_bwd, relu_fwd, sigmoid};
use crate::neural::store::{Gradients, ParamBlock, ParamStore};
use crate::neural::structured::{MlpStructuredModel, StructuredCore};
use crate::neural::trainer::{check_finite, epoch_order, parallel_grads, Adam, TrainLog};
use crate::seed::stream;
use crate::text::tokens::TokenSequence;

/// One stretch of fusion training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPhase {
    /// Hold both tails frozen and train the fusion head only.
    pub freeze_tails: bool,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

/// Ordered training phases; by default head-only warmup, then a gentle
/// end-to-end pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub phases: Vec<TrainPhase>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            phases: vec![
                TrainPhase { freeze_tails: true, lr: 1e-2, epochs: 3, batch: 32 },
                TrainPhase { freeze_tails: false, lr: 1e-4, epochs: 2, batch: 32 },
            ],
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("training schedule needs at least one phase"));
        }
        for (i, phase) in self.phases.iter().enumerate() {
            if !(phase.lr.is_finite() && phase.lr > 0.0) {
                return Err(Error::config(format!(
                    "phase {i} learning rate {} must be positive",
                    phase.lr
                )));
            }
            if phase.batch == 0 {
                return Err(Error::config(format!("phase {i} batch size must be positive")));
            }
        }
        Ok(())
    }
}

/// Joint model over both modalities.
#[derive(Debug)]
pub struct CombinedModel {
    pub store: ParamStore,
    pub(crate) s_core: StructuredCore,
    pub(crate) t_core: EncoderCore,
    pub(crate) fuse_hidden: Dense,
    pub(crate) fuse_out: Dense,
    pub cardinalities: Vec<usize>,
    pub n_continuous: usize,
    pub hidden_widths: Vec<usize>,
    pub encoder_config: EncoderConfig,
    pub head_units: usize,
}

impl CombinedModel {
    fn skeleton(
        cardinalities: &[usize],
        n_continuous: usize,
        hidden: &[usize],
        encoder_config: &EncoderConfig,
        head_units: usize,
        seed: u64,
    ) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::config("hidden widths must be non-empty positive"));
        }
        if head_units == 0 {
            return Err(Error::config("fusion head needs at least one unit"));
        }
        encoder_config.validate()?;
        let mut store = ParamStore::new();
        let s_core =
            StructuredCore::build(&mut store, "s.", cardinalities, n_continuous, hidden, seed);
        let t_core = EncoderCore::build(&mut store, "t.", encoder_config, seed);
        let fuse_in = s_core.rep_dim + encoder_config.d_model;
        let fuse_hidden = Dense::new(&mut store, "fuse.hidden", fuse_in, head_units, seed);
        let fuse_out = Dense::new(&mut store, "fuse.out", head_units, 1, seed);
        Ok(CombinedModel {
            store,
            s_core,
            t_core,
            fuse_hidden,
            fuse_out,
            cardinalities: cardinalities.to_vec(),
            n_continuous,
            hidden_widths: hidden.to_vec(),
            encoder_config: encoder_config.clone(),
            head_units,
        })
    }

    /// Assemble the fusion model from trained single-modality tails. The
    /// structured head and the text classification head are left behind; the
    /// fusion head starts fresh.
    pub fn new(
        structured: &MlpStructuredModel,
        text: &TextClassifier,
        head_units: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut model = CombinedModel::skeleton(
            &structured.cardinalities,
            structured.n_continuous,
            &structured.hidden_widths,
            &text.config,
            head_units,
            seed,
        )?;
        copy_prefixed(&mut model.store, &structured.store, "s.", |n| n.starts_with("head."))?;
        copy_prefixed(&mut model.store, &text.store, "t.", |n| n.starts_with("cls."))?;
        Ok(model)
    }

    pub fn fusion_input_dim(&self) -> usize {
        self.s_core.rep_dim + self.encoder_config.d_model
    }

    /// Concatenated [structured representation | CLS state] rows.
    pub(crate) fn fused_inputs(
        &self,
        codes: &[Vec<usize>],
        cont: &[Vec<f64>],
        seqs: &[TokenSequence],
    ) -> Result<Vec<f64>> {
        if codes.len() != cont.len() || codes.len() != seqs.len() {
            return Err(Error::validation(format!(
                "{} code rows, {} continuous rows, {} sequences",
                codes.len(),
                cont.len(),
                seqs.len()
            )));
        }
        let code_refs: Vec<&[usize]> = codes.iter().map(Vec::as_slice).collect();
        let cont_refs: Vec<&[f64]> = cont.iter().map(Vec::as_slice).collect();
        let x0 = self.s_core.assemble(&self.store, &code_refs, &cont_refs)?;
        let acts = self.s_core.forward(&self.store, x0);
        let s_rep = acts.hs.last().unwrap();
        let seq_refs: Vec<&TokenSequence> = seqs.iter().collect();
        let cls = pooled_with(&self.t_core, &self.store, &self.encoder_config, &seq_refs)?;

        let s_dim = self.s_core.rep_dim;
        let d = self.encoder_config.d_model;
        let mut fused = Vec::with_capacity(codes.len() * (s_dim + d));
        for i in 0..codes.len() {
            fused.extend_from_slice(&s_rep[i * s_dim..(i + 1) * s_dim]);
            fused.extend_from_slice(&cls[i * d..(i + 1) * d]);
        }
        Ok(fused)
    }

    pub fn predict(
        &self,
        codes: &[Vec<usize>],
        cont: &[Vec<f64>],
        seqs: &[TokenSequence],
    ) -> Result<Vec<f64>> {
        let fused = self.fused_inputs(codes, cont, seqs)?;
        let h = relu_fwd(&self.fuse_hidden.forward(&self.store, &fused));
        let z = self.fuse_out.forward(&self.store, &h);
        Ok(z.into_iter().map(sigmoid).collect())
    }

    /// Hash over both tails, excluding the fusion head.
    pub fn tail_hash(&self) -> String {
        self.store
            .hash_blocks(|name| name.starts_with("s.") || name.starts_with("t."))
    }

    pub fn params_hash(&self) -> String {
        self.store.hash_all()
    }

    fn checkpoint(&self) -> CombinedCheckpoint {
        CombinedCheckpoint {
            cardinalities: self.cardinalities.clone(),
            n_continuous: self.n_continuous,
            hidden: self.hidden_widths.clone(),
            encoder: self.encoder_config.clone(),
            head_units: self.head_units,
            params: self.store.export(),
        }
    }

    fn restore(ck: CombinedCheckpoint) -> Result<Self> {
        let mut model = CombinedModel::skeleton(
            &ck.cardinalities,
            ck.n_continuous,
            &ck.hidden,
            &ck.encoder,
            ck.head_units,
            0,
        )?;
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
struct CombinedCheckpoint {
    cardinalities: Vec<usize>,
    n_continuous: usize,
    hidden: Vec<usize>,
    encoder: EncoderConfig,
    head_units: usize,
    params: Vec<ParamBlock>,
}

impl ModelKind for CombinedCheckpoint {
    const KIND: &'static str = "combined";

    fn dims(&self) -> Vec<usize> {
        vec![
            self.hidden.last().copied().unwrap_or(0) + self.encoder.d_model,
            self.head_units,
        ]
    }
}

/// Copy every non-skipped source block into the destination block with the
/// same name under `prefix`. Shapes must agree.
fn copy_prefixed(
    dst: &mut ParamStore,
    src: &ParamStore,
    prefix: &str,
    skip: impl Fn(&str) -> bool,
) -> Result<()> {
    let mut staged = Vec::new();
    for (_, block) in src.iter() {
        if skip(&block.name) {
            continue;
        }
        let target = format!("{prefix}{}", block.name);
        let id = dst
            .id_of(&target)
            .ok_or_else(|| Error::format(format!("no parameter block named {target}")))?;
        if dst.block(id).shape != block.shape {
            return Err(Error::format(format!(
                "parameter block {target} has shape {:?}, source has {:?}",
                dst.block(id).shape,
                block.shape
            )));
        }
        staged.push((id, block.values.clone()));
    }
    for (id, values) in staged {
        dst.values_mut(id).copy_from_slice(&values);
    }
    Ok(())
}

/// Train the fusion model through the schedule, invoking `on_phase` with the
/// model after each completed phase.
#[allow(clippy::too_many_arguments)]
pub fn train_combined_with(
    model: &mut CombinedModel,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    seqs: &[TokenSequence],
    labels: &[u8],
    schedule: &TrainSchedule,
    seed: u64,
    mut on_phase: impl FnMut(usize, &CombinedModel) -> Result<()>,
) -> Result<Vec<TrainLog>> {
    schedule.validate()?;
    let n = labels.len();
    if codes.len() != n || cont.len() != n || seqs.len() != n || n == 0 {
        return Err(Error::validation(format!(
            "batch arity mismatch: {} code rows, {} continuous rows, {} sequences, {n} labels",
            codes.len(),
            cont.len(),
            seqs.len()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }

    let mut logs = Vec::with_capacity(schedule.phases.len());
    for (p, phase) in schedule.phases.iter().enumerate() {
        let log = if phase.freeze_tails {
            train_phase_frozen(model, codes, cont, seqs, labels, phase, p, seed)?
        } else {
            train_phase_full(model, codes, cont, seqs, labels, phase, p, seed)?
        };
        logs.push(log);
        on_phase(p, model)?;
    }
    Ok(logs)
}

pub fn train_combined(
    model: &mut CombinedModel,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    seqs: &[TokenSequence],
    labels: &[u8],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<Vec<TrainLog>> {
    train_combined_with(model, codes, cont, seqs, labels, schedule, seed, |_, _| Ok(()))
}

/// Assemble the fusion model from trained tails and run the schedule.
#[allow(clippy::too_many_arguments)]
pub fn build_and_train_combined(
    structured: &MlpStructuredModel,
    text: &TextClassifier,
    head_units: usize,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    seqs: &[TokenSequence],
    labels: &[u8],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(CombinedModel, Vec<TrainLog>)> {
    let mut model = CombinedModel::new(structured, text, head_units, seed)?;
    let logs = train_combined(&mut model, codes, cont, seqs, labels, schedule, seed)?;
    Ok((model, logs))
}

/// Head-only phase: the tails are frozen, so their representations are
/// computed once and the head trains on cached features.
#[allow(clippy::too_many_arguments)]
fn train_phase_frozen(
    model: &mut CombinedModel,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    seqs: &[TokenSequence],
    labels: &[u8],
    phase: &TrainPhase,
    p: usize,
    seed: u64,
) -> Result<TrainLog> {
    let fused = model.fused_inputs(codes, cont, seqs)?;
    let fuse_in = model.fusion_input_dim();
    let trainable = model.store.mask_where(|name| name.starts_with("fuse."));
    let mut opt = Adam::new(&model.store, phase.lr);
    let mut log = TrainLog::default();
    let n = labels.len();

    for epoch in 0..phase.epochs {
        let mut rng = stream(seed, &format!("phase{p}-epoch{epoch}"));
        let order = epoch_order(n, &mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(phase.batch).enumerate() {
            let mut x = Vec::with_capacity(batch.len() * fuse_in);
            let mut y = Vec::with_capacity(batch.len());
            for &i in batch {
                x.extend_from_slice(&fused[i * fuse_in..(i + 1) * fuse_in]);
                y.push(labels[i]);
            }
            let (loss, grads) = head_loss_and_grads(model, &x, &y);
            check_finite(loss, &format!("phase {p} epoch {epoch} batch {b}"))?;
            opt.step(&mut model.store, &grads, &trainable);
            epoch_loss += loss * batch.len() as f64;
        }
        log.epoch_loss.push(epoch_loss / n as f64);
    }
    Ok(log)
}

fn head_loss_and_grads(model: &CombinedModel, x: &[f64], labels: &[u8]) -> (f64, Gradients) {
    let store = &model.store;
    let z1 = model.fuse_hidden.forward(store, x);
    let h = relu_fwd(&z1);
    let z = model.fuse_out.forward(store, &h);
    let n = labels.len() as f64;
    let mut grads = Gradients::zeros_like(store);
    let mut loss = 0.0;
    let mut dz = vec![0.0; z.len()];
    for (i, (&zi, &yi)) in z.iter().zip(labels).enumerate() {
        loss += bce_from_logit(zi, yi) / n;
        dz[i] = (sigmoid(zi) - f64::from(yi)) / n;
    }
    let dh = model.fuse_out.backward(store, &mut grads, &h, &dz);
    let dz1 = relu_bwd(&z1, &dh);
    model.fuse_hidden.backward(store, &mut grads, x, &dz1);
    (loss, grads)
}

struct FullItem<'a> {
    codes: &'a [usize],
    cont: &'a [f64],
    seq: &'a TokenSequence,
    label: u8,
}

/// End-to-end phase: gradients flow through both tails.
#[allow(clippy::too_many_arguments)]
fn train_phase_full(
    model: &mut CombinedModel,
    codes: &[Vec<usize>],
    cont: &[Vec<f64>],
    seqs: &[TokenSequence],
    labels: &[u8],
    phase: &TrainPhase,
    p: usize,
    seed: u64,
) -> Result<TrainLog> {
    // One cheap validated pass so the training closures cannot fail.
    model.fused_inputs(&codes[..1], &cont[..1], &seqs[..1])?;
    let trainable = model.store.mask_where(|_| true);
    let mut opt = Adam::new(&model.store, phase.lr);
    let mut log = TrainLog::default();
    let n = labels.len();
    let s_core = model.s_core.clone();
    let t_core = model.t_core.clone();
    let fuse_hidden = model.fuse_hidden.clone();
    let fuse_out = model.fuse_out.clone();
    let enc = model.encoder_config.clone();

    for epoch in 0..phase.epochs {
        let mut rng = stream(seed, &format!("phase{p}-epoch{epoch}"));
        let order = epoch_order(n, &mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(phase.batch).enumerate() {
            let items: Vec<FullItem> = batch
                .iter()
                .map(|&i| FullItem {
                    codes: &codes[i],
                    cont: &cont[i],
                    seq: &seqs[i],
                    label: labels[i],
                })
                .collect();
            let scale = 1.0 / items.len() as f64;
            let store = &model.store;
            let (loss, grads) = parallel_grads(store, &items, |chunk, grads| {
                full_chunk_loss(&s_core, &t_core, &fuse_hidden, &fuse_out, &enc, store, chunk, grads, scale)
            });
            check_finite(loss, &format!("phase {p} epoch {epoch} batch {b}"))?;
            opt.step(&mut model.store, &grads, &trainable);
            epoch_loss += loss * items.len() as f64;
        }
        log.epoch_loss.push(epoch_loss / n as f64);
    }
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn full_chunk_loss(
    s_core: &StructuredCore,
    t_core: &EncoderCore,
    fuse_hidden: &Dense,
    fuse_out: &Dense,
    enc: &EncoderConfig,
    store: &ParamStore,
    chunk: &[FullItem],
    grads: &mut Gradients,
    scale: f64,
) -> f64 {
    let code_refs: Vec<&[usize]> = chunk.iter().map(|it| it.codes).collect();
    let cont_refs: Vec<&[f64]> = chunk.iter().map(|it| it.cont).collect();
    let x0 = s_core.assemble(store, &code_refs, &cont_refs).expect("inputs validated upfront");
    let s_acts = s_core.forward(store, x0);
    let s_rep = s_acts.hs.last().unwrap();
    let s_dim = s_core.rep_dim;

    let seq_refs: Vec<&TokenSequence> = chunk.iter().map(|it| it.seq).collect();
    let batch = pack(&seq_refs, enc.vocab_size, enc.max_len).expect("inputs validated upfront");
    let (h, t_acts) = t_core.forward(store, &batch);
    let d = enc.d_model;

    let b = chunk.len();
    let fuse_in = s_dim + d;
    let mut fused = Vec::with_capacity(b * fuse_in);
    for s in 0..b {
        fused.extend_from_slice(&s_rep[s * s_dim..(s + 1) * s_dim]);
        let start = s * batch.l * d;
        fused.extend_from_slice(&h[start..start + d]);
    }

    let z1 = fuse_hidden.forward(store, &fused);
    let hh = relu_fwd(&z1);
    let z = fuse_out.forward(store, &hh);
    let mut loss = 0.0;
    let mut dz = vec![0.0; z.len()];
    for (i, it) in chunk.iter().enumerate() {
        loss += bce_from_logit(z[i], it.label) * scale;
        dz[i] = (sigmoid(z[i]) - f64::from(it.label)) * scale;
    }

    let dhh = fuse_out.backward(store, grads, &hh, &dz);
    let dz1 = relu_bwd(&z1, &dhh);
    let dfused = fuse_hidden.backward(store, grads, &fused, &dz1);

    let mut ds_rep = Vec::with_capacity(b * s_dim);
    let mut dh = vec![0.0; h.len()];
    for s in 0..b {
        ds_rep.extend_from_slice(&dfused[s * fuse_in..s * fuse_in + s_dim]);
        let start = s * batch.l * d;
        dh[start..start + d].copy_from_slice(&dfused[s * fuse_in + s_dim..(s + 1) * fuse_in]);
    }
    s_core.backward(store, grads, &s_acts, &code_refs, &ds_rep);
    t_core.backward(store, grads, &t_acts, &batch, dh);
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::eval::auc;
    use crate::neural::encoder::{fine_tune_text, FineTuneConfig, TransformerEncoderModel};
    use crate::neural::structured::{train_structured, StructuredTrainConfig};
    use crate::text::tokens::{encode_for_transformer, TokenVocab};

    /// Tiny two-modality problem: the label is carried by one keyword, the
    /// structured side sees a weakly informative continuous value.
    fn fixture(n: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>, Vec<TokenSequence>, Vec<u8>, EncoderConfig) {
        let filler = ["orders", "from", "three", "regional", "buyers", "stable"];
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        let mut cont = Vec::new();
        for i in 0..n {
            let mut words: Vec<String> =
                (0..5).map(|j| filler[(i + j) % filler.len()].to_string()).collect();
            let positive = i % 3 == 0;
            if positive {
                words.insert(i % 4, "overdue".to_string());
            }
            docs.push(words);
            labels.push(u8::from(positive));
            cont.push(vec![0.3 + 0.4 * f64::from(u8::from(positive)) + 0.01 * (i % 7) as f64]);
        }
        let vocab = TokenVocab::fit(&docs, 1).unwrap();
        let seqs: Vec<TokenSequence> = docs
            .iter()
            .map(|d| encode_for_transformer(d, &vocab, 12).unwrap())
            .collect();
        let config = EncoderConfig {
            vocab_size: vocab.table_size(),
            n_blocks: 1,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
            max_len: 12,
        };
        let codes = vec![vec![]; n];
        (codes, cont, seqs, labels, config)
    }

    fn trained_tails(
        codes: &[Vec<usize>],
        cont: &[Vec<f64>],
        seqs: &[TokenSequence],
        labels: &[u8],
        config: &EncoderConfig,
    ) -> (MlpStructuredModel, TextClassifier) {
        let mut structured = MlpStructuredModel::new(&[], 1, &[8], 1).unwrap();
        let sc = StructuredTrainConfig { epochs: 3, ..Default::default() };
        train_structured(&mut structured, codes, cont, labels, &sc).unwrap();
        let encoder = TransformerEncoderModel::new(config, 2).unwrap();
        let ft = FineTuneConfig { unfreeze_last_k: 1, epochs: 2, ..Default::default() };
        let (text, _) = fine_tune_text(&encoder, seqs, labels, &ft).unwrap();
        (structured, text)
    }

    #[test]
    fn default_schedule_warms_up_frozen_then_trains_all() {
        let s = TrainSchedule::default();
        assert_eq!(s.phases.len(), 2);
        assert!(s.phases[0].freeze_tails && !s.phases[1].freeze_tails);
        assert_eq!((s.phases[0].lr, s.phases[1].lr), (1e-2, 1e-4));
        assert!(s.validate().is_ok());
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        assert!(TrainSchedule { phases: vec![] }.validate().is_err());
        let bad = TrainSchedule {
            phases: vec![TrainPhase { freeze_tails: true, lr: 0.0, epochs: 1, batch: 8 }],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn assembly_copies_tail_weights_verbatim() {
        let (codes, cont, seqs, labels, config) = fixture(24);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let model = CombinedModel::new(&structured, &text, 8, 3).unwrap();
        let dst = model.store.values(model.store.id_of("s.hidden0.w").unwrap());
        let src = structured.store.values(structured.store.id_of("hidden0.w").unwrap());
        assert_eq!(dst, src);
        let dst_t = model.store.values(model.store.id_of("t.tok_emb").unwrap());
        let src_t = text.store.values(text.store.id_of("tok_emb").unwrap());
        assert_eq!(dst_t, src_t);
        assert!(model.store.id_of("s.head.w").is_none());
        assert!(model.store.id_of("t.cls.head.w").is_none());
    }

    #[test]
    fn frozen_phase_leaves_tails_bit_identical() {
        let (codes, cont, seqs, labels, config) = fixture(24);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let mut model = CombinedModel::new(&structured, &text, 8, 3).unwrap();
        let initial_tails = model.tail_hash();
        let schedule = TrainSchedule {
            phases: vec![
                TrainPhase { freeze_tails: true, lr: 1e-2, epochs: 2, batch: 8 },
                TrainPhase { freeze_tails: false, lr: 1e-3, epochs: 1, batch: 8 },
            ],
        };
        let mut seen = Vec::new();
        train_combined_with(
            &mut model,
            &codes,
            &cont,
            &seqs,
            &labels,
            &schedule,
            9,
            |p, m| {
                seen.push((p, m.tail_hash()));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].1, initial_tails, "frozen phase must not move the tails");
        assert_ne!(seen[1].1, initial_tails, "end-to-end phase must move the tails");
    }

    #[test]
    fn empty_schedule_is_rejected_by_training() {
        let (codes, cont, seqs, labels, config) = fixture(12);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let err = build_and_train_combined(
            &structured,
            &text,
            8,
            &codes,
            &cont,
            &seqs,
            &labels,
            &TrainSchedule { phases: vec![] },
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("at least one phase"));
    }

    #[test]
    fn training_is_deterministic() {
        let (codes, cont, seqs, labels, config) = fixture(24);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let schedule = TrainSchedule {
            phases: vec![
                TrainPhase { freeze_tails: true, lr: 1e-2, epochs: 1, batch: 8 },
                TrainPhase { freeze_tails: false, lr: 1e-3, epochs: 1, batch: 8 },
            ],
        };
        let (a, _) = build_and_train_combined(
            &structured, &text, 8, &codes, &cont, &seqs, &labels, &schedule, 4,
        )
        .unwrap();
        let (b, _) = build_and_train_combined(
            &structured, &text, 8, &codes, &cont, &seqs, &labels, &schedule, 4,
        )
        .unwrap();
        assert_eq!(a.params_hash(), b.params_hash());
    }

    #[test]
    fn fused_model_learns_the_text_signal() {
        let (codes, cont, seqs, labels, config) = fixture(48);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let schedule = TrainSchedule {
            phases: vec![
                TrainPhase { freeze_tails: true, lr: 1e-2, epochs: 4, batch: 8 },
                TrainPhase { freeze_tails: false, lr: 1e-3, epochs: 3, batch: 8 },
            ],
        };
        let (model, logs) = build_and_train_combined(
            &structured, &text, 8, &codes, &cont, &seqs, &labels, &schedule, 6,
        )
        .unwrap();
        assert_eq!(logs.len(), 2);
        let scores = model.predict(&codes, &cont, &seqs).unwrap();
        assert!(auc(&scores, &labels).unwrap() > 0.75);
    }

    #[test]
    fn batch_of_one_matches_the_batch_row() {
        let (codes, cont, seqs, labels, config) = fixture(16);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let model = CombinedModel::new(&structured, &text, 8, 3).unwrap();
        let batch_scores = model.predict(&codes, &cont, &seqs).unwrap();
        for i in [0usize, 9, 15] {
            let one = model
                .predict(&codes[i..=i], &cont[i..=i], &seqs[i..=i])
                .unwrap();
            assert!((one[0] - batch_scores[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let (codes, cont, seqs, labels, config) = fixture(16);
        let (structured, text) = trained_tails(&codes, &cont, &seqs, &labels, &config);
        let schedule = TrainSchedule {
            phases: vec![TrainPhase { freeze_tails: true, lr: 1e-2, epochs: 1, batch: 8 }],
        };
        let (model, _) = build_and_train_combined(
            &structured, &text, 8, &codes, &cont, &seqs, &labels, &schedule, 2,
        )
        .unwrap();
        let restored = CombinedModel::from_model_str(&model.to_model_string().unwrap()).unwrap();
        assert_eq!(restored.params_hash(), model.params_hash());
        assert_eq!(
            restored.predict(&codes, &cont, &seqs).unwrap(),
            model.predict(&codes, &cont, &seqs).unwrap()
        );
    }
}
