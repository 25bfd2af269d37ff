//! Transformer text encoder: masked-token pretraining and classification
//! fine-tuning over CLS pooling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{self, ModelKind};
use crate::neural::attention::MultiHeadAttention;
use crate::neural::layers::{Dense, Embedding, LayerNorm, LnCache};
use crate::neural::ops::{bce_from_logit, gelu_bwd, gelu_fwd, sigmoid, softmax_row};
use crate::neural::store::{Gradients, ParamBlock, ParamStore};
use crate::neural::trainer::{check_finite, epoch_order, parallel_grads, Adam, TrainLog};
use crate::seed::stream;
use crate::text::tokens::{TokenSequence, MASK_ID, PAD_ID};

/// Architecture of the text encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_len: usize,
}

impl EncoderConfig {
    /// Desk-scale encoder: 2 blocks, 4 heads, width 64, sequences up to 128.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            n_blocks: 2,
            n_heads: 4,
            d_model: 64,
            d_ff: 128,
            max_len: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 5 {
            return Err(Error::config(format!(
                "vocab size {} leaves no word tokens beyond the specials",
                self.vocab_size
            )));
        }
        if self.n_blocks == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return Err(Error::config("encoder dimensions must be positive"));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::config(format!(
                "model width {} is not divisible by {} heads",
                self.d_model, self.n_heads
            )));
        }
        if self.max_len < 2 {
            return Err(Error::config("max_len must fit CLS plus at least one token"));
        }
        Ok(())
    }
}

/// One residual block: attention then feed-forward, each followed by layer norm.
#[derive(Debug, Clone)]
pub(crate) struct EncoderBlock {
    pub attn: MultiHeadAttention,
    pub ln1: LayerNorm,
    pub ff1: Dense,
    pub ff2: Dense,
    pub ln2: LayerNorm,
}

pub(crate) struct BlockActs {
    x_in: Vec<f64>,
    attn: crate::neural::attention::AttnActs,
    ln1: LnCache,
    x1: Vec<f64>,
    /// Feed-forward pre-activation.
    z: Vec<f64>,
    /// Feed-forward post-gelu.
    g: Vec<f64>,
    ln2: LnCache,
}

impl EncoderBlock {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        d_model: usize,
        n_heads: usize,
        d_ff: usize,
        seed: u64,
    ) -> EncoderBlock {
        EncoderBlock {
            attn: MultiHeadAttention::new(store, &format!("{prefix}attn"), d_model, n_heads, seed),
            ln1: LayerNorm::new(store, &format!("{prefix}ln1"), d_model),
            ff1: Dense::new(store, &format!("{prefix}ff1"), d_model, d_ff, seed),
            ff2: Dense::new(store, &format!("{prefix}ff2"), d_ff, d_model, seed),
            ln2: LayerNorm::new(store, &format!("{prefix}ln2"), d_model),
        }
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x_in: Vec<f64>,
        mask: &[f64],
        b: usize,
        l: usize,
    ) -> (Vec<f64>, BlockActs) {
        let (a, attn_acts) = self.attn.forward(store, &x_in, mask, b, l);
        let mut r1 = a;
        for (r, &x) in r1.iter_mut().zip(&x_in) {
            *r += x;
        }
        let (x1, ln1_cache) = self.ln1.forward(store, &r1);
        let z = self.ff1.forward(store, &x1);
        let g = gelu_fwd(&z);
        let mut r2 = self.ff2.forward(store, &g);
        for (r, &x) in r2.iter_mut().zip(&x1) {
            *r += x;
        }
        let (x2, ln2_cache) = self.ln2.forward(store, &r2);
        let acts = BlockActs { x_in, attn: attn_acts, ln1: ln1_cache, x1, z, g, ln2: ln2_cache };
        (x2, acts)
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        acts: &BlockActs,
        _mask: &[f64],
        b: usize,
        l: usize,
        dy: &[f64],
    ) -> Vec<f64> {
        let dr2 = self.ln2.backward(store, grads, &acts.ln2, dy);
        let dg = self.ff2.backward(store, grads, &acts.g, &dr2);
        let dz = gelu_bwd(&acts.z, &dg);
        let mut dx1 = self.ff1.backward(store, grads, &acts.x1, &dz);
        for (d, &r) in dx1.iter_mut().zip(&dr2) {
            *d += r;
        }
        let dr1 = self.ln1.backward(store, grads, &acts.ln1, &dx1);
        let mut dx = self
            .attn
            .backward(store, grads, &acts.x_in, &acts.attn, b, l, &dr1);
        for (d, &r) in dx.iter_mut().zip(&dr1) {
            *d += r;
        }
        dx
    }
}

/// A batch of sequences trimmed to the longest real length.
pub(crate) struct TokenBatch {
    pub ids: Vec<usize>,
    pub mask: Vec<f64>,
    pub b: usize,
    pub l: usize,
}

/// Pack sequences into one rectangular batch, trimming trailing padding that
/// every sequence shares. Shorter sequences are padded out to the common length.
pub(crate) fn pack(seqs: &[&TokenSequence], vocab_size: usize, max_len: usize) -> Result<TokenBatch> {
    let b = seqs.len();
    let mut l = 0;
    for seq in seqs {
        l = l.max(real_len(seq)?);
    }
    if l > max_len {
        return Err(Error::validation(format!(
            "sequence length {l} exceeds the encoder maximum {max_len}"
        )));
    }
    let mut ids = Vec::with_capacity(b * l);
    let mut mask = Vec::with_capacity(b * l);
    for seq in seqs {
        for p in 0..l {
            let (id, m) = if p < seq.ids.len() {
                (seq.ids[p], seq.mask[p])
            } else {
                (PAD_ID, 0.0)
            };
            if id as usize >= vocab_size {
                return Err(Error::validation(format!(
                    "token id {id} outside the vocabulary of {vocab_size}"
                )));
            }
            ids.push(id as usize);
            mask.push(m);
        }
    }
    Ok(TokenBatch { ids, mask, b, l })
}

/// Number of leading unpadded positions; checks the prefix mask invariant.
fn real_len(seq: &TokenSequence) -> Result<usize> {
    if seq.ids.len() != seq.mask.len() {
        return Err(Error::validation(format!(
            "{} token ids but {} mask entries",
            seq.ids.len(),
            seq.mask.len()
        )));
    }
    let real = seq.mask.iter().take_while(|&&m| m == 1.0).count();
    if real == 0 || seq.mask[real..].iter().any(|&m| m != 0.0) {
        return Err(Error::validation(
            "sequence mask must be a non-empty run of ones followed by zeros",
        ));
    }
    Ok(real)
}

fn validate_sequences(seqs: &[TokenSequence], config: &EncoderConfig) -> Result<()> {
    for seq in seqs {
        if real_len(seq)? > config.max_len {
            return Err(Error::validation(format!(
                "sequence of {} real tokens exceeds the encoder maximum {}",
                real_len(seq)?,
                config.max_len
            )));
        }
        if let Some(&id) = seq.ids.iter().find(|&&id| id as usize >= config.vocab_size) {
            return Err(Error::validation(format!(
                "token id {id} outside the vocabulary of {}",
                config.vocab_size
            )));
        }
    }
    Ok(())
}

/// Token and positional embeddings plus the block stack.
#[derive(Debug, Clone)]
pub(crate) struct EncoderCore {
    pub tok_emb: Embedding,
    pub pos_emb: Embedding,
    pub blocks: Vec<EncoderBlock>,
    pub d_model: usize,
}

pub(crate) struct EncoderActs {
    blocks: Vec<BlockActs>,
}

impl EncoderCore {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        config: &EncoderConfig,
        seed: u64,
    ) -> EncoderCore {
        let tok_emb = Embedding::new(
            store,
            &format!("{prefix}tok_emb"),
            config.vocab_size,
            config.d_model,
            seed,
        );
        let pos_emb = Embedding::new(
            store,
            &format!("{prefix}pos_emb"),
            config.max_len,
            config.d_model,
            seed,
        );
        let blocks = (0..config.n_blocks)
            .map(|i| {
                EncoderBlock::build(
                    store,
                    &format!("{prefix}block{i}."),
                    config.d_model,
                    config.n_heads,
                    config.d_ff,
                    seed,
                )
            })
            .collect();
        EncoderCore { tok_emb, pos_emb, blocks, d_model: config.d_model }
    }

    fn position_ids(&self, batch: &TokenBatch) -> Vec<usize> {
        (0..batch.b * batch.l).map(|r| r % batch.l).collect()
    }

    pub fn forward(&self, store: &ParamStore, batch: &TokenBatch) -> (Vec<f64>, EncoderActs) {
        let mut x = self.tok_emb.forward(store, &batch.ids);
        let pos = store.values(self.pos_emb.table);
        let d = self.d_model;
        for r in 0..batch.b * batch.l {
            let p = r % batch.l;
            for c in 0..d {
                x[r * d + c] += pos[p * d + c];
            }
        }
        let mut acts = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, a) = block.forward(store, x, &batch.mask, batch.b, batch.l);
            x = y;
            acts.push(a);
        }
        (x, EncoderActs { blocks: acts })
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        acts: &EncoderActs,
        batch: &TokenBatch,
        dy: Vec<f64>,
    ) {
        let mut dy = dy;
        for (block, a) in self.blocks.iter().zip(&acts.blocks).rev() {
            dy = block.backward(store, grads, a, &batch.mask, batch.b, batch.l, &dy);
        }
        self.tok_emb.backward(grads, &batch.ids, &dy);
        self.pos_emb.backward(grads, &self.position_ids(batch), &dy);
    }
}

const INFER_CHUNK: usize = 32;

/// CLS representations for a list of sequences, chunked across threads.
pub(crate) fn pooled_with(
    core: &EncoderCore,
    store: &ParamStore,
    config: &EncoderConfig,
    seqs: &[&TokenSequence],
) -> Result<Vec<f64>> {
    let d = config.d_model;
    let chunks: Result<Vec<Vec<f64>>> = seqs
        .par_chunks(INFER_CHUNK)
        .map(|chunk| {
            let batch = pack(chunk, config.vocab_size, config.max_len)?;
            let (h, _) = core.forward(store, &batch);
            let mut cls = Vec::with_capacity(batch.b * d);
            for s in 0..batch.b {
                let start = s * batch.l * d;
                cls.extend_from_slice(&h[start..start + d]);
            }
            Ok(cls)
        })
        .collect();
    Ok(chunks?.concat())
}

/// Text encoder with a masked-token prediction head for pretraining.
#[derive(Debug)]
pub struct TransformerEncoderModel {
    pub store: ParamStore,
    pub config: EncoderConfig,
    pub(crate) core: EncoderCore,
    pub(crate) mlm_head: Dense,
}

impl TransformerEncoderModel {
    pub fn new(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let core = EncoderCore::build(&mut store, "", config, seed);
        let mlm_head = Dense::new(&mut store, "mlm.head", config.d_model, config.vocab_size, seed);
        Ok(TransformerEncoderModel { store, config: config.clone(), core, mlm_head })
    }

    /// CLS pooling: the final hidden state at the leading CLS position.
    pub fn pooled(&self, seqs: &[TokenSequence]) -> Result<Vec<f64>> {
        validate_sequences(seqs, &self.config)?;
        let refs: Vec<&TokenSequence> = seqs.iter().collect();
        pooled_with(&self.core, &self.store, &self.config, &refs)
    }

    /// Hash over everything except the pretraining head.
    pub fn encoder_hash(&self) -> String {
        self.store.hash_blocks(|name| !name.starts_with("mlm."))
    }

    pub fn params_hash(&self) -> String {
        self.store.hash_all()
    }

    pub fn to_model_string(&self) -> Result<String> {
        model_io::model_to_string(&EncoderCheckpoint {
            config: self.config.clone(),
            params: self.store.export(),
        })
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        let ck: EncoderCheckpoint = model_io::model_from_str(text)?;
        let mut model = TransformerEncoderModel::new(&ck.config, 0)?;
        model.store.load_values(&ck.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        model_io::save_model(
            path,
            &EncoderCheckpoint { config: self.config.clone(), params: self.store.export() },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: EncoderCheckpoint = model_io::load_model(path)?;
        let mut model = TransformerEncoderModel::new(&ck.config, 0)?;
        model.store.load_values(&ck.params)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct EncoderCheckpoint {
    config: EncoderConfig,
    params: Vec<ParamBlock>,
}

impl ModelKind for EncoderCheckpoint {
    const KIND: &'static str = "text-encoder";

    fn dims(&self) -> Vec<usize> {
        vec![self.config.d_model, self.config.n_blocks]
    }
}

/// Positions eligible for masking: real tokens only, never CLS or padding.
pub(crate) fn select_mask_positions(
    seq: &TokenSequence,
    mask_prob: f64,
    rng: &mut impl rand::Rng,
) -> Vec<usize> {
    let mut out = Vec::new();
    for (p, &m) in seq.mask.iter().enumerate().skip(1) {
        if m == 1.0 && rng.gen::<f64>() < mask_prob {
            out.push(p);
        }
    }
    out
}

/// Masked-token pretraining settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub mask_prob: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig { mask_prob: 0.15, epochs: 3, batch: 32, lr: 1e-3, seed: 7 }
    }
}

/// Self-supervised pretraining: replace a random subset of real tokens with
/// MASK and train the encoder to recover them. Cross-entropy is averaged over
/// masked positions only. A zero mask probability is a no-op.
pub fn pretrain_encoder(
    model: &mut TransformerEncoderModel,
    corpus: &[TokenSequence],
    config: &PretrainConfig,
) -> Result<TrainLog> {
    if corpus.is_empty() {
        return Err(Error::validation("pretraining corpus is empty"));
    }
    validate_sequences(corpus, &model.config)?;
    if !(0.0..=1.0).contains(&config.mask_prob) {
        return Err(Error::config(format!(
            "mask probability {} outside [0, 1]",
            config.mask_prob
        )));
    }
    if !(config.lr.is_finite() && config.lr > 0.0) {
        return Err(Error::config(format!("learning rate {} must be positive", config.lr)));
    }
    if config.batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    if config.mask_prob == 0.0 {
        return Ok(TrainLog::default());
    }

    let trainable = model.store.mask_where(|_| true);
    let mut opt = Adam::new(&model.store, config.lr);
    let mut log = TrainLog::default();
    let core = model.core.clone();
    let head = model.mlm_head.clone();
    let cfg = model.config.clone();

    for epoch in 0..config.epochs {
        let mut order_rng = stream(config.seed, &format!("pretrain-shuffle-{epoch}"));
        let order = epoch_order(corpus.len(), &mut order_rng);
        let mut loss_sum = 0.0;
        let mut masked_total = 0usize;
        for (bi, batch_idx) in order.chunks(config.batch).enumerate() {
            // Mask selection is sequential in batch order so the draw does not
            // depend on how the batch is later split across threads.
            let mut mask_rng = stream(config.seed, &format!("mask-{epoch}-{bi}"));
            let mut items: Vec<(TokenSequence, Vec<(usize, usize)>)> = Vec::new();
            for &di in batch_idx {
                let picks = select_mask_positions(&corpus[di], config.mask_prob, &mut mask_rng);
                let mut masked = corpus[di].clone();
                let mut targets = Vec::with_capacity(picks.len());
                for &p in &picks {
                    targets.push((p, masked.ids[p] as usize));
                    masked.ids[p] = MASK_ID;
                }
                items.push((masked, targets));
            }
            let m_total: usize = items.iter().map(|(_, t)| t.len()).sum();
            if m_total == 0 {
                continue;
            }
            let scale = 1.0 / m_total as f64;
            let store = &model.store;
            let (loss, grads) = parallel_grads(store, &items, |chunk, grads| {
                mlm_chunk_loss(&core, &head, &cfg, store, chunk, grads, scale)
            });
            check_finite(loss, &format!("pretraining epoch {epoch} batch {bi}"))?;
            opt.step(&mut model.store, &grads, &trainable);
            loss_sum += loss * m_total as f64;
            masked_total += m_total;
        }
        let denom = if masked_total == 0 { 1.0 } else { masked_total as f64 };
        log.epoch_loss.push(loss_sum / denom);
    }
    Ok(log)
}

/// Forward, masked-position cross-entropy, and backward for one shard.
fn mlm_chunk_loss(
    core: &EncoderCore,
    head: &Dense,
    cfg: &EncoderConfig,
    store: &ParamStore,
    chunk: &[(TokenSequence, Vec<(usize, usize)>)],
    grads: &mut Gradients,
    scale: f64,
) -> f64 {
    let refs: Vec<&TokenSequence> = chunk.iter().map(|(s, _)| s).collect();
    let batch = pack(&refs, cfg.vocab_size, cfg.max_len).expect("sequences validated upfront");
    let (h, acts) = core.forward(store, &batch);
    let d = cfg.d_model;

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (s, (_, doc_targets)) in chunk.iter().enumerate() {
        for &(p, t) in doc_targets {
            rows.push(s * batch.l + p);
            targets.push(t);
        }
    }
    if rows.is_empty() {
        return 0.0;
    }

    let mut compact = Vec::with_capacity(rows.len() * d);
    for &r in &rows {
        compact.extend_from_slice(&h[r * d..(r + 1) * d]);
    }
    let z = head.forward(store, &compact);
    let v = cfg.vocab_size;
    let mut loss = 0.0;
    let mut dz = vec![0.0; z.len()];
    for (i, &t) in targets.iter().enumerate() {
        let mut probs = z[i * v..(i + 1) * v].to_vec();
        softmax_row(&mut probs);
        loss -= probs[t].ln() * scale;
        for c in 0..v {
            dz[i * v + c] = (probs[c] - f64::from(u8::from(c == t))) * scale;
        }
    }
    let dcompact = head.backward(store, grads, &compact, &dz);
    let mut dh = vec![0.0; h.len()];
    for (j, &r) in rows.iter().enumerate() {
        dh[r * d..(r + 1) * d].copy_from_slice(&dcompact[j * d..(j + 1) * d]);
    }
    core.backward(store, grads, &acts, &batch, dh);
    loss
}

/// Classification fine-tuning settings. `unfreeze_last_k` counts encoder
/// blocks from the top; the embeddings unfreeze only when every block does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneConfig {
    pub unfreeze_last_k: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig { unfreeze_last_k: 2, lr: 1e-3, epochs: 4, batch: 32, seed: 7 }
    }
}

/// Text-only classifier: pretrained encoder weights plus a sigmoid head on CLS.
#[derive(Debug)]
pub struct TextClassifier {
    pub store: ParamStore,
    pub config: EncoderConfig,
    pub(crate) core: EncoderCore,
    pub(crate) head: Dense,
    pub unfreeze_last_k: usize,
}

impl TextClassifier {
    fn skeleton(config: &EncoderConfig, unfreeze_last_k: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let core = EncoderCore::build(&mut store, "", config, seed);
        let head = Dense::new(&mut store, "cls.head", config.d_model, 1, seed);
        Ok(TextClassifier {
            store,
            config: config.clone(),
            core,
            head,
            unfreeze_last_k,
        })
    }

    pub fn predict(&self, seqs: &[TokenSequence]) -> Result<Vec<f64>> {
        validate_sequences(seqs, &self.config)?;
        let refs: Vec<&TokenSequence> = seqs.iter().collect();
        let cls = pooled_with(&self.core, &self.store, &self.config, &refs)?;
        let z = self.head.forward(&self.store, &cls);
        Ok(z.into_iter().map(sigmoid).collect())
    }

    /// Hash over the encoder parameters, excluding the classification head.
    pub fn encoder_hash(&self) -> String {
        self.store.hash_blocks(|name| !name.starts_with("cls."))
    }

    pub fn params_hash(&self) -> String {
        self.store.hash_all()
    }

    pub fn to_model_string(&self) -> Result<String> {
        model_io::model_to_string(&ClassifierCheckpoint {
            config: self.config.clone(),
            unfreeze_last_k: self.unfreeze_last_k,
            params: self.store.export(),
        })
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        let ck: ClassifierCheckpoint = model_io::model_from_str(text)?;
        let mut model = TextClassifier::skeleton(&ck.config, ck.unfreeze_last_k, 0)?;
        model.store.load_values(&ck.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        model_io::save_model(
            path,
            &ClassifierCheckpoint {
                config: self.config.clone(),
                unfreeze_last_k: self.unfreeze_last_k,
                params: self.store.export(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: ClassifierCheckpoint = model_io::load_model(path)?;
        let mut model = TextClassifier::skeleton(&ck.config, ck.unfreeze_last_k, 0)?;
        model.store.load_values(&ck.params)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ClassifierCheckpoint {
    config: EncoderConfig,
    unfreeze_last_k: usize,
    params: Vec<ParamBlock>,
}

impl ModelKind for ClassifierCheckpoint {
    const KIND: &'static str = "text-classifier";

    fn dims(&self) -> Vec<usize> {
        vec![self.config.d_model, self.config.n_blocks]
    }
}

/// Fine-tune a copy of the pretrained encoder for classification. Blocks below
/// the last `unfreeze_last_k` stay frozen bit-for-bit; the fresh head always
/// trains. `unfreeze_last_k` equal to the block count unfreezes everything,
/// embeddings included.
pub fn fine_tune_text(
    encoder: &TransformerEncoderModel,
    seqs: &[TokenSequence],
    labels: &[u8],
    config: &FineTuneConfig,
) -> Result<(TextClassifier, TrainLog)> {
    let e = encoder.config.n_blocks;
    let k = config.unfreeze_last_k;
    if k > e {
        return Err(Error::config(format!(
            "cannot unfreeze the last {k} of {e} encoder blocks"
        )));
    }
    if seqs.len() != labels.len() || seqs.is_empty() {
        return Err(Error::validation(format!(
            "{} sequences vs {} labels",
            seqs.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    validate_sequences(seqs, &encoder.config)?;
    if !(config.lr.is_finite() && config.lr > 0.0) {
        return Err(Error::config(format!("learning rate {} must be positive", config.lr)));
    }
    if config.batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }

    let mut clf = TextClassifier::skeleton(&encoder.config, k, config.seed)?;
    clf.store.copy_matching(&encoder.store)?;

    let first_unfrozen = e - k;
    let trainable = clf.store.mask_where(|name| {
        if name.starts_with("cls.") {
            return true;
        }
        if name == "tok_emb" || name == "pos_emb" {
            return k == e;
        }
        block_index(name).is_some_and(|b| b >= first_unfrozen)
    });

    let log = train_classifier(&mut clf, seqs, labels, config, &trainable)?;
    Ok((clf, log))
}

/// Block number of a parameter named "block{b}.rest", if it is one.
fn block_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("block")?;
    rest[..rest.find('.')?].parse().ok()
}

fn train_classifier(
    clf: &mut TextClassifier,
    seqs: &[TokenSequence],
    labels: &[u8],
    config: &FineTuneConfig,
    trainable: &[bool],
) -> Result<TrainLog> {
    let n = seqs.len();
    let mut opt = Adam::new(&clf.store, config.lr);
    let mut log = TrainLog::default();
    let core = clf.core.clone();
    let head = clf.head.clone();
    let cfg = clf.config.clone();

    for epoch in 0..config.epochs {
        let mut rng = stream(config.seed, &format!("finetune-shuffle-{epoch}"));
        let order = epoch_order(n, &mut rng);
        let mut epoch_loss = 0.0;
        for (bi, batch_idx) in order.chunks(config.batch).enumerate() {
            let items: Vec<(&TokenSequence, u8)> =
                batch_idx.iter().map(|&i| (&seqs[i], labels[i])).collect();
            let scale = 1.0 / items.len() as f64;
            let store = &clf.store;
            let (loss, grads) = parallel_grads(store, &items, |chunk, grads| {
                cls_chunk_loss(&core, &head, &cfg, store, chunk, grads, scale)
            });
            check_finite(loss, &format!("fine-tuning epoch {epoch} batch {bi}"))?;
            opt.step(&mut clf.store, &grads, trainable);
            epoch_loss += loss * items.len() as f64;
        }
        log.epoch_loss.push(epoch_loss / n as f64);
    }
    Ok(log)
}

/// Forward, cross-entropy on CLS logits, and backward for one shard.
fn cls_chunk_loss(
    core: &EncoderCore,
    head: &Dense,
    cfg: &EncoderConfig,
    store: &ParamStore,
    chunk: &[(&TokenSequence, u8)],
    grads: &mut Gradients,
    scale: f64,
) -> f64 {
    let refs: Vec<&TokenSequence> = chunk.iter().map(|&(s, _)| s).collect();
    let batch = pack(&refs, cfg.vocab_size, cfg.max_len).expect("sequences validated upfront");
    let (h, acts) = core.forward(store, &batch);
    let d = cfg.d_model;

    let mut cls = Vec::with_capacity(batch.b * d);
    for s in 0..batch.b {
        let start = s * batch.l * d;
        cls.extend_from_slice(&h[start..start + d]);
    }
    let z = head.forward(store, &cls);
    let mut loss = 0.0;
    let mut dz = vec![0.0; z.len()];
    for (i, &(_, y)) in chunk.iter().enumerate() {
        loss += bce_from_logit(z[i], y) * scale;
        dz[i] = (sigmoid(z[i]) - f64::from(y)) * scale;
    }
    let dcls = head.backward(store, grads, &cls, &dz);
    let mut dh = vec![0.0; h.len()];
    for s in 0..batch.b {
        dh[s * batch.l * d..s * batch.l * d + d].copy_from_slice(&dcls[s * d..(s + 1) * d]);
    }
    core.backward(store, grads, &acts, &batch, dh);
    loss
}
