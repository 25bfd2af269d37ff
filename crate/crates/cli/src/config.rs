use std::path::{Path, PathBuf};

use credfuse::baselines::{ElasticNetSearch, ForestSearch};
use credfuse::data::SynthConfig;
use credfuse::eval::FeatureSubset;
use credfuse::explain::{LimeConfig, UncertainSelectConfig};
use credfuse::neural::{
    EncoderConfig, FineTuneConfig, PretrainConfig, StructuredTrainConfig, TrainSchedule,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Config schema version accepted by this binary.
pub const CONFIG_VERSION: u32 = 1;

/// Model families of the three-by-three grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelFamily {
    Lr,
    Rf,
    Dl,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Lr, ModelFamily::Rf, ModelFamily::Dl];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Lr => "lr",
            ModelFamily::Rf => "rf",
            ModelFamily::Dl => "dl",
        }
    }

    pub fn parse(token: &str) -> Result<Self, String> {
        match token {
            "lr" => Ok(ModelFamily::Lr),
            "rf" => Ok(ModelFamily::Rf),
            "dl" => Ok(ModelFamily::Dl),
            other => Err(format!("unknown model family {other:?}, expected lr, rf or dl")),
        }
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn parse_subset(token: &str) -> Result<FeatureSubset, String> {
    match token {
        "text" => Ok(FeatureSubset::Text),
        "structured" => Ok(FeatureSubset::Structured),
        "combined" => Ok(FeatureSubset::Combined),
        other => {
            Err(format!("unknown subset {other:?}, expected text, structured or combined"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Output directory for every run artifact.
    pub artifacts: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction of the non-out-of-time rows held out, stratified by
    /// segment and label.
    pub holdout_ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { holdout_ratio: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// Document-frequency band for the concept vocabulary.
    pub min_df: f64,
    pub max_df: f64,
    /// Concept count is the smallest k reaching this variance share.
    pub variance_target: f64,
    pub k_max: usize,
    /// Minimum corpus count for a token to get its own embedding id.
    pub min_count: usize,
    /// Sequence length in token positions, leading position included.
    pub max_len: usize,
    /// Optional newline-separated stopword list; defaults to the built-in set.
    pub stopword_file: Option<PathBuf>,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            min_df: 0.05,
            max_df: 0.10,
            variance_target: 0.94,
            k_max: 250,
            min_count: 5,
            max_len: 128,
            stopword_file: None,
        }
    }
}

/// Encoder dimensions; vocabulary size and sequence length are filled in at
/// training time from the fitted token vocabulary and the text settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderShape {
    pub n_blocks: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape { n_blocks: 2, n_heads: 4, d_model: 64, d_ff: 128 }
    }
}

impl EncoderShape {
    pub fn to_encoder_config(&self, vocab_size: usize, max_len: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            n_blocks: self.n_blocks,
            n_heads: self.n_heads,
            d_model: self.d_model,
            d_ff: self.d_ff,
            max_len,
        }
    }
}

/// Deep-learning settings. Seed fields inside the nested training configs
/// are ignored; the global seed fans out to stage-specific derived seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DlConfig {
    pub structured_hidden: Vec<usize>,
    /// Width of the fusion head's hidden layer.
    pub head_units: usize,
    pub encoder: EncoderShape,
    pub pretrain: PretrainConfig,
    pub finetune: FineTuneConfig,
    pub structured_train: StructuredTrainConfig,
    pub schedule: TrainSchedule,
}

impl Default for DlConfig {
    fn default() -> Self {
        DlConfig {
            structured_hidden: vec![32, 16],
            head_units: 16,
            encoder: EncoderShape::default(),
            pretrain: PretrainConfig::default(),
            finetune: FineTuneConfig::default(),
            structured_train: StructuredTrainConfig::default(),
            schedule: TrainSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Word-count thresholds for the text-model curves, strictly descending
    /// and ending at 0. Empty means decile thresholds of the scored rows.
    pub word_count_thresholds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSettings {
    pub permutation_repeats: usize,
    pub lime: LimeConfig,
    pub uncertain: UncertainSelectConfig,
    /// Number of selected uncertain cases given word-level explanations.
    pub lime_cases: usize,
    /// Size of the aggregated word importance table.
    pub top_k_words: usize,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            permutation_repeats: 10,
            lime: LimeConfig::default(),
            uncertain: UncertainSelectConfig::default(),
            lime_cases: 25,
            top_k_words: 20,
        }
    }
}

/// Full run configuration, read from a versioned TOML file. Identical
/// effective configs hash identically; the hash goes into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Global seed; every stage derives its own stream from it.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub text: TextConfig,
    pub lr: ElasticNetSearch,
    pub rf: ForestSearch,
    pub dl: DlConfig,
    pub eval: EvalConfig,
    pub explain: ExplainSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: None,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            text: TextConfig::default(),
            lr: ElasticNetSearch::default(),
            rf: ForestSearch::default(),
            dl: DlConfig::default(),
            eval: EvalConfig::default(),
            explain: ExplainSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }

    /// Stamp command-line overrides into the config before validation, so the
    /// config hash always reflects what actually ran.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<PathBuf>) {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(dir) = out {
            self.paths.artifacts = dir;
        }
    }

    /// Check everything checkable up front and report every violation found.
    pub fn validate(&self) -> CliResult<()> {
        let mut v: Vec<String> = Vec::new();

        if self.version != CONFIG_VERSION {
            v.push(format!(
                "version {} is not supported, expected {CONFIG_VERSION}",
                self.version
            ));
        }
        if self.seed.is_none() {
            v.push("seed is required (set it in the config or pass --seed)".into());
        }

        if self.paths.artifacts.as_os_str().is_empty() {
            v.push("paths.artifacts is required (set it in the config or pass --out)".into());
        } else if let Some(anchor) =
            self.paths.artifacts.ancestors().find(|p| !p.as_os_str().is_empty() && p.exists())
        {
            if !anchor.is_dir() {
                v.push(format!(
                    "paths.artifacts {} collides with the non-directory {}",
                    self.paths.artifacts.display(),
                    anchor.display()
                ));
            }
        }

        if let Err(e) = self.synth.validate() {
            v.push(format!("synth: {e}"));
        }
        if self.synth.n_cohorts < 3 {
            v.push(format!(
                "synth.n_cohorts {} leaves no rows between the two out-of-time cohorts",
                self.synth.n_cohorts
            ));
        }

        if !(self.split.holdout_ratio > 0.0 && self.split.holdout_ratio < 1.0) {
            v.push(format!(
                "split.holdout_ratio {} outside (0,1)",
                self.split.holdout_ratio
            ));
        }

        let t = &self.text;
        if !(0.0..=1.0).contains(&t.min_df) || !(0.0..=1.0).contains(&t.max_df) {
            v.push(format!("text df band [{}, {}] outside [0,1]", t.min_df, t.max_df));
        } else if t.min_df >= t.max_df {
            v.push(format!("text.min_df {} must be below text.max_df {}", t.min_df, t.max_df));
        }
        if !(t.variance_target > 0.0 && t.variance_target <= 1.0) {
            v.push(format!("text.variance_target {} outside (0,1]", t.variance_target));
        }
        if t.k_max == 0 {
            v.push("text.k_max must be at least 1".into());
        }
        if t.min_count == 0 {
            v.push("text.min_count must be at least 1".into());
        }
        if t.max_len < 2 {
            v.push(format!("text.max_len {} cannot fit a document", t.max_len));
        }
        if let Some(path) = &t.stopword_file {
            if !path.is_file() {
                v.push(format!("text.stopword_file {} does not exist", path.display()));
            }
        }

        if self.lr.l1_grid.is_empty() {
            v.push("lr.l1_grid must not be empty".into());
        }
        for &r in &self.lr.l1_grid {
            if !(0.0..=1.0).contains(&r) {
                v.push(format!("lr.l1_grid entry {r} outside [0,1]"));
            }
        }
        if self.lr.n_lambda == 0 {
            v.push("lr.n_lambda must be at least 1".into());
        }
        if !(self.lr.lambda_decades > 0.0 && self.lr.lambda_decades.is_finite()) {
            v.push(format!("lr.lambda_decades {} must be finite and positive", self.lr.lambda_decades));
        }
        if self.lr.folds < 2 {
            v.push("lr.folds must be at least 2".into());
        }

        if self.rf.n_trees == 0 {
            v.push("rf.n_trees must be at least 1".into());
        }
        if self.rf.n_candidates == 0 {
            v.push("rf.n_candidates must be at least 1".into());
        }
        if self.rf.max_depth_choices.is_empty() {
            v.push("rf.max_depth_choices must not be empty".into());
        }
        if self.rf.max_depth_choices.contains(&0) {
            v.push("rf.max_depth_choices entries must be at least 1".into());
        }
        if self.rf.max_features_choices.contains(&0) {
            v.push("rf.max_features_choices entries must be at least 1".into());
        }
        if self.rf.folds < 2 {
            v.push("rf.folds must be at least 2".into());
        }

        let d = &self.dl;
        if d.structured_hidden.is_empty() || d.structured_hidden.contains(&0) {
            v.push("dl.structured_hidden widths must be non-empty and positive".into());
        }
        if d.head_units == 0 {
            v.push("dl.head_units must be at least 1".into());
        }
        // Placeholder vocab size; only the shape fields are under test here.
        if let Err(e) = d.encoder.to_encoder_config(16, t.max_len.max(2)).validate() {
            v.push(format!("dl.encoder: {e}"));
        }
        if let Err(e) = d.schedule.validate() {
            v.push(format!("dl.schedule: {e}"));
        }
        if !(d.pretrain.mask_prob > 0.0 && d.pretrain.mask_prob <= 1.0) {
            v.push(format!("dl.pretrain.mask_prob {} outside (0,1]", d.pretrain.mask_prob));
        }
        for (name, lr, batch) in [
            ("dl.pretrain", d.pretrain.lr, d.pretrain.batch),
            ("dl.finetune", d.finetune.lr, d.finetune.batch),
            ("dl.structured_train", d.structured_train.lr, d.structured_train.batch),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                v.push(format!("{name}.lr {lr} must be finite and positive"));
            }
            if batch == 0 {
                v.push(format!("{name}.batch must be at least 1"));
            }
        }
        if d.finetune.unfreeze_last_k > d.encoder.n_blocks {
            v.push(format!(
                "dl.finetune.unfreeze_last_k {} exceeds dl.encoder.n_blocks {}",
                d.finetune.unfreeze_last_k, d.encoder.n_blocks
            ));
        }

        let thresholds = &self.eval.word_count_thresholds;
        if !thresholds.is_empty() {
            if thresholds.windows(2).any(|w| w[0] <= w[1]) {
                v.push("eval.word_count_thresholds must be strictly descending".into());
            }
            if *thresholds.last().unwrap() != 0 {
                v.push("eval.word_count_thresholds must end with threshold 0".into());
            }
        }

        let x = &self.explain;
        if x.permutation_repeats == 0 {
            v.push("explain.permutation_repeats must be at least 1".into());
        }
        if let Err(e) = x.lime.validate() {
            v.push(format!("explain.lime: {e}"));
        }
        if let Err(e) = x.uncertain.validate() {
            v.push(format!("explain.uncertain: {e}"));
        }
        if x.top_k_words == 0 {
            v.push("explain.top_k_words must be at least 1".into());
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(v))
        }
    }

    /// Seed after validation; panics if called on an unvalidated config.
    pub fn seed(&self) -> u64 {
        self.seed.expect("config validated")
    }

    /// Hash of the effective config with the output location blanked, so the
    /// same settings hash identically wherever the artifacts land.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.artifacts = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}
