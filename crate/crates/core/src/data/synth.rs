//! Synthetic loan dataset generator.
//!
//! Labels come from a logistic model over two standardized latent signals: a
//! structured signal s (a deterministic function of the generated feature
//! columns) and a text signal t = ρ·s + √(1−ρ²)·u with u independent noise.
//! The assessment text encodes t through threshold-activated keyword
//! sentences, so ρ controls how much of the text's predictive content
//! duplicates the structured features. Per-segment intercepts are calibrated
//! against the generated sample so empirical default rates land on target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::schema::{Dataset, FeatureSchema, LoanRecord, Segment};
use crate::data::wordbank::{
    ARREARS_RISK_SENTENCE, ARREARS_SAFE_SENTENCE, ARREARS_THRESHOLD, FILLER_SENTENCES, INDUSTRIES,
    INTRO_TEMPLATES, KEYWORD_RULES, REGIONS,
};
use crate::error::{Error, Result};
use crate::seed::{standard_normal, stream};

/// Informative continuous features: (column name, weight on its latent draw).
pub const INFORMATIVE_CONTINUOUS: &[(&str, f64)] = &[
    ("monthly_sales", -0.85),
    ("debt_ratio", 1.00),
    ("equity_share", -0.70),
    ("years_trading", -0.55),
    ("supplier_credit_days", 0.60),
];

/// Continuous columns with no effect on the label.
pub const NOISE_CONTINUOUS: &[&str] = &["noise_1", "noise_2", "noise_3", "noise_4", "noise_5"];

pub const INDUSTRY_FEATURE: &str = "industry";
pub const REGION_FEATURE: &str = "region";

const P_SEGMENT_NEW: f64 = 0.45;
/// Word-count clamps for the short and long document modes.
const SHORT_RANGE: (usize, usize) = (20, 60);
const LONG_RANGE: (usize, usize) = (120, 280);
/// Truncated-text parameters for the drifted late cohort.
const DRIFT_WORDS_MEAN: f64 = 26.0;
const DRIFT_WORDS_SD: f64 = 5.0;
const DRIFT_RANGE: (usize, usize) = (14, 40);
/// Latent mean shifts for the drifted late cohort (feature index, shift).
const DRIFT_FEATURE_SHIFTS: &[(usize, f64)] = &[(0, -0.30), (1, 0.35)];

/// Bimodal word-count mixture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WordCountConfig {
    pub short_mean: f64,
    pub short_sd: f64,
    pub long_mean: f64,
    pub long_sd: f64,
    /// Probability a document uses the long form.
    pub long_fraction: f64,
}

impl Default for WordCountConfig {
    fn default() -> Self {
        WordCountConfig {
            short_mean: 37.0,
            short_sd: 8.0,
            long_mean: 190.0,
            long_sd: 35.0,
            long_fraction: 0.5,
        }
    }
}

/// Late-cohort drift switches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    /// Replace late-cohort texts with heavily truncated versions.
    pub truncate_late_texts: bool,
    /// Shift the means of two informative features in the late cohort.
    pub shift_feature_means: bool,
}

/// Full generator configuration. Identical configs produce byte-identical datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_records: usize,
    pub seed: u64,
    pub default_rate_new: f64,
    pub default_rate_existing: f64,
    /// Weight of the structured signal in the label model.
    pub structured_strength: f64,
    /// Weight of the text signal in the label model.
    pub text_strength: f64,
    /// Fraction ρ of the text signal that duplicates the structured signal.
    pub signal_overlap: f64,
    pub word_count: WordCountConfig,
    pub drift: DriftConfig,
    pub start_cohort: i32,
    pub n_cohorts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 5000,
            seed: 20240808,
            default_rate_new: 0.20,
            default_rate_existing: 0.11,
            structured_strength: 1.1,
            text_strength: 0.95,
            signal_overlap: 0.5,
            word_count: WordCountConfig::default(),
            drift: DriftConfig::default(),
            start_cohort: 2008,
            n_cohorts: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::config("n_records must be positive"));
        }
        for (name, rate) in [
            ("default_rate_new", self.default_rate_new),
            ("default_rate_existing", self.default_rate_existing),
        ] {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::config(format!("{name} {rate} outside (0,1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.signal_overlap) {
            return Err(Error::config(format!(
                "signal_overlap {} outside [0,1]",
                self.signal_overlap
            )));
        }
        for (name, v) in [
            ("structured_strength", self.structured_strength),
            ("text_strength", self.text_strength),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(format!("{name} {v} must be finite and >= 0")));
            }
        }
        let wc = &self.word_count;
        if !(0.0..=1.0).contains(&wc.long_fraction) {
            return Err(Error::config(format!(
                "long_fraction {} outside [0,1]",
                wc.long_fraction
            )));
        }
        for (name, v) in [
            ("short_mean", wc.short_mean),
            ("short_sd", wc.short_sd),
            ("long_mean", wc.long_mean),
            ("long_sd", wc.long_sd),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} {v} must be positive")));
            }
        }
        if self.n_cohorts < 3 {
            return Err(Error::config(format!(
                "n_cohorts {} must be >= 3 so out-of-time cohorts exist",
                self.n_cohorts
            )));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Map a latent standard-normal draw to the raw feature value.
fn raw_from_latent(feature: usize, z: f64) -> f64 {
    match INFORMATIVE_CONTINUOUS[feature].0 {
        "monthly_sales" => 40.0 * (0.5 * z).exp(),
        "debt_ratio" => sigmoid(z),
        "equity_share" => sigmoid(z),
        "years_trading" => 1.0 + 7.0 * sigmoid(z),
        "supplier_credit_days" => 20.0 * (0.35 * z).exp(),
        name => unreachable!("unknown informative feature {name}"),
    }
}

/// Invert `raw_from_latent`; used to recompute the structured signal from a record.
pub fn latent_from_raw(feature: usize, raw: f64) -> f64 {
    match INFORMATIVE_CONTINUOUS[feature].0 {
        "monthly_sales" => (raw / 40.0).ln() / 0.5,
        "debt_ratio" => logit(raw),
        "equity_share" => logit(raw),
        "years_trading" => logit((raw - 1.0) / 7.0),
        "supplier_credit_days" => (raw / 20.0).ln() / 0.35,
        name => unreachable!("unknown informative feature {name}"),
    }
}

/// Level scores re-centred to probability-weighted zero mean.
fn centered_scores(table: &[(&str, f64, f64, &str)]) -> Vec<f64> {
    let mean: f64 = table.iter().map(|(_, p, s, _)| p * s).sum();
    table.iter().map(|(_, _, s, _)| s - mean).collect()
}

fn score_variance(table: &[(&str, f64, f64, &str)]) -> f64 {
    let centered = centered_scores(table);
    table
        .iter()
        .zip(&centered)
        .map(|((_, p, _, _), s)| p * s * s)
        .sum()
}

/// Standard deviation of the raw structured score; divides it to standardize s.
pub fn latent_scale() -> f64 {
    let w2: f64 = INFORMATIVE_CONTINUOUS.iter().map(|(_, w)| w * w).sum();
    (w2 + score_variance(INDUSTRIES) + score_variance(REGIONS)).sqrt()
}

fn score_from_parts(latents: &[f64], industry: usize, region: usize) -> f64 {
    let weighted: f64 = INFORMATIVE_CONTINUOUS
        .iter()
        .zip(latents)
        .map(|((_, w), z)| w * z)
        .sum();
    let ind = centered_scores(INDUSTRIES)[industry];
    let reg = centered_scores(REGIONS)[region];
    (weighted + ind + reg) / latent_scale()
}

/// Recompute the standardized structured signal s from a record's raw features.
///
/// Independent of the generator's internal state: inverts the feature
/// transforms and looks the categorical scores up by token.
pub fn structured_score(record: &LoanRecord) -> f64 {
    let latents: Vec<f64> = (0..INFORMATIVE_CONTINUOUS.len())
        .map(|j| latent_from_raw(j, record.continuous[j]))
        .collect();
    let industry = INDUSTRIES
        .iter()
        .position(|(name, _, _, _)| *name == record.categorical[0])
        .expect("unknown industry token");
    let region = REGIONS
        .iter()
        .position(|(name, _, _, _)| *name == record.categorical[1])
        .expect("unknown region token");
    score_from_parts(&latents, industry, region)
}

/// Column layout produced by the generator.
pub fn synthetic_schema() -> FeatureSchema {
    let mut continuous_names: Vec<String> = INFORMATIVE_CONTINUOUS
        .iter()
        .map(|(name, _)| name.to_string())
        .collect();
    continuous_names.extend(NOISE_CONTINUOUS.iter().map(|s| s.to_string()));
    FeatureSchema {
        continuous_names,
        categorical_names: vec![INDUSTRY_FEATURE.to_string(), REGION_FEATURE.to_string()],
        text_field: "assessment".into(),
        label_field: "default".into(),
        segment_field: "segment".into(),
        cohort_field: "cohort".into(),
    }
}

fn pick_weighted<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

struct DraftRecord {
    segment: Segment,
    cohort: i32,
    continuous: Vec<f64>,
    industry: usize,
    region: usize,
    text: String,
    /// Label-model index β_s·s + β_t·t, before the segment intercept.
    index: f64,
}

fn build_text<R: Rng>(
    rng: &mut R,
    t: f64,
    long_form: bool,
    target_words: usize,
    industry: usize,
    region: usize,
) -> String {
    let mut sentences: Vec<String> = Vec::new();
    let template = INTRO_TEMPLATES[rng.gen_range(0..INTRO_TEMPLATES.len())];
    sentences.push(
        template
            .replace("{phrase}", INDUSTRIES[industry].3)
            .replace("{region}", REGIONS[region].3),
    );
    sentences.push(
        if t > ARREARS_THRESHOLD { ARREARS_RISK_SENTENCE } else { ARREARS_SAFE_SENTENCE }
            .to_string(),
    );
    let mut last_filler = usize::MAX;
    let mut next_filler = |rng: &mut R| loop {
        let k = rng.gen_range(0..FILLER_SENTENCES.len());
        if k != last_filler {
            last_filler = k;
            return FILLER_SENTENCES[k].to_string();
        }
    };
    // One neutral sentence buffers the keyword zone away from the document
    // head, so heavy truncation removes keywords before it removes the intro.
    sentences.push(next_filler(rng));
    for rule in KEYWORD_RULES {
        if rule.fires(t, long_form) {
            sentences.push(rule.sentence.to_string());
        }
    }
    let mut words: Vec<String> = sentences
        .iter()
        .flat_map(|s| s.split_whitespace().map(String::from))
        .collect();
    while words.len() < target_words {
        let filler = next_filler(rng);
        words.extend(filler.split_whitespace().map(String::from));
    }
    words.truncate(target_words);
    words.join(" ")
}

/// Generate a dataset. Fully deterministic given the config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let n = config.n_records;
    let rho = config.signal_overlap;
    let late_cohort = config.start_cohort + config.n_cohorts as i32 - 1;

    let mut cohort_probs = vec![0.80 / (config.n_cohorts - 2) as f64; config.n_cohorts];
    cohort_probs[0] = 0.08;
    cohort_probs[config.n_cohorts - 1] = 0.12;
    let industry_probs: Vec<f64> = INDUSTRIES.iter().map(|(_, p, _, _)| *p).collect();
    let region_probs: Vec<f64> = REGIONS.iter().map(|(_, p, _, _)| *p).collect();

    let mut drafts: Vec<DraftRecord> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(config.seed, &format!("record-{i}"));
        let segment = if rng.gen::<f64>() < P_SEGMENT_NEW { Segment::New } else { Segment::Existing };
        let cohort = config.start_cohort + pick_weighted(&mut rng, &cohort_probs) as i32;
        let is_late = cohort == late_cohort;

        let mut latents: Vec<f64> =
            (0..INFORMATIVE_CONTINUOUS.len()).map(|_| standard_normal(&mut rng)).collect();
        if config.drift.shift_feature_means && is_late {
            for &(feature, shift) in DRIFT_FEATURE_SHIFTS {
                latents[feature] += shift;
            }
        }
        let noise: Vec<f64> = NOISE_CONTINUOUS.iter().map(|_| standard_normal(&mut rng)).collect();
        let industry = pick_weighted(&mut rng, &industry_probs);
        let region = pick_weighted(&mut rng, &region_probs);
        let u = standard_normal(&mut rng);

        let s = score_from_parts(&latents, industry, region);
        let t = rho * s + (1.0 - rho * rho).sqrt() * u;

        let long_form = rng.gen::<f64>() < config.word_count.long_fraction;
        let (mean, sd, range) = if config.drift.truncate_late_texts && is_late {
            (DRIFT_WORDS_MEAN, DRIFT_WORDS_SD, DRIFT_RANGE)
        } else if long_form {
            (config.word_count.long_mean, config.word_count.long_sd, LONG_RANGE)
        } else {
            (config.word_count.short_mean, config.word_count.short_sd, SHORT_RANGE)
        };
        let target = (mean + sd * standard_normal(&mut rng)).round() as i64;
        let target = (target.max(range.0 as i64) as usize).min(range.1);

        let text = build_text(&mut rng, t, long_form, target, industry, region);

        let mut continuous: Vec<f64> =
            latents.iter().enumerate().map(|(j, &z)| raw_from_latent(j, z)).collect();
        continuous.extend(noise);

        drafts.push(DraftRecord {
            segment,
            cohort,
            continuous,
            industry,
            region,
            text,
            index: config.structured_strength * s + config.text_strength * t,
        });
    }

    let mut intercepts = std::collections::BTreeMap::new();
    for segment in Segment::ALL {
        let indices: Vec<f64> = drafts
            .iter()
            .filter(|d| d.segment == segment)
            .map(|d| d.index)
            .collect();
        let target = match segment {
            Segment::New => config.default_rate_new,
            Segment::Existing => config.default_rate_existing,
        };
        intercepts.insert(segment, calibrate_intercept(&indices, target));
    }

    let mut label_rng = stream(config.seed, "labels");
    let records = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let p = sigmoid(intercepts[&d.segment] + d.index);
            let label = (label_rng.gen::<f64>() < p) as u8;
            LoanRecord {
                id: 1 + i as u64,
                continuous: d.continuous,
                categorical: vec![
                    INDUSTRIES[d.industry].0.to_string(),
                    REGIONS[d.region].0.to_string(),
                ],
                text: d.text,
                label,
                segment: d.segment,
                cohort: d.cohort,
            }
        })
        .collect();

    Dataset::new(synthetic_schema(), records)
}

/// Solve mean(sigmoid(a + f_i)) = target for a by bisection.
fn calibrate_intercept(indices: &[f64], target: f64) -> f64 {
    if indices.is_empty() {
        return logit(target);
    }
    let mean_rate = |a: f64| {
        indices.iter().map(|f| sigmoid(a + f)).sum::<f64>() / indices.len() as f64
    };
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}
