//! Word-removal LIME for a single document.
//!
//! Perturbations drop distinct words (all occurrences at once), the scorer
//! rates every perturbed variant, and a locally weighted ridge surrogate
//! over the keep/drop masks yields one signed weight per distinct word:
//! positive raises the predicted default probability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stream;
use crate::text::tokenize;

/// Probability that a perturbation keeps any given distinct word.
const KEEP_PROB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    /// Ridge strength on the word weights; the intercept is unpenalized.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig { n_samples: 1000, kernel_width: 0.75, ridge: 1.0, seed: 7 }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("lime needs at least one sample"));
        }
        if !(self.kernel_width.is_finite() && self.kernel_width > 0.0) {
            return Err(Error::config("lime kernel width must be positive"));
        }
        if !(self.ridge.is_finite() && self.ridge > 0.0) {
            return Err(Error::config("lime ridge strength must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordWeight {
    pub word: String,
    pub weight: f64,
}

/// Surrogate fit for one document; `words` are the document's distinct
/// tokens in first-occurrence order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub words: Vec<WordWeight>,
    pub intercept: f64,
    pub local_r2: f64,
    pub n_samples: usize,
    pub kernel_width: f64,
}

impl LimeExplanation {
    pub fn weight_of(&self, word: &str) -> Option<f64> {
        self.words.iter().find(|w| w.word == word).map(|w| w.weight)
    }
}

/// Explain one document. The scorer rates a batch of perturbed token lists
/// (one probability each) so model-backed callers can run them as one
/// forward pass; the first perturbation is always the unmodified document.
pub fn lime_text<F>(score: F, doc: &str, config: &LimeConfig) -> Result<LimeExplanation>
where
    F: Fn(&[Vec<String>]) -> Result<Vec<f64>>,
{
    config.validate()?;
    let tokens = tokenize(doc);
    if tokens.is_empty() {
        return Err(Error::validation("document is empty after cleaning"));
    }

    let mut distinct: Vec<String> = Vec::new();
    let word_index: Vec<usize> = tokens
        .iter()
        .map(|t| match distinct.iter().position(|d| d == t) {
            Some(i) => i,
            None => {
                distinct.push(t.clone());
                distinct.len() - 1
            }
        })
        .collect();
    let d = distinct.len();

    let mut rng = stream(config.seed, "lime-masks");
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(config.n_samples);
    masks.push(vec![true; d]);
    for _ in 1..config.n_samples {
        masks.push((0..d).map(|_| rng.gen::<f64>() < KEEP_PROB).collect());
    }

    let variants: Vec<Vec<String>> = masks
        .iter()
        .map(|mask| {
            tokens
                .iter()
                .zip(&word_index)
                .filter(|&(_, &wi)| mask[wi])
                .map(|(t, _)| t.clone())
                .collect()
        })
        .collect();

    let ys = score(&variants).map_err(|e| {
        Error::numeric(format!("scoring {} lime perturbations: {e}", variants.len()))
    })?;
    if ys.len() != variants.len() {
        return Err(Error::validation(format!(
            "lime scorer returned {} scores for {} perturbations",
            ys.len(),
            variants.len()
        )));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::numeric("lime scorer returned a non-finite score"));
    }

    // Locality weight from the cosine distance to the all-ones mask, which
    // for binary masks reduces to 1 - sqrt(kept / d).
    let sample_weights: Vec<f64> = masks
        .iter()
        .map(|mask| {
            let kept = mask.iter().filter(|&&b| b).count();
            let dist =
                if kept == 0 { 1.0 } else { 1.0 - (kept as f64 / d as f64).sqrt() };
            (-dist * dist / (config.kernel_width * config.kernel_width)).exp()
        })
        .collect();

    let beta = weighted_ridge(&masks, &ys, &sample_weights, config.ridge)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::numeric("lime surrogate produced non-finite weights"));
    }

    let local_r2 = weighted_r2(&masks, &ys, &sample_weights, &beta);
    let words = distinct
        .into_iter()
        .zip(beta[1..].iter())
        .map(|(word, &weight)| WordWeight { word, weight })
        .collect();
    Ok(LimeExplanation {
        words,
        intercept: beta[0],
        local_r2,
        n_samples: config.n_samples,
        kernel_width: config.kernel_width,
    })
}

fn surrogate_prediction(mask: &[bool], beta: &[f64]) -> f64 {
    beta[0]
        + mask
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b)
            .map(|(j, _)| beta[j + 1])
            .sum::<f64>()
}

/// Minimize sum_i w_i (y_i - b0 - m_i . b)^2 + lambda |b|^2 over [b0, b].
/// Normal equations solved by Cholesky; lambda > 0 and a positive first
/// sample weight make the system positive definite.
fn weighted_ridge(masks: &[Vec<bool>], ys: &[f64], ws: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let d = masks[0].len();
    let p = d + 1;
    let mut a = vec![0.0f64; p * p];
    let mut b = vec![0.0f64; p];

    for ((mask, &y), &w) in masks.iter().zip(ys).zip(ws) {
        let kept: Vec<usize> = (0..d).filter(|&j| mask[j]).collect();
        a[0] += w;
        b[0] += w * y;
        for &j in &kept {
            a[j + 1] += w; // row 0, column j+1
            b[j + 1] += w * y;
        }
        for (ki, &j) in kept.iter().enumerate() {
            for &k in &kept[ki..] {
                a[(j + 1) * p + (k + 1)] += w;
            }
        }
    }
    for j in 1..p {
        a[j * p + j] += lambda;
    }
    // Mirror the accumulated upper triangle.
    for r in 0..p {
        for c in (r + 1)..p {
            a[c * p + r] = a[r * p + c];
        }
    }

    cholesky_solve(&mut a, &mut b, p)?;
    Ok(b)
}

/// In-place Cholesky factorization and solve for a symmetric positive
/// definite system; `a` is row-major p x p, `b` becomes the solution.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], p: usize) -> Result<()> {
    for j in 0..p {
        let mut diag = a[j * p + j];
        for k in 0..j {
            diag -= a[j * p + k] * a[j * p + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::numeric("ridge normal equations are not positive definite"));
        }
        let diag = diag.sqrt();
        a[j * p + j] = diag;
        for i in (j + 1)..p {
            let mut v = a[i * p + j];
            for k in 0..j {
                v -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = v / diag;
        }
    }
    // Forward substitution L z = b, then back substitution L^T x = z.
    for i in 0..p {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * p + k] * b[k];
        }
        b[i] = v / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut v = b[i];
        for k in (i + 1)..p {
            v -= a[k * p + i] * b[k];
        }
        b[i] = v / a[i * p + i];
    }
    Ok(())
}

fn weighted_r2(masks: &[Vec<bool>], ys: &[f64], ws: &[f64], beta: &[f64]) -> f64 {
    let w_sum: f64 = ws.iter().sum();
    let y_mean = ys.iter().zip(ws).map(|(&y, &w)| w * y).sum::<f64>() / w_sum;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut scale = 0.0;
    for ((mask, &y), &w) in masks.iter().zip(ys).zip(ws) {
        ss_res += w * (y - surrogate_prediction(mask, beta)).powi(2);
        ss_tot += w * (y - y_mean).powi(2);
        scale += w * y * y;
    }
    // A response that is constant up to rounding is fit exactly by the
    // intercept; the ratio of two rounding residues would be noise.
    if ss_tot <= 1e-18 * (1.0 + scale) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "the borrower reported informal income and delayed loan payments last year";

    #[test]
    fn constant_scorer_gives_zero_weights() {
        let score = |docs: &[Vec<String>]| Ok(vec![0.37; docs.len()]);
        let exp = lime_text(score, DOC, &LimeConfig::default()).unwrap();
        for w in &exp.words {
            assert!(w.weight.abs() <= 1e-6, "{}: {}", w.word, w.weight);
        }
        assert!((exp.intercept - 0.37).abs() <= 1e-6);
        assert_eq!(exp.local_r2, 1.0);
    }

    #[test]
    fn planted_keyword_dominates_the_explanation() {
        let score = |docs: &[Vec<String>]| {
            Ok(docs
                .iter()
                .map(|toks| if toks.iter().any(|t| t == "informal") { 0.9 } else { 0.1 })
                .collect())
        };
        let exp = lime_text(score, DOC, &LimeConfig::default()).unwrap();
        let target = exp.weight_of("informal").unwrap();
        assert!(target > 0.0);
        let next = exp
            .words
            .iter()
            .filter(|w| w.word != "informal")
            .map(|w| w.weight.abs())
            .fold(0.0f64, f64::max);
        assert!(target >= 5.0 * next, "target {target}, next {next}");
        assert!(exp.local_r2 > 0.99, "local r2 {}", exp.local_r2);
    }

    #[test]
    fn protective_keyword_gets_a_negative_weight() {
        let score = |docs: &[Vec<String>]| {
            Ok(docs
                .iter()
                .map(|toks| if toks.iter().any(|t| t == "income") { 0.1 } else { 0.8 })
                .collect())
        };
        let exp = lime_text(score, DOC, &LimeConfig::default()).unwrap();
        assert!(exp.weight_of("income").unwrap() < -0.3);
    }

    #[test]
    fn duplicated_words_appear_once_and_are_removed_together() {
        let doc = "late payment late notice late";
        // Scores by occurrence count, so partial removal would show up as
        // an intermediate value.
        let score = |docs: &[Vec<String>]| {
            Ok(docs
                .iter()
                .map(|toks| {
                    let n = toks.iter().filter(|t| *t == "late").count();
                    assert!(n == 0 || n == 3, "occurrences must move as one unit");
                    0.1 + 0.2 * n as f64
                })
                .collect())
        };
        let exp = lime_text(score, doc, &LimeConfig::default()).unwrap();
        let words: Vec<&str> = exp.words.iter().map(|w| w.word.as_str()).collect();
        assert_eq!(words, vec!["late", "payment", "notice"]);
        assert!(exp.weight_of("late").unwrap() > 0.3);
    }

    #[test]
    fn first_variant_is_the_unmodified_document() {
        let seen = std::cell::RefCell::new(Vec::new());
        let score = |docs: &[Vec<String>]| {
            seen.borrow_mut().extend(docs.iter().cloned());
            Ok(vec![0.5; docs.len()])
        };
        let cfg = LimeConfig { n_samples: 3, ..Default::default() };
        lime_text(score, "alpha beta alpha", &cfg).unwrap();
        let seen = seen.borrow();
        assert_eq!(seen.len(), 3);
        assert_eq!(seen[0], vec!["alpha", "beta", "alpha"]);
    }

    #[test]
    fn explanations_are_deterministic_for_a_seed() {
        let score = |docs: &[Vec<String>]| {
            Ok(docs.iter().map(|t| 0.1 + 0.05 * t.len() as f64).collect())
        };
        let a = lime_text(score, DOC, &LimeConfig::default()).unwrap();
        let b = lime_text(score, DOC, &LimeConfig::default()).unwrap();
        for (wa, wb) in a.words.iter().zip(&b.words) {
            assert_eq!(wa.weight.to_bits(), wb.weight.to_bits());
        }
    }

    #[test]
    fn weights_transform_exactly_with_an_affine_scorer_change() {
        // Deterministic pseudo-random response over token sets.
        let base = |toks: &[String]| {
            toks.iter()
                .map(|t| t.bytes().map(f64::from).sum::<f64>().sin() * 0.1)
                .sum::<f64>()
                + 0.4
        };
        let (aff_a, aff_b) = (-2.5, 0.7);
        let s1 = |docs: &[Vec<String>]| Ok(docs.iter().map(|t| base(t)).collect());
        let s2 =
            |docs: &[Vec<String>]| Ok(docs.iter().map(|t| aff_a * base(t) + aff_b).collect());
        let e1 = lime_text(s1, DOC, &LimeConfig::default()).unwrap();
        let e2 = lime_text(s2, DOC, &LimeConfig::default()).unwrap();
        for (w1, w2) in e1.words.iter().zip(&e2.words) {
            assert!((w2.weight - aff_a * w1.weight).abs() <= 1e-9);
        }
        assert!((e2.intercept - (aff_a * e1.intercept + aff_b)).abs() <= 1e-9);
    }

    #[test]
    fn empty_documents_are_rejected() {
        let score = |docs: &[Vec<String>]| Ok(vec![0.5; docs.len()]);
        let err = lime_text(score, "   ", &LimeConfig::default()).unwrap_err();
        assert!(err.to_string().contains("empty after cleaning"));
    }

    #[test]
    fn scorer_failures_carry_perturbation_context() {
        let score = |_: &[Vec<String>]| -> Result<Vec<f64>> {
            Err(Error::numeric("model exploded"))
        };
        let err = lime_text(score, DOC, &LimeConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lime perturbations"), "got {msg}");
        assert!(msg.contains("model exploded"), "got {msg}");

        let short = |docs: &[Vec<String>]| Ok(vec![0.5; docs.len() - 1]);
        let err = lime_text(short, DOC, &LimeConfig::default()).unwrap_err();
        assert!(err.to_string().contains("999 scores for 1000"), "got {err}");

        let nan = |docs: &[Vec<String>]| {
            Ok(docs
                .iter()
                .map(|t| if t.len() < 3 { f64::NAN } else { 0.5 })
                .collect())
        };
        let err = lime_text(nan, DOC, &LimeConfig::default()).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "got {err}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let score = |docs: &[Vec<String>]| Ok(vec![0.5; docs.len()]);
        for cfg in [
            LimeConfig { n_samples: 0, ..Default::default() },
            LimeConfig { kernel_width: 0.0, ..Default::default() },
            LimeConfig { kernel_width: f64::NAN, ..Default::default() },
            LimeConfig { ridge: 0.0, ..Default::default() },
            LimeConfig { ridge: -1.0, ..Default::default() },
        ] {
            assert!(lime_text(score, DOC, &cfg).is_err());
        }
    }

    #[test]
    fn cholesky_matches_a_small_hand_solved_system() {
        // A = [[4,2],[2,3]], b = [10, 8]: x = [7/4, 3/2].
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![10.0, 8.0];
        cholesky_solve(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 1.75).abs() < 1e-12);
        assert!((b[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite_systems() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        let mut b = vec![1.0, 1.0];
        let err = cholesky_solve(&mut a, &mut b, 2).unwrap_err();
        assert!(err.to_string().contains("positive definite"));
    }
}
