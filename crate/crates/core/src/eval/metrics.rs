//! Core metrics: AUC, class-weighted Brier score, Spearman rank correlation.
//!
//! Ties are handled by average ranks throughout, so the AUC here is exactly
//! the pairwise probability that a positive outranks a negative with ties
//! counted one half.

use crate::error::{Error, Result};

/// 1-based ranks with ties given the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("non-finite rank input"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the average 1-based rank.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn check_binary_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::validation(format!(
            "scores and labels differ in length ({} vs {})",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::validation("non-finite score"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("both classes must be present"));
    }
    Ok((n_pos, n_neg))
}

/// Probability that a random positive outscores a random negative, ties ½.
///
/// Computed via the rank-sum formulation with average ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check_binary_inputs(scores, labels)?;
    let ranks = average_ranks(scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(r, _)| r)
        .sum();
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Brier score with per-record weights 1/(2·prior of the record's class), so
/// both classes contribute equally regardless of imbalance.
pub fn weighted_brier(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check_binary_inputs(scores, labels)?;
    if scores.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(Error::validation("scores must lie in [0,1]"));
    }
    let n = labels.len() as f64;
    let w_pos = 1.0 / (2.0 * n_pos as f64 / n);
    let w_neg = 1.0 / (2.0 * n_neg as f64 / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &y) in scores.iter().zip(labels) {
        let w = if y == 1 { w_pos } else { w_neg };
        let e = p - y as f64;
        num += w * e * e;
        den += w;
    }
    Ok(num / den)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::validation("correlation undefined for constant input"));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Pearson correlation of average-ranked values.
pub fn spearman_rank_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::validation("need at least 2 observations"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite input"));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Oracle: count positive-negative pairs directly.
    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, &yj) in labels.iter().enumerate() {
                if yj != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    /// Oracle: the class-weighted formula evaluated term by term.
    fn direct_weighted_brier(scores: &[f64], labels: &[u8]) -> f64 {
        let n = labels.len() as f64;
        let prior_pos = labels.iter().filter(|&&y| y == 1).count() as f64 / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (&p, &y) in scores.iter().zip(labels) {
            let prior = if y == 1 { prior_pos } else { 1.0 - prior_pos };
            let w = 1.0 / (2.0 * prior);
            num += w * (p - y as f64).powi(2);
            den += w;
        }
        num / den
    }

    #[test]
    fn auc_matches_hand_computed_example() {
        let got = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(got, 0.75);
    }

    #[test]
    fn perfect_and_constant_scores() {
        assert_eq!(auc(&[0.0, 1.0, 0.0, 1.0], &[0, 1, 0, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3, 0.3, 0.3], &[0, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(weighted_brier(&[0.1, 0.2], &[0, 0]).is_err());
    }

    #[test]
    fn brier_matches_hand_computed_example() {
        let got = weighted_brier(&[0.2, 0.9], &[0, 1]).unwrap();
        assert!((got - 0.025).abs() < 1e-15);
    }

    #[test]
    fn brier_of_coin_flip_is_quarter_under_any_imbalance() {
        let scores = vec![0.5; 10];
        let labels = [vec![1u8; 1], vec![0u8; 9]].concat();
        assert!((weighted_brier(&scores, &labels).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn perfect_hard_predictions_score_zero() {
        let labels = [0u8, 1, 1, 0];
        let scores = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(weighted_brier(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn random_sets_match_both_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let started = std::time::Instant::now();
        for round in 0..200 {
            let n = rng.gen_range(2..=50);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            // Force both classes.
            labels[0] = 0;
            labels[1] = 1;
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    let s: f64 = rng.gen();
                    // Quantize some scores so ties actually occur.
                    if rng.gen_bool(0.5) { (s * 4.0).round() / 4.0 } else { s }
                })
                .collect();
            let fast = auc(&scores, &labels).unwrap();
            let slow = pairwise_auc(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "round {round}: {fast} vs {slow}");
            let wb = weighted_brier(&scores, &labels).unwrap();
            let wb_oracle = direct_weighted_brier(&scores, &labels);
            assert!((wb - wb_oracle).abs() < 1e-12, "round {round}: {wb} vs {wb_oracle}");
        }
        assert!(started.elapsed().as_secs() < 5);
    }

    #[test]
    fn spearman_matches_hand_computed_example() {
        let got = spearman_rank_corr(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((got - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spearman_extremes() {
        let a = [0.3, 0.9, 0.1, 0.5];
        assert!((spearman_rank_corr(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let reversed: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((spearman_rank_corr(&a, &reversed).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_rejects_constant_input() {
        assert!(spearman_rank_corr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn average_ranks_handle_tie_runs() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn score_label_sets() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
            (2usize..40).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.0f64..1.0, n),
                    proptest::collection::vec(0u8..=1, n),
                )
            })
        }

        proptest! {
            #[test]
            fn auc_invariant_under_monotone_transform((scores, mut labels) in score_label_sets()) {
                labels[0] = 0;
                labels[1] = 1;
                let base = auc(&scores, &labels).unwrap();
                let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).tanh()).collect();
                let shifted: Vec<f64> = scores.iter().map(|s| 2.0 * s + 7.0).collect();
                prop_assert!((auc(&squashed, &labels).unwrap() - base).abs() < 1e-12);
                prop_assert!((auc(&shifted, &labels).unwrap() - base).abs() < 1e-12);
            }

            #[test]
            fn auc_of_flipped_scores_complements((scores, mut labels) in score_label_sets()) {
                labels[0] = 0;
                labels[1] = 1;
                // Perturb to break ties; the identity needs tie-free scores.
                let scores: Vec<f64> = scores
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s + (i as f64) * 1e-9)
                    .collect();
                let a = auc(&scores, &labels).unwrap();
                let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
                let b = auc(&flipped, &labels).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }

            #[test]
            fn brier_invariant_under_minority_duplication((scores, mut labels) in score_label_sets()) {
                labels[0] = 0;
                labels[1] = 1;
                let base = weighted_brier(&scores, &labels).unwrap();
                let n_pos = labels.iter().filter(|&&y| y == 1).count();
                let minority = if 2 * n_pos <= labels.len() { 1u8 } else { 0u8 };
                let mut dup_scores = scores.clone();
                let mut dup_labels = labels.clone();
                for (s, y) in scores.iter().zip(&labels) {
                    if *y == minority {
                        dup_scores.push(*s);
                        dup_labels.push(*y);
                    }
                }
                let dup = weighted_brier(&dup_scores, &dup_labels).unwrap();
                prop_assert!((base - dup).abs() < 1e-12, "{base} vs {dup}");
            }

            #[test]
            fn spearman_invariant_under_monotone_transforms(a in proptest::collection::vec(0.0f64..1.0, 3..30)) {
                prop_assume!(a.windows(2).any(|w| w[0] != w[1]));
                let b: Vec<f64> = a.iter().rev().cloned().collect();
                prop_assume!(b.windows(2).any(|w| w[0] != w[1]));
                let base = spearman_rank_corr(&a, &b).unwrap();
                let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
                let tb: Vec<f64> = b.iter().map(|v| 5.0 * v - 2.0).collect();
                let transformed = spearman_rank_corr(&ta, &tb).unwrap();
                prop_assert!((base - transformed).abs() < 1e-12);
            }
        }
    }
}
