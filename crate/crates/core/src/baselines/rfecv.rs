//! Recursive feature elimination with cross-validation, forest-driven.
//!
//! Each fold runs its own elimination path: train a forest, score the held-out
//! fold, drop the least important feature, repeat down to one feature. Mean
//! held-out AUC per feature count picks the final count; a full-data
//! elimination pass then names the surviving features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::cv::{fold_split, stratified_folds};
use crate::baselines::forest::{fit_forest, predict_forest, ForestHyper};
use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfecvConfig {
    pub folds: usize,
    /// Counts whose mean AUC is within `tolerance` of the best qualify; the
    /// smallest qualifying count wins.
    pub tolerance: f64,
    /// Forest size used inside the elimination loop (selection only, so
    /// smaller than a reporting forest).
    pub n_trees: usize,
    pub max_depth: usize,
}

impl Default for RfecvConfig {
    fn default() -> Self {
        Self { folds: 10, tolerance: 0.0, n_trees: 60, max_depth: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvReport {
    /// Full-data drop order, first dropped first; length d − selected count.
    pub elimination_order: Vec<usize>,
    /// (feature count, mean CV AUC), ascending count, one entry per count.
    pub auc_by_count: Vec<(usize, f64)>,
    /// Selected original feature indices, ascending.
    pub selected: Vec<usize>,
    /// Drop order per fold, for elimination-stability diagnostics.
    pub per_fold_drop_order: Vec<Vec<usize>>,
    pub tolerance: f64,
}

fn take_columns(x: &[Vec<f64>], active: &[usize]) -> Vec<Vec<f64>> {
    x.iter().map(|row| active.iter().map(|&j| row[j]).collect()).collect()
}

fn hyper_for(config: &RfecvConfig, n_active: usize) -> ForestHyper {
    ForestHyper {
        n_trees: config.n_trees,
        max_depth: config.max_depth,
        max_features: ((n_active as f64).sqrt().round() as usize).max(1),
    }
}

/// Position of the least-important active feature; ties drop the later one.
fn weakest(active: &[usize], importance: &[f64]) -> usize {
    let mut at = 0;
    for i in 1..active.len() {
        if importance[i] <= importance[at] {
            at = i;
        }
    }
    at
}

/// One elimination path over `rows`; records AUC per count when an evaluation
/// set is given. Returns (auc per count descending, drop order).
fn eliminate(
    x: &[Vec<f64>],
    y: &[u8],
    eval: Option<(&[Vec<f64>], &[u8])>,
    config: &RfecvConfig,
    seed: u64,
    label: &str,
) -> Result<(Vec<(usize, f64)>, Vec<usize>)> {
    let d = x[0].len();
    let mut active: Vec<usize> = (0..d).collect();
    let mut aucs = Vec::new();
    let mut dropped = Vec::new();
    while !active.is_empty() {
        let xt = take_columns(x, &active);
        let model = fit_forest(
            &xt,
            y,
            hyper_for(config, active.len()),
            derive_seed(seed, &format!("{label}-k{}", active.len())),
        )?;
        if let Some((xe, ye)) = eval {
            let p = predict_forest(&model, &take_columns(xe, &active))?;
            aucs.push((active.len(), auc(&p, ye)?));
        }
        if active.len() == 1 {
            break;
        }
        let weakest_pos = weakest(&active, &model.feature_importance);
        dropped.push(active.remove(weakest_pos));
    }
    Ok((aucs, dropped))
}

/// Cross-validated recursive feature elimination.
pub fn rfecv_select(
    x: &[Vec<f64>],
    y: &[u8],
    config: &RfecvConfig,
    seed: u64,
) -> Result<RfecvReport> {
    if x.is_empty() || x[0].len() < 2 {
        return Err(Error::validation("rfecv needs at least 2 features"));
    }
    let d = x[0].len();
    if !(config.tolerance >= 0.0) {
        return Err(Error::config("tolerance must be non-negative"));
    }
    let assignment = stratified_folds(y, config.folds, seed)?;

    let fold_results: Vec<(Vec<(usize, f64)>, Vec<usize>)> = (0..config.folds)
        .into_par_iter()
        .map(|fold| {
            let (train_idx, test_idx) = fold_split(&assignment, fold);
            let xt: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
            let xv: Vec<Vec<f64>> = test_idx.iter().map(|&i| x[i].clone()).collect();
            let yv: Vec<u8> = test_idx.iter().map(|&i| y[i]).collect();
            eliminate(&xt, &yt, Some((&xv, &yv)), config, seed, &format!("rfecv-f{fold}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut auc_by_count: Vec<(usize, f64)> = (1..=d)
        .map(|count| {
            let mean = fold_results
                .iter()
                .map(|(aucs, _)| {
                    aucs.iter().find(|(c, _)| *c == count).expect("every count visited").1
                })
                .sum::<f64>()
                / config.folds as f64;
            (count, mean)
        })
        .collect();
    auc_by_count.sort_unstable_by_key(|&(c, _)| c);

    let best = auc_by_count.iter().map(|&(_, a)| a).fold(f64::NEG_INFINITY, f64::max);
    let chosen_count = auc_by_count
        .iter()
        .find(|&&(_, a)| a >= best - config.tolerance)
        .map(|&(c, _)| c)
        .expect("at least one count exists");

    // Full-data pass to name the selected set.
    let (_, full_order) = eliminate(x, y, None, config, seed, "rfecv-full")?;
    let drop_n = d - chosen_count;
    let elimination_order: Vec<usize> = full_order[..drop_n].to_vec();
    let mut selected: Vec<usize> =
        (0..d).filter(|j| !elimination_order.contains(j)).collect();
    selected.sort_unstable();

    Ok(RfecvReport {
        elimination_order,
        auc_by_count,
        selected,
        per_fold_drop_order: fold_results.into_iter().map(|(_, order)| order).collect(),
        tolerance: config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{standard_normal, stream};

    /// 5 informative + 5 pure-noise columns; label is a deterministic
    /// threshold of a weighted score over the informative block, so noise
    /// features can only hurt.
    fn planted_problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = stream(seed, "rfecv-fixture");
        let weights = [1.0, 0.9, 0.8, 0.7, 0.6];
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..10).map(|_| standard_normal(&mut rng)).collect();
            let score: f64 = row[..5].iter().zip(&weights).map(|(a, b)| a * b).sum();
            x.push(row);
            y.push(u8::from(score > 0.0));
        }
        (x, y)
    }

    #[test]
    fn planted_informative_features_survive() {
        let (x, y) = planted_problem(400, 1);
        let config = RfecvConfig { folds: 5, n_trees: 40, ..RfecvConfig::default() };
        let report = rfecv_select(&x, &y, &config, 77).unwrap();
        let informative = report.selected.iter().filter(|&&j| j < 5).count();
        let noise = report.selected.iter().filter(|&&j| j >= 5).count();
        assert!(
            informative >= 4,
            "selected {:?}, curve {:?}",
            report.selected,
            report.auc_by_count
        );
        assert!(noise <= 1, "selected {:?}, curve {:?}", report.selected, report.auc_by_count);
    }

    #[test]
    fn noise_dropped_first_in_most_folds() {
        let mut rng = stream(2, "pair");
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..300 {
            let a = standard_normal(&mut rng);
            let b = standard_normal(&mut rng);
            x.push(vec![a, b]);
            y.push(u8::from(a + 0.3 * standard_normal(&mut rng) > 0.0));
        }
        let config = RfecvConfig { folds: 10, n_trees: 30, ..RfecvConfig::default() };
        let report = rfecv_select(&x, &y, &config, 5).unwrap();
        let noise_first =
            report.per_fold_drop_order.iter().filter(|order| order[0] == 1).count();
        assert!(noise_first >= 9, "noise dropped first in only {noise_first}/10 folds");
    }

    #[test]
    fn full_tolerance_selects_single_feature() {
        let (x, y) = planted_problem(200, 3);
        let config =
            RfecvConfig { folds: 4, tolerance: 1.0, n_trees: 20, ..RfecvConfig::default() };
        let report = rfecv_select(&x, &y, &config, 9).unwrap();
        assert_eq!(report.selected.len(), 1);
        assert_eq!(report.elimination_order.len(), 9);
    }

    #[test]
    fn report_is_internally_consistent() {
        let (x, y) = planted_problem(200, 4);
        let config = RfecvConfig { folds: 4, n_trees: 20, ..RfecvConfig::default() };
        let report = rfecv_select(&x, &y, &config, 11).unwrap();
        assert_eq!(report.auc_by_count.len(), 10);
        assert!(report.auc_by_count.windows(2).all(|w| w[0].0 + 1 == w[1].0));
        assert_eq!(report.selected.len() + report.elimination_order.len(), 10);
        for j in &report.selected {
            assert!(!report.elimination_order.contains(j));
        }
        for order in &report.per_fold_drop_order {
            assert_eq!(order.len(), 9);
        }
        // Chosen count is minimal within tolerance of the best mean AUC.
        let best =
            report.auc_by_count.iter().map(|&(_, a)| a).fold(f64::NEG_INFINITY, f64::max);
        for &(count, a) in &report.auc_by_count {
            if count < report.selected.len() {
                assert!(a < best - report.tolerance);
            }
        }
    }

    #[test]
    fn selection_is_deterministic() {
        let (x, y) = planted_problem(150, 5);
        let config = RfecvConfig { folds: 3, n_trees: 15, ..RfecvConfig::default() };
        let a = rfecv_select(&x, &y, &config, 13).unwrap();
        let b = rfecv_select(&x, &y, &config, 13).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_feature_input_is_rejected() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = vec![0, 1, 0, 1];
        assert!(rfecv_select(&x, &y, &RfecvConfig::default(), 0).is_err());
    }
}
