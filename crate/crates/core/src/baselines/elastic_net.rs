//! Elastic-net logistic regression via proximal-Newton coordinate descent.
//!
//! Outer loop: quadratic (IRLS) approximation of the logistic loss at the
//! current iterate. Inner loop: cyclic coordinate descent with
//! soft-thresholding on the penalized weighted least squares problem. The
//! lambda path is walked from strongest penalty down with warm starts.
//!
//! Objective, minimized exactly as written (no internal rescaling):
//!   (1/n) Σ logloss(y_i, σ(x_i·w + b)) + λ·(α‖w‖₁ + (1−α)/2·‖w‖₂²)
//! with the intercept unpenalized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::cv::{fold_split, mean_std, stratified_folds, CvCandidate, CvSearchReport};
use crate::error::{Error, Result};
use crate::eval::metrics::auc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// α ∈ [0,1]: 1 = pure lasso, 0 = pure ridge.
    pub l1_ratio: f64,
    /// Penalty strength λ ≥ 0.
    pub lambda: f64,
}

impl crate::model_io::ModelKind for ElasticNetModel {
    const KIND: &'static str = "elastic-net";
    fn dims(&self) -> Vec<usize> {
        vec![self.weights.len()]
    }
}

/// Hyperparameter search space for [`train_elastic_net`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetSearch {
    /// l1_ratio grid; every value must lie in [0,1].
    pub l1_grid: Vec<f64>,
    /// Geometric lambda path length per l1_ratio.
    pub n_lambda: usize,
    /// Path spans [λ_max·10^−decades, λ_max].
    pub lambda_decades: f64,
    pub folds: usize,
}

impl Default for ElasticNetSearch {
    fn default() -> Self {
        Self {
            l1_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_lambda: 20,
            lambda_decades: 3.0,
            folds: 10,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn validate_xy(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() || x[0].is_empty() {
        return Err(Error::validation("empty design matrix"));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::validation("ragged design matrix"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite feature value"));
    }
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    let pos: usize = y.iter().map(|&v| v as usize).sum();
    if pos == 0 || pos == y.len() {
        return Err(Error::validation("labels contain a single class"));
    }
    Ok(d)
}

fn to_columns(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let mut cols = vec![Vec::with_capacity(x.len()); d];
    for row in x {
        for (j, &v) in row.iter().enumerate() {
            cols[j].push(v);
        }
    }
    cols
}

/// Penalized logistic objective at (w, b).
fn objective(cols: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l1_ratio: f64, lambda: f64) -> f64 {
    let n = y.len();
    let mut eta = vec![b; n];
    for (j, col) in cols.iter().enumerate() {
        if w[j] != 0.0 {
            for (e, &v) in eta.iter_mut().zip(col) {
                *e += w[j] * v;
            }
        }
    }
    let mut loss = 0.0;
    for (e, &yi) in eta.iter().zip(y) {
        // log(1 + exp(−s·η)) with s = ±1, stable form.
        let s = 2.0 * yi - 1.0;
        let m = s * e;
        loss += if m > 0.0 { (-m).exp().ln_1p() } else { -m + m.exp().ln_1p() };
    }
    loss /= n as f64;
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let l2: f64 = w.iter().map(|v| v * v).sum();
    loss + lambda * (l1_ratio * l1 + (1.0 - l1_ratio) * 0.5 * l2)
}

/// Core fitter; `on_outer` observes the objective after every outer iteration.
fn fit_core(
    cols: &[Vec<f64>],
    y: &[f64],
    l1_ratio: f64,
    lambda: f64,
    warm: Option<(&[f64], f64)>,
    mut on_outer: impl FnMut(f64),
) -> (Vec<f64>, f64) {
    let d = cols.len();
    let n = y.len();
    let nf = n as f64;
    let (mut w, mut b) = match warm {
        Some((w0, b0)) => (w0.to_vec(), b0),
        None => (vec![0.0; d], logit(y.iter().sum::<f64>() / nf)),
    };
    let mut eta = vec![0.0; n];
    let recompute_eta = |w: &[f64], b: f64, eta: &mut Vec<f64>| {
        for e in eta.iter_mut() {
            *e = b;
        }
        for (j, col) in cols.iter().enumerate() {
            if w[j] != 0.0 {
                for (e, &v) in eta.iter_mut().zip(col) {
                    *e += w[j] * v;
                }
            }
        }
    };
    recompute_eta(&w, b, &mut eta);

    let ridge = lambda * (1.0 - l1_ratio);
    let l1 = lambda * l1_ratio;
    let mut v = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _outer in 0..100 {
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let vi = (p * (1.0 - p)).max(1e-6);
            v[i] = vi;
            z[i] = eta[i] + (y[i] - p) / vi;
        }
        let v_sum: f64 = v.iter().sum();
        let den: Vec<f64> = cols
            .iter()
            .map(|col| col.iter().zip(&v).map(|(x, vi)| vi * x * x).sum::<f64>() / nf + ridge)
            .collect();

        let w_before: Vec<f64> = w.clone();
        let b_before = b;
        for _sweep in 0..200 {
            let mut max_delta = 0.0f64;
            // Intercept first: weighted mean of the working residual.
            let resid_sum: f64 =
                v.iter().zip(&z).zip(&eta).map(|((vi, zi), e)| vi * (zi - (e - b))).sum();
            let b_new = resid_sum / v_sum;
            let db = b_new - b;
            if db != 0.0 {
                for e in eta.iter_mut() {
                    *e += db;
                }
                max_delta = max_delta.max(db.abs());
                b = b_new;
            }
            for j in 0..d {
                let col = &cols[j];
                let mut num = 0.0;
                for i in 0..n {
                    num += v[i] * col[i] * (z[i] - eta[i] + w[j] * col[i]);
                }
                num /= nf;
                // A zero coordinate activates only if it clears the threshold
                // by a relative margin; rounding noise at the lambda_max
                // boundary must not flip lasso's exact zeros.
                if w[j] == 0.0 && num.abs() <= l1 * (1.0 + 1e-10) {
                    continue;
                }
                let w_new = soft_threshold(num, l1) / den[j];
                let dw = w_new - w[j];
                if dw != 0.0 {
                    for (e, &xv) in eta.iter_mut().zip(col) {
                        *e += dw * xv;
                    }
                    max_delta = max_delta.max(dw.abs());
                    w[j] = w_new;
                }
            }
            if max_delta < 1e-10 {
                break;
            }
        }
        // Guard against quadratic-approximation drift.
        recompute_eta(&w, b, &mut eta);
        on_outer(objective(cols, y, &w, b, l1_ratio, lambda));
        let outer_delta = w
            .iter()
            .zip(&w_before)
            .map(|(a, c)| (a - c).abs())
            .fold((b - b_before).abs(), f64::max);
        if outer_delta < 1e-9 {
            break;
        }
    }
    (w, b)
}

/// Fit at a fixed (l1_ratio, lambda), optionally warm-started.
pub fn fit_elastic_net_fixed(
    x: &[Vec<f64>],
    y: &[u8],
    l1_ratio: f64,
    lambda: f64,
    warm: Option<(&[f64], f64)>,
) -> Result<ElasticNetModel> {
    validate_xy(x, y)?;
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::config(format!("l1_ratio {l1_ratio} outside [0,1]")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda {lambda} must be finite and >= 0")));
    }
    let cols = to_columns(x);
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let (weights, intercept) = fit_core(&cols, &yf, l1_ratio, lambda, warm, |_| {});
    Ok(ElasticNetModel { weights, intercept, l1_ratio, lambda })
}

/// Smallest lambda that zeroes every weight at l1_ratio = 1.
pub fn lambda_max_l1(x: &[Vec<f64>], y: &[u8]) -> Result<f64> {
    validate_xy(x, y)?;
    let n = y.len() as f64;
    let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let d = x[0].len();
    let mut best = 0.0f64;
    for j in 0..d {
        let g: f64 =
            x.iter().zip(y).map(|(row, &yi)| row[j] * (yi as f64 - ybar)).sum::<f64>() / n;
        best = best.max(g.abs());
    }
    if best == 0.0 {
        return Err(Error::numeric("all features uncorrelated with labels; no lambda path"));
    }
    Ok(best)
}

/// Geometric descending lambda path for one l1_ratio.
pub fn lambda_path(lambda_max_l1: f64, l1_ratio: f64, n_lambda: usize, decades: f64) -> Vec<f64> {
    // Ridge-heavy mixes rescale the entry point, as in standard practice.
    let lmax = lambda_max_l1 / l1_ratio.max(1e-3);
    if n_lambda == 1 {
        return vec![lmax];
    }
    (0..n_lambda)
        .map(|i| lmax * 10f64.powf(-decades * i as f64 / (n_lambda - 1) as f64))
        .collect()
}

/// Largest KKT (subgradient) violation of the logistic elastic-net objective.
pub fn kkt_violation(model: &ElasticNetModel, x: &[Vec<f64>], y: &[u8]) -> Result<f64> {
    let d = validate_xy(x, y)?;
    if model.weights.len() != d {
        return Err(Error::validation("weight dimension mismatch"));
    }
    let n = y.len() as f64;
    let p: Vec<f64> = x
        .iter()
        .map(|row| {
            sigmoid(
                row.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>() + model.intercept,
            )
        })
        .collect();
    let l1 = model.lambda * model.l1_ratio;
    let ridge = model.lambda * (1.0 - model.l1_ratio);
    let mut worst: f64 = p
        .iter()
        .zip(y)
        .map(|(pi, &yi)| pi - yi as f64)
        .sum::<f64>()
        .abs()
        / n;
    for j in 0..d {
        let grad: f64 = x
            .iter()
            .zip(y)
            .zip(&p)
            .map(|((row, &yi), pi)| row[j] * (pi - yi as f64))
            .sum::<f64>()
            / n
            + ridge * model.weights[j];
        let viol = if model.weights[j] > 0.0 {
            (grad + l1).abs()
        } else if model.weights[j] < 0.0 {
            (grad - l1).abs()
        } else {
            (grad.abs() - l1).max(0.0)
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}

/// Probabilities for a fitted linear model.
pub fn predict_linear(model: &ElasticNetModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    if x.iter().any(|r| r.len() != model.weights.len()) {
        return Err(Error::validation(format!(
            "model expects {} features",
            model.weights.len()
        )));
    }
    Ok(x.iter()
        .map(|row| {
            sigmoid(
                row.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>() + model.intercept,
            )
        })
        .collect())
}

fn subset_rows(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| x[i].clone()).collect()
}

fn subset_labels(y: &[u8], idx: &[usize]) -> Vec<u8> {
    idx.iter().map(|&i| y[i]).collect()
}

/// Walk the lambda path with warm starts; returns one model per lambda.
fn fit_path(
    x: &[Vec<f64>],
    y: &[u8],
    l1_ratio: f64,
    path: &[f64],
) -> Result<Vec<ElasticNetModel>> {
    let cols = to_columns(x);
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut out = Vec::with_capacity(path.len());
    let mut warm: Option<(Vec<f64>, f64)> = None;
    for &lambda in path {
        let (w, b) = fit_core(
            &cols,
            &yf,
            l1_ratio,
            lambda,
            warm.as_ref().map(|(w, b)| (w.as_slice(), *b)),
            |_| {},
        );
        warm = Some((w.clone(), b));
        out.push(ElasticNetModel { weights: w, intercept: b, l1_ratio, lambda });
    }
    Ok(out)
}

/// Cross-validated search over the l1_ratio grid and a data-driven lambda
/// path; the winner is refit on all rows. Ties prefer the smaller model
/// (higher lambda, then higher l1_ratio).
pub fn train_elastic_net(
    x: &[Vec<f64>],
    y: &[u8],
    search: &ElasticNetSearch,
    seed: u64,
) -> Result<(ElasticNetModel, CvSearchReport)> {
    validate_xy(x, y)?;
    if search.l1_grid.is_empty() {
        return Err(Error::config("empty l1_ratio grid"));
    }
    if search.l1_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::config("l1_ratio grid values must lie in [0,1]"));
    }
    if search.n_lambda == 0 {
        return Err(Error::config("n_lambda must be positive"));
    }
    let lmax = lambda_max_l1(x, y)?;
    let assignment = stratified_folds(y, search.folds, seed)?;

    // candidate list: for each l1_ratio, its descending lambda path.
    let paths: Vec<(f64, Vec<f64>)> = search
        .l1_grid
        .iter()
        .map(|&a| (a, lambda_path(lmax, a, search.n_lambda, search.lambda_decades)))
        .collect();

    // auc[fold][flat candidate index]
    let fold_aucs: Vec<Vec<f64>> = (0..search.folds)
        .into_par_iter()
        .map(|fold| {
            let (train_idx, test_idx) = fold_split(&assignment, fold);
            let xt = subset_rows(x, &train_idx);
            let yt = subset_labels(y, &train_idx);
            let xv = subset_rows(x, &test_idx);
            let yv = subset_labels(y, &test_idx);
            let mut aucs = Vec::new();
            for (l1_ratio, path) in &paths {
                let models = fit_path(&xt, &yt, *l1_ratio, path)?;
                for model in &models {
                    let p = predict_linear(model, &xv)?;
                    aucs.push(auc(&p, &yv)?);
                }
            }
            Ok(aucs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut candidates = Vec::new();
    let mut flat = 0usize;
    let mut chosen = 0usize;
    let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (l1_ratio, path) in &paths {
        for &lambda in path {
            let per_fold: Vec<f64> = fold_aucs.iter().map(|f| f[flat]).collect();
            let (mean, std) = mean_std(&per_fold);
            let mut params = std::collections::BTreeMap::new();
            params.insert("l1_ratio".to_string(), *l1_ratio);
            params.insert("lambda".to_string(), lambda);
            candidates.push(CvCandidate { params, mean_auc: mean, std_auc: std });
            let key = (mean, lambda, *l1_ratio);
            if key > best_key {
                best_key = key;
                chosen = flat;
            }
            flat += 1;
        }
    }

    let chosen_params = &candidates[chosen].params;
    let l1_ratio = chosen_params["l1_ratio"];
    let lambda = chosen_params["lambda"];
    // Refit on all rows, walking the path down to the chosen lambda so the
    // final fit enjoys the same warm-start trajectory as the CV fits.
    let full_path: Vec<f64> = lambda_path(lmax, l1_ratio, search.n_lambda, search.lambda_decades)
        .into_iter()
        .filter(|&l| l >= lambda)
        .collect();
    let models = fit_path(x, y, l1_ratio, &full_path)?;
    let model = models.into_iter().last().expect("path is non-empty");
    let report = CvSearchReport { candidates, chosen, folds: search.folds };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{standard_normal, stream};
    use rand::Rng;

    /// Independent second-order oracle: damped Newton on the ridge-logistic
    /// objective, solved with a dense linear solver. Shares no code with the
    /// coordinate-descent path.
    fn newton_ridge_oracle(x: &[Vec<f64>], y: &[u8], lambda: f64) -> (Vec<f64>, f64) {
        use nalgebra::{DMatrix, DVector};
        let n = x.len();
        let d = x[0].len();
        let nf = n as f64;
        let mut beta = DVector::zeros(d + 1); // [w; b]
        let obj = |beta: &DVector<f64>| -> f64 {
            let mut loss = 0.0;
            for (row, &yi) in x.iter().zip(y) {
                let eta: f64 =
                    row.iter().enumerate().map(|(j, v)| beta[j] * v).sum::<f64>() + beta[d];
                let s = 2.0 * yi as f64 - 1.0;
                let m = s * eta;
                loss += if m > 0.0 { (-m).exp().ln_1p() } else { -m + m.exp().ln_1p() };
            }
            loss / nf + 0.5 * lambda * (0..d).map(|j| beta[j] * beta[j]).sum::<f64>()
        };
        for _ in 0..100 {
            let mut grad = DVector::zeros(d + 1);
            let mut hess = DMatrix::zeros(d + 1, d + 1);
            for (row, &yi) in x.iter().zip(y) {
                let eta: f64 =
                    row.iter().enumerate().map(|(j, v)| beta[j] * v).sum::<f64>() + beta[d];
                let p = 1.0 / (1.0 + (-eta).exp());
                let r = p - yi as f64;
                let v = p * (1.0 - p);
                for j in 0..d {
                    grad[j] += row[j] * r / nf;
                    for k in 0..d {
                        hess[(j, k)] += v * row[j] * row[k] / nf;
                    }
                    hess[(j, d)] += v * row[j] / nf;
                    hess[(d, j)] += v * row[j] / nf;
                }
                grad[d] += r / nf;
                hess[(d, d)] += v / nf;
            }
            for j in 0..d {
                grad[j] += lambda * beta[j];
                hess[(j, j)] += lambda;
            }
            let step = hess.lu().solve(&grad).expect("hessian is positive definite");
            let before = obj(&beta);
            let mut t = 1.0;
            let mut candidate = &beta - &step * t;
            // Damping: halve until the objective decreases.
            while obj(&candidate) > before && t > 1e-10 {
                t *= 0.5;
                candidate = &beta - &step * t;
            }
            let moved = (&candidate - &beta).amax();
            beta = candidate;
            if moved < 1e-12 {
                break;
            }
        }
        ((0..d).map(|j| beta[j]).collect(), beta[d])
    }

    fn random_problem(n: usize, d: usize, seed_label: &str) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = stream(99, seed_label);
        let w_true: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let x: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| standard_normal(&mut rng)).collect()).collect();
        let y: Vec<u8> = x
            .iter()
            .map(|row| {
                let eta: f64 = row.iter().zip(&w_true).map(|(a, b)| a * b).sum();
                u8::from(rng.gen::<f64>() < sigmoid(eta))
            })
            .collect();
        (x, y)
    }

    #[test]
    fn full_shrinkage_leaves_intercept_only() {
        let (x, y) = random_problem(60, 4, "shrink");
        let model = fit_elastic_net_fixed(&x, &y, 0.5, 1e6, None).unwrap();
        assert!(model.weights.iter().all(|&w| w == 0.0), "{:?}", model.weights);
        let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        assert!((model.intercept - logit(ybar)).abs() < 1e-6);
    }

    #[test]
    fn separable_1d_reaches_perfect_training_auc() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![0, 0, 0, 1, 1, 1];
        let model = fit_elastic_net_fixed(&x, &y, 0.5, 1e-4, None).unwrap();
        let p = predict_linear(&model, &x).unwrap();
        assert_eq!(auc(&p, &y).unwrap(), 1.0);
        assert!(model.weights[0] > 0.0);
    }

    #[test]
    fn ridge_matches_newton_oracle() {
        let (x, y) = random_problem(20, 3, "oracle");
        let lambda = 0.05;
        let model = fit_elastic_net_fixed(&x, &y, 0.0, lambda, None).unwrap();
        let (w_star, b_star) = newton_ridge_oracle(&x, &y, lambda);
        for (a, b) in model.weights.iter().zip(&w_star) {
            assert!((a - b).abs() < 1e-4, "cd {a} vs newton {b}");
        }
        assert!((model.intercept - b_star).abs() < 1e-4);
    }

    #[test]
    fn lasso_is_zero_at_lambda_max() {
        let (x, y) = random_problem(80, 5, "lmax");
        let lmax = lambda_max_l1(&x, &y).unwrap();
        let model = fit_elastic_net_fixed(&x, &y, 1.0, lmax, None).unwrap();
        assert!(model.weights.iter().all(|&w| w == 0.0), "{:?}", model.weights);
        // Just below lambda_max at least one weight activates.
        let model = fit_elastic_net_fixed(&x, &y, 1.0, lmax * 0.9, None).unwrap();
        assert!(model.weights.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn kkt_holds_at_convergence() {
        let (x, y) = random_problem(40, 5, "kkt");
        for &(a, l) in &[(0.5, 0.01), (1.0, 0.02), (0.0, 0.05), (0.75, 0.001)] {
            let model = fit_elastic_net_fixed(&x, &y, a, l, None).unwrap();
            let viol = kkt_violation(&model, &x, &y).unwrap();
            assert!(viol < 1e-6, "alpha {a} lambda {l}: violation {viol}");
        }
    }

    #[test]
    fn objective_never_increases_across_outer_iterations() {
        let (x, y) = random_problem(50, 4, "trace");
        let cols = to_columns(&x);
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let mut history = Vec::new();
        fit_core(&cols, &yf, 0.5, 0.01, None, |obj| history.push(obj));
        assert!(history.len() >= 2);
        for pair in history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "objective rose: {pair:?}");
        }
    }

    #[test]
    fn predict_sigmoid_arithmetic() {
        let model =
            ElasticNetModel { weights: vec![0.0, 0.0], intercept: 0.0, l1_ratio: 0.5, lambda: 0.1 };
        let p = predict_linear(&model, &[vec![3.0, -2.0]]).unwrap();
        assert_eq!(p[0], 0.5);
        let model = ElasticNetModel { intercept: 10.0, ..model };
        let p = predict_linear(&model, &[vec![0.0, 0.0]]).unwrap();
        assert!((p[0] - 0.9999546).abs() < 1e-5);
        assert!(predict_linear(&model, &[vec![1.0]]).is_err());
    }

    #[test]
    fn positive_weight_is_monotone() {
        let model =
            ElasticNetModel { weights: vec![0.8], intercept: -0.3, l1_ratio: 0.5, lambda: 0.1 };
        let mut last = 0.0;
        for i in 0..20 {
            let p = predict_linear(&model, &[vec![i as f64 * 0.5]]).unwrap()[0];
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn search_chooses_max_mean_auc() {
        let (x, y) = random_problem(120, 4, "search");
        let search = ElasticNetSearch {
            l1_grid: vec![0.0, 1.0],
            n_lambda: 5,
            lambda_decades: 2.0,
            folds: 4,
        };
        let (model, report) = train_elastic_net(&x, &y, &search, 5).unwrap();
        assert_eq!(report.candidates.len(), 10);
        let best = report
            .candidates
            .iter()
            .map(|c| c.mean_auc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.chosen_candidate().mean_auc, best);
        assert_eq!(model.l1_ratio, report.chosen_candidate().params["l1_ratio"]);
        assert_eq!(model.lambda, report.chosen_candidate().params["lambda"]);
    }

    #[test]
    fn search_is_deterministic() {
        let (x, y) = random_problem(80, 3, "det");
        let search = ElasticNetSearch {
            l1_grid: vec![0.5],
            n_lambda: 4,
            lambda_decades: 2.0,
            folds: 4,
        };
        let (m1, r1) = train_elastic_net(&x, &y, &search, 9).unwrap();
        let (m2, r2) = train_elastic_net(&x, &y, &search, 9).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(fit_elastic_net_fixed(&x, &[1, 1], 0.5, 0.1, None).is_err());
        assert!(fit_elastic_net_fixed(&x, &[0, 1], 1.5, 0.1, None).is_err());
        assert!(fit_elastic_net_fixed(&x, &[0, 1], 0.5, -0.1, None).is_err());
        let bad = vec![vec![f64::NAN], vec![2.0]];
        assert!(fit_elastic_net_fixed(&bad, &[0, 1], 0.5, 0.1, None).is_err());
    }
}
