//! Latent semantic analysis: truncated SVD of the TF-IDF matrix.
//!
//! The right singular vectors come from a symmetric eigendecomposition of the
//! Gram matrix AᵀA, which is exact for our scale (vocabulary in the hundreds)
//! and keeps the heavy lifting in one well-tested dense routine.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tfidf::TfidfModel;

/// Truncated right-singular basis with variance bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsaComponents {
    /// k orthonormal rows of length d.
    pub components: Vec<Vec<f64>>,
    /// Singular values, non-increasing.
    pub singular_values: Vec<f64>,
    /// Fraction of total matrix variance carried by each kept component.
    pub explained: Vec<f64>,
    pub k: usize,
}

struct EigenBasis {
    eigen: nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    order: Vec<usize>,
    total: f64,
    rank_cap: usize,
}

fn eigen_basis(rows: &[Vec<f64>]) -> Result<EigenBasis> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::validation("lsa needs a non-empty matrix"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::validation("ragged matrix rows"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite matrix entry"));
    }
    let total: f64 = rows.iter().flatten().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::validation("all-zero matrix has no latent structure"));
    }
    let n = rows.len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let a = DMatrix::from_row_slice(n, d, &flat);
    let gram = a.transpose() * &a;
    let eigen = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eigen.eigenvalues[j].partial_cmp(&eigen.eigenvalues[i]).unwrap());
    Ok(EigenBasis { eigen, order, total, rank_cap: n.min(d) })
}

fn truncate_basis(basis: &EigenBasis, k: usize) -> LsaComponents {
    let mut components = Vec::with_capacity(k);
    let mut singular_values = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &i in basis.order.iter().take(k) {
        let col = basis.eigen.eigenvectors.column(i);
        let mut row: Vec<f64> = col.iter().copied().collect();
        // Sign canonicalization: the largest-magnitude coefficient is positive.
        let lead = (0..row.len())
            .max_by(|&p, &q| row[p].abs().partial_cmp(&row[q].abs()).unwrap())
            .unwrap();
        if row[lead] < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
        }
        components.push(row);
        let lambda = basis.eigen.eigenvalues[i].max(0.0);
        singular_values.push(lambda.sqrt());
        explained.push(lambda / basis.total);
    }
    LsaComponents { components, singular_values, explained, k }
}

/// Fit the truncated basis on a row-major matrix.
///
/// k is the smallest rank whose cumulative explained variance reaches
/// `variance_target`, capped at `k_max` (with a warning when the cap binds).
pub fn fit_lsa_matrix(
    rows: &[Vec<f64>],
    variance_target: f64,
    k_max: usize,
) -> Result<LsaComponents> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::config(format!(
            "variance_target {variance_target} outside (0,1]"
        )));
    }
    if k_max == 0 {
        return Err(Error::config("k_max must be positive"));
    }
    let basis = eigen_basis(rows)?;
    let k_cap = k_max.min(basis.rank_cap);
    let mut cumulative = 0.0;
    let mut k = 0;
    for &i in basis.order.iter().take(basis.rank_cap) {
        cumulative += basis.eigen.eigenvalues[i].max(0.0);
        k += 1;
        // Slack absorbs eigenvalue-sum vs trace rounding at target 1.0.
        if cumulative / basis.total >= variance_target - 1e-12 {
            break;
        }
    }
    if k > k_cap {
        log::warn!(
            "variance target {variance_target} needs {k} components; capping at {k_cap}"
        );
        k = k_cap;
    }
    Ok(truncate_basis(&basis, k))
}

/// Fit with an explicit component count instead of a variance target.
pub fn fit_lsa_matrix_fixed(rows: &[Vec<f64>], k: usize) -> Result<LsaComponents> {
    if k == 0 {
        return Err(Error::config("k must be positive"));
    }
    let basis = eigen_basis(rows)?;
    if k > basis.rank_cap {
        return Err(Error::config(format!(
            "k = {k} exceeds matrix rank bound {}",
            basis.rank_cap
        )));
    }
    Ok(truncate_basis(&basis, k))
}

impl LsaComponents {
    /// Project a d-vector onto the k-dimensional concept space.
    pub fn project(&self, doc_vector: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(doc_vector).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }
}

/// TF-IDF followed by the truncated basis: the full text-side feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsaModel {
    pub tfidf: TfidfModel,
    pub lsa: LsaComponents,
}

/// Fit LSA on the TF-IDF rows of the training documents.
pub fn fit_lsa(
    docs: &[Vec<String>],
    tfidf: TfidfModel,
    variance_target: f64,
    k_max: usize,
) -> Result<LsaModel> {
    let rows = tfidf.transform_all(docs);
    let lsa = fit_lsa_matrix(&rows, variance_target, k_max)?;
    Ok(LsaModel { tfidf, lsa })
}

/// Fit LSA with a caller-chosen component count.
pub fn fit_lsa_fixed(docs: &[Vec<String>], tfidf: TfidfModel, k: usize) -> Result<LsaModel> {
    let rows = tfidf.transform_all(docs);
    let lsa = fit_lsa_matrix_fixed(&rows, k)?;
    Ok(LsaModel { tfidf, lsa })
}

impl LsaModel {
    /// Concept vector for one tokenized document.
    pub fn project_doc(&self, tokens: &[String]) -> Vec<f64> {
        self.lsa.project(&self.tfidf.transform(tokens))
    }
}

impl crate::model_io::ModelKind for LsaModel {
    const KIND: &'static str = "lsa";
    fn dims(&self) -> Vec<usize> {
        vec![self.lsa.k, self.lsa.dim()]
    }
}
