//! Dense math kernels used by the layers: row-major matrix products,
//! activations with their derivatives, and stable loss primitives.

/// C = A (n x k) * B (k x m), row-major.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        let c_row = &mut c[i * m..(i + 1) * m];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[kk * m..(kk + 1) * m];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    }
    c
}

/// C = A (n x k) * B^T where B is (m x k), row-major.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * m..(i + 1) * m];
        for (j, cv) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (av, bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *cv = acc;
        }
    }
    c
}

/// C += A^T * B where A is (k x n) and B is (k x m); C is (n x m).
pub(crate) fn matmul_tn_acc(c: &mut [f64], a: &[f64], b: &[f64], n: usize, k: usize, m: usize) {
    debug_assert_eq!(a.len(), k * n);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(c.len(), n * m);
    for kk in 0..k {
        let a_row = &a[kk * n..(kk + 1) * n];
        let b_row = &b[kk * m..(kk + 1) * m];
        for (i, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let c_row = &mut c[i * m..(i + 1) * m];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// y[i, :] += bias for every row.
pub(crate) fn add_bias(y: &mut [f64], bias: &[f64], rows: usize, cols: usize) {
    debug_assert_eq!(y.len(), rows * cols);
    debug_assert_eq!(bias.len(), cols);
    for r in 0..rows {
        for (yv, bv) in y[r * cols..(r + 1) * cols].iter_mut().zip(bias) {
            *yv += bv;
        }
    }
}

/// db += column sums of dy.
pub(crate) fn bias_grad_acc(db: &mut [f64], dy: &[f64], rows: usize, cols: usize) {
    debug_assert_eq!(dy.len(), rows * cols);
    debug_assert_eq!(db.len(), cols);
    for r in 0..rows {
        for (dv, gv) in db.iter_mut().zip(&dy[r * cols..(r + 1) * cols]) {
            *dv += gv;
        }
    }
}

pub(crate) fn relu_fwd(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Backward through relu given the pre-activation input.
pub(crate) fn relu_bwd(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter().zip(dy).map(|(&v, &d)| if v > 0.0 { d } else { 0.0 }).collect()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-form gaussian error linear unit.
pub(crate) fn gelu_fwd(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let u = GELU_C * (v + GELU_A * v * v * v);
            0.5 * v * (1.0 + u.tanh())
        })
        .collect()
}

pub(crate) fn gelu_bwd(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let u = GELU_C * (v + GELU_A * v * v * v);
            let t = u.tanh();
            let sech2 = 1.0 - t * t;
            let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
            d * (0.5 * (1.0 + t) + 0.5 * v * sech2 * du)
        })
        .collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy of one logit, stable for large |z|.
pub(crate) fn bce_from_logit(z: f64, label: u8) -> f64 {
    z.max(0.0) - z * f64::from(label) + (-z.abs()).exp().ln_1p()
}

/// Softmax in place over one row.
pub(crate) fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    use crate::seed::stream;

    fn random(rng: &mut impl Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    // Kernels are checked against nalgebra products on random shapes.
    #[test]
    fn matmul_variants_match_reference() {
        let mut rng = stream(11, "ops");
        for _ in 0..20 {
            let n = rng.gen_range(1..6);
            let k = rng.gen_range(1..6);
            let m = rng.gen_range(1..6);
            let a = random(&mut rng, n * k);
            let b = random(&mut rng, k * m);
            let bt = random(&mut rng, m * k);

            let reference = DMatrix::from_row_slice(n, k, &a) * DMatrix::from_row_slice(k, m, &b);
            let got = matmul(&a, &b, n, k, m);
            let reference_nt =
                DMatrix::from_row_slice(n, k, &a) * DMatrix::from_row_slice(m, k, &bt).transpose();
            let got_nt = matmul_nt(&a, &bt, n, k, m);
            let big = random(&mut rng, k * n);
            let reference_tn = DMatrix::from_row_slice(k, n, &big).transpose()
                * DMatrix::from_row_slice(k, m, &b);
            let mut got_tn = vec![0.0; n * m];
            matmul_tn_acc(&mut got_tn, &big, &b, n, k, m);

            for i in 0..n {
                for j in 0..m {
                    assert!((got[i * m + j] - reference[(i, j)]).abs() < 1e-12);
                    assert!((got_nt[i * m + j] - reference_nt[(i, j)]).abs() < 1e-12);
                    assert!((got_tn[i * m + j] - reference_tn[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tn_accumulates_instead_of_overwriting() {
        let mut c = vec![1.0, 1.0];
        matmul_tn_acc(&mut c, &[2.0], &[3.0, 4.0], 1, 1, 2);
        assert_eq!(c, vec![7.0, 9.0]);
    }

    #[test]
    fn bias_round_trip() {
        let mut y = vec![0.0; 6];
        add_bias(&mut y, &[1.0, 2.0, 3.0], 2, 3);
        assert_eq!(y, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let mut db = vec![0.0; 3];
        bias_grad_acc(&mut db, &y, 2, 3);
        assert_eq!(db, vec![2.0, 4.0, 6.0]);
    }

    // Central-difference oracle for the scalar activations.
    #[test]
    fn activation_derivatives_match_finite_differences() {
        let xs: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.3).collect();
        let eps = 1e-6;
        for &x in &xs {
            let num_gelu =
                (gelu_fwd(&[x + eps])[0] - gelu_fwd(&[x - eps])[0]) / (2.0 * eps);
            let ana_gelu = gelu_bwd(&[x], &[1.0])[0];
            assert!(
                (num_gelu - ana_gelu).abs() < 1e-8,
                "gelu'({x}): {ana_gelu} vs {num_gelu}"
            );
            if x.abs() > 1e-3 {
                let num_relu =
                    (relu_fwd(&[x + eps])[0] - relu_fwd(&[x - eps])[0]) / (2.0 * eps);
                assert!((num_relu - relu_bwd(&[x], &[1.0])[0]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bce_matches_naive_form_in_safe_range() {
        for z in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let p = sigmoid(z);
            assert!((bce_from_logit(z, 1) - (-p.ln())).abs() < 1e-12);
            assert!((bce_from_logit(z, 0) - (-(1.0 - p).ln())).abs() < 1e-12);
        }
        // Stability: huge logits stay finite and linear, never NaN.
        assert!(bce_from_logit(800.0, 0).is_finite());
        assert_eq!(bce_from_logit(800.0, 0), 800.0);
        assert!(bce_from_logit(-750.0, 1).is_finite());
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let mut row = vec![1.0, 2.0, 3.0, -1.0];
        softmax_row(&mut row);
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(row.windows(2).all(|w| w[0] < w[1] || w[1] < w[0]));
        // Extreme negative entries underflow to exactly zero.
        let mut masked = vec![0.3, -1e30, 0.7];
        softmax_row(&mut masked);
        assert_eq!(masked[1], 0.0);
        assert!((masked[0] + masked[2] - 1.0).abs() < 1e-12);
    }
}
