//! Lowest eigenpairs of symmetric tridiagonal matrices by Sturm-sequence
//! bisection and inverse iteration, with a dense fallback for general
//! Hermitian operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::fock::HermitianOperator;

/// Number of eigenvalues strictly below `lambda` (count of negative pivots
/// of the `LDL^T` factorization of `T - lambda I`).
pub fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let guard = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 0.0;
    for i in 0..n {
        q = if i == 0 { diag[0] - lambda } else { diag[i] - lambda - off[i - 1] * off[i - 1] / q };
        // A zero pivot is taken as a tiny negative one.
        if q.abs() < guard {
            q = -guard;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Bracket `[lo, hi]` of the `k`-th smallest eigenvalue (0-based), with
/// `sturm_count(lo) <= k < sturm_count(hi)`.
pub fn kth_eigenvalue_bracket(diag: &[f64], off: &[f64], k: usize) -> (f64, f64) {
    let (g_lo, g_hi) = gershgorin(diag, off);
    let scale = g_lo.abs().max(g_hi.abs()).max(f64::MIN_POSITIVE);
    let mut lo = g_lo - 1e-3 * scale - f64::MIN_POSITIVE;
    let mut hi = g_hi + 1e-3 * scale + f64::MIN_POSITIVE;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let (lo, hi) = kth_eigenvalue_bracket(diag, off, k);
    0.5 * (lo + hi)
}

/// Lowest eigenpair of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalEigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
    /// Second-smallest minus smallest eigenvalue (0 for a 1x1 matrix is
    /// reported as `f64::INFINITY`).
    pub gap: f64,
    pub residual: f64,
}

/// Smallest eigenvalue by bisection, eigenvector by inverse iteration with a
/// shift just below the spectrum (so `T - sigma I` is positive definite and
/// the `LDL^T` solve needs no pivoting).
pub fn smallest_eigenpair_tridiagonal(diag: &[f64], off: &[f64]) -> TridiagonalEigenpair {
    let n = diag.len();
    assert!(n > 0, "empty matrix");
    assert_eq!(off.len() + 1, n, "off-diagonal must have length n - 1");
    if n == 1 {
        return TridiagonalEigenpair {
            value: diag[0],
            vector: DVector::from_element(1, 1.0),
            gap: f64::INFINITY,
            residual: 0.0,
        };
    }
    let norm = tridiagonal_norm(diag, off);
    let (lo, hi) = kth_eigenvalue_bracket(diag, off, 0);
    let lambda = 0.5 * (lo + hi);
    let second = kth_eigenvalue(diag, off, 1);
    let gap = (second - lambda).max(0.0);

    // Shift strictly below lambda_min: count(sigma) == 0.
    let mut eta = 4.0 * f64::EPSILON * norm.max(f64::MIN_POSITIVE);
    let mut sigma = lo - eta;
    while sturm_count(diag, off, sigma) > 0 {
        eta *= 2.0;
        sigma = lo - eta;
    }

    let mut v = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * ((i * 7919) % 97) as f64 / 97.0);
    v /= v.norm();
    let mut value = lambda;
    let mut residual = f64::INFINITY;
    for _ in 0..60 {
        let mut w = solve_shifted(diag, off, sigma, &v);
        let wn = w.norm();
        if !wn.is_finite() || wn == 0.0 {
            break;
        }
        w /= wn;
        let prev = v;
        v = w;
        value = rayleigh(diag, off, &v);
        residual = tridiagonal_residual(diag, off, &v, value);
        let change = (1.0 - prev.dot(&v).abs()).abs();
        if residual <= 1e-13 * norm.max(1e-300) || (change < 1e-28 && residual <= 1e-11 * norm) {
            break;
        }
    }
    fix_sign(&mut v);
    TridiagonalEigenpair { value, vector: v, gap, residual }
}

fn tridiagonal_norm(diag: &[f64], off: &[f64]) -> f64 {
    let (lo, hi) = gershgorin(diag, off);
    lo.abs().max(hi.abs())
}

fn rayleigh(diag: &[f64], off: &[f64], v: &DVector<f64>) -> f64 {
    let tv = tridiagonal_apply(diag, off, v);
    v.dot(&tv) / v.dot(v)
}

pub fn tridiagonal_apply(diag: &[f64], off: &[f64], v: &DVector<f64>) -> DVector<f64> {
    let n = diag.len();
    DVector::from_fn(n, |i, _| {
        let mut s = diag[i] * v[i];
        if i > 0 {
            s += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            s += off[i] * v[i + 1];
        }
        s
    })
}

fn tridiagonal_residual(diag: &[f64], off: &[f64], v: &DVector<f64>, lambda: f64) -> f64 {
    (tridiagonal_apply(diag, off, v) - v * lambda).norm()
}

// LDL^T solve of (T - sigma I) x = b for positive definite T - sigma I.
fn solve_shifted(diag: &[f64], off: &[f64], sigma: f64, b: &DVector<f64>) -> DVector<f64> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0] - sigma;
    for i in 1..n {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - sigma - l[i - 1] * off[i - 1];
    }
    let mut y = b.clone();
    for i in 1..n {
        y[i] -= l[i - 1] * y[i - 1];
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        y[i] -= l[i] * y[i + 1];
    }
    y
}

// Largest-modulus-first convention would be unstable under degeneracy;
// use the first component above a small threshold.
fn fix_sign(v: &mut DVector<f64>) {
    let thresh = 1e-12 * v.amax();
    if let Some(&first) = v.iter().find(|x| x.abs() > thresh) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Lowest eigenpair of a Hermitian operator: tridiagonal path when the hint
/// is set, dense symmetric eigensolver on the real embedding otherwise.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: DVector<Complex64>,
    pub gap: f64,
}

pub fn lowest_eigenpair(op: &HermitianOperator) -> Eigenpair {
    if let Some((diag, off)) = op.tridiagonal() {
        let p = smallest_eigenpair_tridiagonal(&diag, &off);
        return Eigenpair {
            value: p.value,
            vector: p.vector.map(|x| Complex64::new(x, 0.0)),
            gap: p.gap,
        };
    }
    if op.is_real() {
        let (vals, vecs) = sorted_symmetric_eigen(op.real_part());
        let mut v = vecs.column(0).into_owned();
        fix_sign(&mut v);
        let gap = if vals.len() > 1 { vals[1] - vals[0] } else { f64::INFINITY };
        return Eigenpair { value: vals[0], vector: v.map(|x| Complex64::new(x, 0.0)), gap };
    }
    // Every eigenvalue of the real embedding appears twice.
    let d = op.basis().dim();
    let (vals, vecs) = sorted_symmetric_eigen(op.real_embedding());
    let col = vecs.column(0);
    let v = DVector::from_fn(d, |i, _| Complex64::new(col[i], col[i + d]));
    let gap = if vals.len() > 2 { vals[2] - vals[0] } else { f64::INFINITY };
    let norm = v.norm();
    Eigenpair { value: vals[0], vector: v / Complex64::new(norm, 0.0), gap }
}

/// Eigenvalues ascending with matching eigenvector columns.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Cyclic Jacobi rotations; independent dense oracle.
    fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn two_by_two() {
        let p = smallest_eigenpair_tridiagonal(&[0.0, 0.0], &[1.0]);
        assert_abs_diff_eq!(p.value, -1.0, epsilon = 1e-14);
        let r = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(p.vector[0].abs(), r, epsilon = 1e-12);
        assert_abs_diff_eq!(p.vector[1], -p.vector[0], epsilon = 1e-12);
        assert_abs_diff_eq!(p.gap, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn noninteracting_dimer() {
        let h = crate::fock::hamiltonian(crate::fock::build_basis(2), 1.0, 0.0);
        let p = lowest_eigenpair(&h);
        assert_abs_diff_eq!(p.value, -2.0, epsilon = 1e-13);
    }

    #[test]
    fn random_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dense = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i.abs_diff(j) == 1 {
                off[i.min(j)]
            } else {
                0.0
            }
        });
        let oracle = jacobi_eigenvalues(dense.clone());
        let p = smallest_eigenpair_tridiagonal(&diag, &off);
        assert_abs_diff_eq!(p.value, oracle[0], epsilon = 1e-9);
        assert_abs_diff_eq!(p.gap, oracle[1] - oracle[0], epsilon = 1e-9);
        let norm = dense.abs().row_sum().max();
        assert!((&dense * &p.vector - &p.vector * p.value).norm() <= 1e-10 * norm);
        for k in [3, 57, 199] {
            assert_abs_diff_eq!(kth_eigenvalue(&diag, &off, k), oracle[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_lowest_pair() {
        // diag(-2, 0, -2): span{e0, e2}
        let p = smallest_eigenpair_tridiagonal(&[-2.0, 0.0, -2.0], &[0.0, 0.0]);
        assert_abs_diff_eq!(p.value, -2.0, epsilon = 1e-14);
        assert!(p.gap.abs() < 1e-12);
        assert!(p.vector[1].abs() < 1e-12);
        assert!(p.residual < 1e-12);
    }

    #[test]
    fn large_scale_residual() {
        let n = 1000;
        let h = crate::fock::hamiltonian(crate::fock::build_basis(n), 1.0, 0.3);
        let (d, o) = h.tridiagonal().unwrap();
        let p = smallest_eigenpair_tridiagonal(&d, &o);
        let norm = tridiagonal_norm(&d, &o);
        assert!(p.residual <= 1e-10 * norm);
    }

    #[test]
    fn dense_path_agrees() {
        let b = crate::fock::build_basis(6);
        let h = crate::fock::hamiltonian(b, 0.8, 0.4);
        let t = lowest_eigenpair(&h);
        let w = crate::fock::general_coupling(b, &crate::fock::CouplingSet::onsite(0.4));
        let jx = crate::fock::angular(b, crate::fock::Axis::X).scaled(-1.6);
        let jy = crate::fock::angular(b, crate::fock::Axis::Y).scaled(1e-300);
        // Tiny imaginary part forces the complex embedding path.
        let complex = w.add(&jx).unwrap().add(&jy).unwrap();
        assert!(!complex.is_real());
        let c = lowest_eigenpair(&complex);
        assert_abs_diff_eq!(t.value, c.value, epsilon = 1e-10);
        let ov = t.vector.dotc(&c.vector).norm();
        assert_abs_diff_eq!(ov, 1.0, epsilon = 1e-10);
    }
}
