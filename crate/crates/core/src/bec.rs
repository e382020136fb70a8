//! Expansions of `F` and `M_zz` near the condensation point
//! (`delta = N/2 - |gamma|` small), and their checks against the full
//! constrained search.
//!
//! Rotated modes, for a 1-RDM pointing along `(theta, phi)`:
//!
//! ```text
//! a_rho^dag   =  cos(theta/2) b_l^dag + e^{+i phi} sin(theta/2) b_r^dag
//! a_theta^dag = -e^{-i phi} sin(theta/2) b_l^dag + cos(theta/2) b_r^dag
//! ```
//!
//! With this phase `|N-n, n>_rho` has `gamma = ((N-2n)/2) (sin t cos p, sin t sin p, cos t)`.

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{build_basis, onsite_interaction, StateVector};
use crate::qfim::qfim_from_state;
use crate::rdm::{gamma_from_state, OneBodyRDM};
use crate::search::{numeric_search_dual, SearchOptions};

/// Rows are the rotated creation operators in terms of `(b_l^dag, b_r^dag)`:
/// row 0 is `a_rho^dag`, row 1 is `a_theta^dag`.
pub fn rotated_mode_matrix(theta: f64, phi: f64) -> Matrix2<Complex64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    Matrix2::new(Complex64::new(c, 0.0), e * s, -e.conj() * s, Complex64::new(c, 0.0))
}

/// Applies `sum_k coeff[k] b_k^dag` to an `m`-particle amplitude vector.
fn create(state: &DVector<Complex64>, coeff: [Complex64; 2]) -> DVector<Complex64> {
    let m = state.len() - 1;
    let mut out = DVector::from_fn(m + 2, |k, _| {
        let mut v = Complex64::new(0.0, 0.0);
        if k >= 1 {
            v += coeff[0] * (k as f64).sqrt() * state[k - 1];
        }
        if k <= m {
            v += coeff[1] * ((m + 1 - k) as f64).sqrt() * state[k];
        }
        v
    });
    // Positive rescaling keeps phases; the final state is normalized anyway.
    let n = out.norm();
    if n > 0.0 {
        out /= Complex64::new(n, 0.0);
    }
    out
}

/// `|N-n, n>_rho` in the site Fock basis.
pub fn rotated_fock_state(n_particles: usize, n_theta: usize, theta: f64, phi: f64) -> Result<StateVector> {
    if n_theta > n_particles {
        return Err(Error::InvalidArgument(format!("{n_theta} excitations exceed N = {n_particles}")));
    }
    let u = rotated_mode_matrix(theta, phi);
    let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
    for _ in 0..n_particles - n_theta {
        v = create(&v, [u[(0, 0)], u[(0, 1)]]);
    }
    for _ in 0..n_theta {
        v = create(&v, [u[(1, 0)], u[(1, 1)]]);
    }
    StateVector::normalized(build_basis(n_particles), v)
}

pub fn rotated_state_gamma(n_particles: usize, n_theta: usize, theta: f64, phi: f64) -> Result<OneBodyRDM> {
    Ok(gamma_from_state(&rotated_fock_state(n_particles, n_theta, theta, phi)?))
}

/// Two-amplitude condensate ansatz `beta0 |N,0>_rho + sign beta1 |N-2,2>_rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedBecState {
    pub beta0: f64,
    pub beta1: f64,
    pub branch_sign: f64,
    /// `2 beta1^2`, the population of the `theta` mode.
    pub delta_rho: f64,
}

impl TruncatedBecState {
    pub fn new(delta_rho: f64, branch_sign: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&delta_rho) {
            return Err(Error::InvalidArgument(format!("delta_rho = {delta_rho} outside [0, 2]")));
        }
        if branch_sign != 1.0 && branch_sign != -1.0 {
            return Err(Error::InvalidArgument("branch sign must be +1 or -1".into()));
        }
        let beta1 = (delta_rho / 2.0).sqrt();
        let beta0 = (1.0 - delta_rho / 2.0).sqrt();
        Ok(Self { beta0, beta1, branch_sign, delta_rho })
    }

    pub fn to_state(&self, n_particles: usize, theta: f64, phi: f64) -> Result<StateVector> {
        if n_particles < 2 {
            return Err(Error::InvalidArgument("the ansatz needs N >= 2".into()));
        }
        let a = rotated_fock_state(n_particles, 0, theta, phi)?;
        let b = rotated_fock_state(n_particles, 2, theta, phi)?;
        let v = a.amplitudes() * Complex64::new(self.beta0, 0.0) + b.amplitudes() * Complex64::new(self.branch_sign * self.beta1, 0.0);
        StateVector::normalized(a.basis(), v)
    }
}

/// Coefficients of the expansions in `delta`:
/// `F = E0 - S sqrt(d) + E1 d + E32 d^{3/2}` and
/// `M_zz = M0 - M12 sqrt(d) + M1 d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BecExpansion {
    pub n_particles: usize,
    pub theta: f64,
    pub phi: f64,
    pub e0: f64,
    pub e1: f64,
    pub e32: f64,
    pub m0: f64,
    pub m12: f64,
    pub m1: f64,
}

impl BecExpansion {
    pub fn new(n_particles: usize, theta: f64, phi: f64) -> Self {
        let n = n_particles as f64;
        let s2 = theta.sin().powi(2);
        let root = (n * (n - 1.0)).max(0.0).sqrt();
        Self {
            n_particles,
            theta,
            phi,
            e0: n * (n - 1.0) * (1.0 - s2 / 2.0),
            e1: -2.0 * (n - 2.0) + 3.0 * (n - 2.0) * s2,
            e32: 0.25 * root * s2 * phi.cos(),
            m0: n * s2,
            m12: 2.0 * s2 * phi.cos() * root,
            m1: 8.0 + 2.0 * (n - 6.0) * s2,
        }
    }

    /// Coefficient of `-sqrt(delta)` in `F`.
    pub fn e12(&self) -> f64 {
        let n = self.n_particles as f64;
        self.theta.sin().powi(2) * self.phi.cos() * (n * (n - 1.0)).max(0.0).sqrt()
    }
}

/// `<n_l^2 + n_r^2>` on the truncated ansatz, no series truncation.
pub fn exact_ansatz_expectation(n_particles: usize, delta_rho: f64, theta: f64, phi: f64, branch_sign: f64) -> Result<f64> {
    TruncatedBecState::new(delta_rho, branch_sign)?;
    let n = n_particles as f64;
    let s2 = theta.sin().powi(2);
    let root = (n * (n - 1.0)).max(0.0).sqrt();
    Ok(n * n - 2.0 * (n - 2.0) * delta_rho - 0.5 * s2 * (n * (n - 1.0) - 6.0 * (n - 2.0) * delta_rho)
        + branch_sign * s2 * phi.cos() * root * (delta_rho * (1.0 - delta_rho / 2.0)).sqrt())
}

/// Lower of the two ansatz branches, as `F/u = <sum_j n_j(n_j - 1)>`.
pub fn truncated_functional(n_particles: usize, delta_rho: f64, theta: f64, phi: f64) -> Result<f64> {
    let plus = exact_ansatz_expectation(n_particles, delta_rho, theta, phi, 1.0)?;
    let minus = exact_ansatz_expectation(n_particles, delta_rho, theta, phi, -1.0)?;
    Ok(plus.min(minus) - n_particles as f64)
}

/// `F/u` to order `delta^{3/2}` on the branch that lowers the energy
/// (`|cos phi|` in the `sqrt(delta)` and `delta^{3/2}` terms).
pub fn f_expansion(n_particles: usize, delta_rho: f64, theta: f64, phi: f64) -> f64 {
    let c = BecExpansion::new(n_particles, theta, phi);
    let s = c.e12().abs();
    let d = delta_rho.max(0.0);
    c.e0 - s * d.sqrt() + c.e1 * d + c.e32.abs() * d.powf(1.5)
}

/// `M_zz = N sin^2 t - 2 sin^2 t cos p sqrt(N(N-1)) sqrt(d) + [8 + 2(N-6) sin^2 t] d`.
pub fn mzz_expansion(n_particles: usize, delta: f64, theta: f64, phi: f64) -> f64 {
    let c = BecExpansion::new(n_particles, theta, phi);
    let d = delta.max(0.0);
    c.m0 - c.m12 * d.sqrt() + c.m1 * d
}

/// Least-squares slope and intercept of `ln|y|` against `ln x`.
pub fn loglog_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && y.abs() > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp()).collect(),
    }
}

/// Log-log fit of `truncated_functional - f_expansion` against `delta`.
/// Residuals at or below `64 eps |F|` are cancellation noise and are left out;
/// returns the fit and the number of such points.
pub fn expansion_truncation_fit(n_particles: usize, theta: f64, phi: f64, delta_grid: &[f64]) -> Result<(Option<(f64, f64)>, usize)> {
    let mut usable = Vec::with_capacity(delta_grid.len());
    for &d in delta_grid {
        let exact = truncated_functional(n_particles, d, theta, phi)?;
        let residual = exact - f_expansion(n_particles, d, theta, phi);
        if residual.abs() > 64.0 * f64::EPSILON * exact.abs().max(1.0) {
            usable.push((d, residual));
        }
    }
    let hits = delta_grid.len() - usable.len();
    Ok((loglog_fit(&usable), hits))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPoint {
    pub delta_target: f64,
    /// Depletion of the state actually returned by the search.
    pub delta: f64,
    pub mzz_numeric: f64,
    pub mzz_expansion: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub n_particles: usize,
    pub theta: f64,
    pub phi: f64,
    pub points: Vec<ValidationPoint>,
    /// Log-log slope of `|residual|` against `delta`, over points above `floor`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub floor: f64,
    /// Points whose residual is at or below `floor` and were left out of the fit.
    pub floor_hits: usize,
}

/// Numeric `M_zz` (dual search with `u = 1`) against [`mzz_expansion`] over
/// `delta_grid`. The expansion is evaluated at the depletion of the returned
/// state, so the residual measures the series remainder only.
pub fn asymptotic_validation(n_particles: usize, theta: f64, phi: f64, delta_grid: &[f64], opts: &SearchOptions) -> Result<ScalingReport> {
    if n_particles < 2 {
        return Err(Error::InvalidArgument("asymptotic validation needs N >= 2".into()));
    }
    let w = onsite_interaction(build_basis(n_particles), 1.0);
    let radius = n_particles as f64 / 2.0;
    let floor = 64.0 * f64::EPSILON * (n_particles * n_particles) as f64;
    let points = crate::par::map_indexed(delta_grid, |_, &delta_target| -> Result<ValidationPoint> {
        let target = OneBodyRDM::from_spherical(n_particles, radius - delta_target, theta, phi)?;
        let res = numeric_search_dual(&target, &w, opts)?;
        let delta = gamma_from_state(&res.minimizer).depletion().max(0.0);
        let mzz_numeric = qfim_from_state(&res.minimizer).zz();
        let expansion = mzz_expansion(n_particles, delta, theta, phi);
        Ok(ValidationPoint { delta_target, delta, mzz_numeric, mzz_expansion: expansion, residual: mzz_numeric - expansion })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let usable: Vec<(f64, f64)> = points.iter().filter(|p| p.residual.abs() > floor).map(|p| (p.delta, p.residual)).collect();
    let floor_hits = points.len() - usable.len();
    let fit = loglog_fit(&usable);
    Ok(ScalingReport {
        n_particles,
        theta,
        phi,
        points,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        floor,
        floor_hits,
    })
}
