//! Quantum Fisher information matrix of pure states, its 1-RDM functional,
//! the coupling-derivative route to it, and the entanglement-depth witness.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::{apply_angular, general_coupling, Axis, CouplingKey, CouplingSet, HermitianOperator, StateVector};
use crate::rdm::{gamma_from_state, OneBodyRDM};
use crate::search::{closed_form_n2, constrained_search, SearchOptions, SearchResult, StrategyChoice};

/// Symmetric 3x3 matrix `M_ab` indexed by [`Axis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfimMatrix {
    n_particles: usize,
    entries: Matrix3<f64>,
}

impl QfimMatrix {
    pub fn new(n_particles: usize, entries: Matrix3<f64>) -> Result<Self> {
        let m = Self { n_particles, entries };
        m.check()?;
        Ok(m)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn entries(&self) -> &Matrix3<f64> {
        &self.entries
    }

    pub fn get(&self, a: Axis, b: Axis) -> f64 {
        self.entries[(a.index(), b.index())]
    }

    pub fn xx(&self) -> f64 {
        self.get(Axis::X, Axis::X)
    }

    pub fn yy(&self) -> f64 {
        self.get(Axis::Y, Axis::Y)
    }

    pub fn zz(&self) -> f64 {
        self.get(Axis::Z, Axis::Z)
    }

    pub fn xz(&self) -> f64 {
        self.get(Axis::X, Axis::Z)
    }

    /// `n^T M n`.
    pub fn quadratic_form(&self, n: [f64; 3]) -> f64 {
        let v = nalgebra::Vector3::from(n);
        v.dot(&(self.entries * v))
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        (self.entries - other.entries).amax()
    }

    /// Symmetric, positive semidefinite, diagonal bounded by `N^2`.
    pub fn check(&self) -> Result<()> {
        let asym = (self.entries - self.entries.transpose()).amax();
        if asym > 1e-12 * self.entries.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("QFIM not symmetric (deviation {asym:e})")));
        }
        let sym = (self.entries + self.entries.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eig < -1e-10 * self.entries.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("QFIM not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        let n2 = (self.n_particles * self.n_particles) as f64;
        if let Some(d) = (0..3).map(|i| self.entries[(i, i)]).find(|&d| d > n2 + 1e-9 * n2.max(1.0)) {
            return Err(Error::InvalidArgument(format!("QFIM diagonal {d} exceeds N^2 = {n2}")));
        }
        Ok(())
    }
}

/// `M_ab = 2<{J_a, J_b}> - 4 <J_a><J_b>` for a pure state.
pub fn qfim_from_state(state: &StateVector) -> QfimMatrix {
    let basis = state.basis();
    let j: Vec<_> = Axis::ALL.iter().map(|&a| apply_angular(state, a)).collect();
    let g = gamma_from_state(state).gamma();
    let mut m = Matrix3::zeros();
    for a in 0..3 {
        for b in a..3 {
            // <{J_a, J_b}> = 2 Re <J_a psi | J_b psi>
            let v = 4.0 * j[a].dotc(&j[b]).re - 4.0 * g[a] * g[b];
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    QfimMatrix { n_particles: basis.n_particles(), entries: m }
}

/// QFIM of the constrained-search minimizer at `target`.
pub fn qfim_functional(target: &OneBodyRDM, w: &HermitianOperator, opts: &SearchOptions, choice: StrategyChoice) -> Result<(QfimMatrix, SearchResult)> {
    let res = constrained_search(target, w, opts, choice)?;
    if !res.converged {
        return Err(Error::NotConverged(res.constraint_residual));
    }
    Ok((qfim_from_state(&res.minimizer), res))
}

/// Two-particle on-site QFIM from the closed-form minimizer
/// `alpha0 |2,0> + beta |1,1> + alpha2 |0,2>`. `direction` as in
/// [`closed_form_n2`].
pub fn closed_form_qfim_n2(gamma_x: f64, gamma_z: f64, sign_u: f64, direction: Option<f64>) -> Result<QfimMatrix> {
    let res = closed_form_n2(gamma_x, gamma_z, sign_u, direction)?;
    let a = res.minimizer.amplitudes();
    let (alpha2, beta, alpha0) = (a[0].re, a[1].re, a[2].re);
    let b2 = beta * beta;
    let mut m = Matrix3::zeros();
    m[(2, 2)] = 4.0 * (1.0 - b2) - 4.0 * gamma_z * gamma_z;
    m[(1, 1)] = 2.0 * (1.0 + b2) - 4.0 * alpha0 * alpha2;
    m[(0, 0)] = 2.0 * (1.0 + b2) + 4.0 * alpha0 * alpha2 - 4.0 * gamma_x * gamma_x;
    let xz = 2.0 * std::f64::consts::SQRT_2 * beta * (alpha0 - alpha2) - 4.0 * gamma_x * gamma_z;
    m[(0, 2)] = xz;
    m[(2, 0)] = xz;
    Ok(QfimMatrix { n_particles: 2, entries: m })
}

/// `M_zz = 2F/u - 4 gamma_z^2 - N^2 + 2N` for `W = u sum_j n_j(n_j - 1)`.
pub fn mzz_single_coupling(target: &OneBodyRDM, f_value: f64, u: f64) -> Result<f64> {
    if u == 0.0 || !u.is_finite() {
        return Err(Error::InvalidArgument("single-coupling relation needs a finite u != 0".into()));
    }
    let n = target.n_particles() as f64;
    let gz = target.gamma_z();
    Ok(2.0 * f_value / u - 4.0 * gz * gz - n * n + 2.0 * n)
}

/// The same relation with prefactor 4 on `F/u`; kept to document the
/// discrepancy (it overshoots by exactly `2F/u`).
pub fn mzz_single_coupling_prefactor4(target: &OneBodyRDM, f_value: f64, u: f64) -> Result<f64> {
    Ok(mzz_single_coupling(target, f_value, u)? + 2.0 * f_value / u)
}

/// Default central-difference step for a coupling of strength `u`.
pub fn default_fd_step(u: f64) -> f64 {
    1e-4 * u.abs().max(1.0)
}

/// Central-difference derivative of `F[gamma; u]` in one coupling at fixed
/// `gamma`, at steps `h` and `h/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingDerivative {
    pub coarse: f64,
    pub fine: f64,
    /// Richardson extrapolation `(4 fine - coarse) / 3`.
    pub value: f64,
    pub step: f64,
}

/// Relative mismatch between the `h` and `h/2` estimates above which the
/// derivative is declared noise dominated.
pub const RICHARDSON_GATE: f64 = 1e-5;

pub fn coupling_derivative(
    target: &OneBodyRDM,
    couplings: &CouplingSet,
    key: CouplingKey,
    fd_step: Option<f64>,
    opts: &SearchOptions,
    choice: StrategyChoice,
) -> Result<CouplingDerivative> {
    let u0 = couplings.value(key);
    let h = fd_step.unwrap_or_else(|| default_fd_step(u0));
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let basis = crate::fock::build_basis(target.n_particles());
    let f_at = |u: f64| -> Result<f64> {
        let w = general_coupling(basis, &couplings.with_value(key, u));
        let res = constrained_search(target, &w, opts, choice)?;
        if !res.converged {
            return Err(Error::NotConverged(res.constraint_residual));
        }
        Ok(res.f_value)
    };
    let central = |h: f64| -> Result<f64> { Ok((f_at(u0 + h)? - f_at(u0 - h)?) / (2.0 * h)) };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    let mismatch = (coarse - fine).abs();
    if mismatch > RICHARDSON_GATE * fine.abs().max(1.0) {
        return Err(Error::NoisyDerivative(mismatch));
    }
    Ok(CouplingDerivative { coarse, fine, value: (4.0 * fine - coarse) / 3.0, step: h })
}

/// QFIM entry generated from the coupling derivative:
/// `M_ab = 4 [dF/du_ab / m - gamma_a gamma_b]` with `m = 2` for `a != b`
/// (the pair enters `W` as `u {J_a, J_b}`) and `m = 1` on the diagonal
/// (`u J_a^2`). The on-site key yields `M_zz`.
pub fn generate_via_coupling_derivative(
    target: &OneBodyRDM,
    couplings: &CouplingSet,
    key: CouplingKey,
    fd_step: Option<f64>,
    opts: &SearchOptions,
    choice: StrategyChoice,
) -> Result<f64> {
    let d = coupling_derivative(target, couplings, key, fd_step, opts, choice)?;
    Ok(qfim_entry_from_derivative(target, key, d.value))
}

/// Converts `dF/du` for `key` into the matching QFIM entry.
pub fn qfim_entry_from_derivative(target: &OneBodyRDM, key: CouplingKey, derivative: f64) -> f64 {
    match key {
        CouplingKey::Pair(a, b) => {
            let m = if a == b { 1.0 } else { 2.0 };
            4.0 * (derivative / m - target.component(a) * target.component(b))
        }
        CouplingKey::OnSite => {
            // sum n_j(n_j - 1) = 2 J_z^2 + N^2/2 - N
            let n = target.n_particles() as f64;
            let gz = target.gamma_z();
            2.0 * (derivative - n * n / 2.0 + n) - 4.0 * gz * gz
        }
    }
}

/// `F = sum u_ab <{J_a, J_b}>/c` rebuilt from the QFIM and `gamma`, using
/// `<J_a J_b + J_b J_a>/2 = M_ab/4 + gamma_a gamma_b`.
pub fn reconstruct_f(target: &OneBodyRDM, qfim: &QfimMatrix, couplings: &CouplingSet) -> f64 {
    let sym = |a: Axis, b: Axis| qfim.get(a, b) / 4.0 + target.component(a) * target.component(b);
    let mut f = 0.0;
    for ((a, b), u) in couplings.pairs() {
        let weight = if a == b { 1.0 } else { 2.0 };
        f += u * weight * sym(a, b);
    }
    if let Some(u) = couplings.single_u() {
        let n = target.n_particles() as f64;
        f += u * (2.0 * sym(Axis::Z, Axis::Z) + n * n / 2.0 - n);
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessVerdict {
    pub direction: [f64; 3],
    pub qfi_value: f64,
    /// `m + 1` for the largest violated bound, 1 when nothing is certified.
    pub depth_lower_bound: usize,
    /// `s m^2 + (N - s m)^2` for the reported `m` (`m = 1` when nothing is certified).
    pub bound_used: f64,
}

/// Relative slack a QFI value must clear before a bound counts as violated.
pub const WITNESS_MARGIN: f64 = 1e-10;

/// Bound on `n^T M n` for states with at most `m`-particle entanglement.
pub fn depth_bound(n_particles: usize, m: usize) -> f64 {
    let s = n_particles / m;
    let rest = n_particles - s * m;
    (s * m * m + rest * rest) as f64
}

pub fn witness_depth(qfim: &QfimMatrix, direction: [f64; 3], n_particles: usize) -> Result<WitnessVerdict> {
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("witness direction must be a nonzero finite vector".into()));
    }
    let n = direction.map(|v| v / norm);
    let q = qfim.quadratic_form(n);
    if n_particles == 0 {
        return Ok(WitnessVerdict { direction: n, qfi_value: q, depth_lower_bound: 1, bound_used: 0.0 });
    }
    // m = N bounds nothing (N^2 is the largest possible QFI). A relative
    // margin keeps rounding in q from certifying saturated bounds.
    let violated = |m: usize| {
        let b = depth_bound(n_particles, m);
        q > b + WITNESS_MARGIN * b.max(1.0)
    };
    let found = (1..n_particles).rev().find(|&m| violated(m));
    let (depth, bound) = match found {
        Some(m) => (m + 1, depth_bound(n_particles, m)),
        None => (1, depth_bound(n_particles, 1)),
    };
    Ok(WitnessVerdict { direction: n, qfi_value: q, depth_lower_bound: depth, bound_used: bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, expectation, onsite_interaction};
    use crate::search::coherent_state;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn noon2() -> StateVector {
        StateVector::from_real(build_basis(2), &[1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn state_examples() {
        let m = qfim_from_state(&noon2());
        assert_abs_diff_eq!(m.zz(), 4.0, epsilon = 1e-14);
        let m = qfim_from_state(&StateVector::fock(build_basis(2), 1));
        assert_abs_diff_eq!(m.zz(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.xx(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.yy(), 4.0, epsilon = 1e-14);
        let m = qfim_from_state(&coherent_state(build_basis(2), PI / 2.0, 0.0));
        assert_abs_diff_eq!(m.xx(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.yy(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.zz(), 2.0, epsilon = 1e-14);
        m.check().unwrap();
    }

    #[test]
    fn closed_form_examples() {
        let m = closed_form_qfim_n2(1.0, 0.0, 1.0, None).unwrap();
        assert_abs_diff_eq!(m.zz(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.xz(), 0.0, epsilon = 1e-14);
        let m = closed_form_qfim_n2(0.0, 1.0, 1.0, None).unwrap();
        assert_abs_diff_eq!(m.zz(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.xx(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.yy(), 2.0, epsilon = 1e-14);
        let m = closed_form_qfim_n2(0.0, 0.0, -1.0, Some(PI / 2.0)).unwrap();
        assert_abs_diff_eq!(m.zz(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_matches_state_qfim() {
        for &(x, z) in &[(0.3, 0.4), (-0.6, 0.2), (0.1, -0.9), (0.7, 0.0), (0.0, 0.5)] {
            for s in [1.0, -1.0] {
                let m = closed_form_qfim_n2(x, z, s, None).unwrap();
                let r = closed_form_n2(x, z, s, None).unwrap();
                let oracle = qfim_from_state(&r.minimizer);
                assert!(m.max_abs_difference(&oracle) < 1e-12, "({x},{z}) {s}");
                assert_eq!(m.get(Axis::X, Axis::Y), 0.0);
                assert_eq!(m.get(Axis::Y, Axis::Z), 0.0);
            }
        }
    }

    #[test]
    fn single_coupling_examples() {
        let t = OneBodyRDM::in_plane(2, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(mzz_single_coupling(&t, 1.0, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        let t = OneBodyRDM::in_plane(2, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(mzz_single_coupling(&t, 2.0, 1.0).unwrap(), 0.0, epsilon = 1e-14);
        let t = OneBodyRDM::in_plane(2, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(mzz_single_coupling(&t, -2.0, -1.0).unwrap(), 4.0, epsilon = 1e-14);
        assert!(mzz_single_coupling(&t, 1.0, 0.0).is_err());
    }

    #[test]
    fn prefactor4_form_is_off_by_2f_over_u() {
        let t = OneBodyRDM::in_plane(2, 0.6, 0.2).unwrap();
        let r = closed_form_n2(0.6, 0.2, 1.0, None).unwrap();
        let good = mzz_single_coupling(&t, r.f_value, 1.0).unwrap();
        let bad = mzz_single_coupling_prefactor4(&t, r.f_value, 1.0).unwrap();
        let oracle = qfim_from_state(&r.minimizer).zz();
        assert_abs_diff_eq!(good, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(bad - oracle, 2.0 * r.f_value, epsilon = 1e-12);
    }

    #[test]
    fn derivative_matches_closed_form() {
        let t = OneBodyRDM::in_plane(2, 0.6, 0.2).unwrap();
        let est = generate_via_coupling_derivative(&t, &CouplingSet::onsite(1.0), CouplingKey::OnSite, None, &SearchOptions::default(), StrategyChoice::Direct).unwrap();
        let want = closed_form_qfim_n2(0.6, 0.2, 1.0, None).unwrap().zz();
        assert_abs_diff_eq!(est, want, epsilon = 1e-4);
    }

    #[test]
    fn tiny_step_is_flagged() {
        let t = OneBodyRDM::in_plane(3, 0.4, 0.3).unwrap();
        let r = coupling_derivative(&t, &CouplingSet::onsite(1.0), CouplingKey::OnSite, Some(1e-13), &SearchOptions::default(), StrategyChoice::Direct);
        assert!(matches!(r, Err(Error::NoisyDerivative(_))), "{r:?}");
    }

    #[test]
    fn reconstruction_simple() {
        let t = OneBodyRDM::in_plane(2, 0.3, 0.4).unwrap();
        let r = closed_form_n2(0.3, 0.4, 1.0, None).unwrap();
        let m = qfim_from_state(&r.minimizer);
        assert_abs_diff_eq!(reconstruct_f(&t, &m, &CouplingSet::onsite(1.0)), r.f_value, epsilon = 1e-12);
        assert_eq!(reconstruct_f(&t, &m, &CouplingSet::new()), 0.0);
        let w = onsite_interaction(build_basis(2), 1.0);
        assert_abs_diff_eq!(expectation(&r.minimizer, &w).unwrap(), r.f_value, epsilon = 1e-12);
    }

    #[test]
    fn witness_examples() {
        let noon = qfim_from_state(&noon2());
        let v = witness_depth(&noon, [0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(v.depth_lower_bound, 2);
        assert_eq!(v.bound_used, 2.0);
        let coherent = qfim_from_state(&coherent_state(build_basis(2), PI / 2.0, 0.0));
        assert_eq!(witness_depth(&coherent, [0.0, 0.0, 1.0], 2).unwrap().depth_lower_bound, 1);
        let big = QfimMatrix { n_particles: 1000, entries: Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, 0.0, 1500.0)) };
        assert_eq!(witness_depth(&big, [0.0, 0.0, 1.0], 1000).unwrap().depth_lower_bound, 2);
        assert!(witness_depth(&big, [0.0, 0.0, 0.0], 1000).is_err());
        // Values a rounding error above a bound certify nothing new.
        let near = QfimMatrix { n_particles: 2, entries: Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, 0.0, 4.0 + 1e-15)) };
        let v = witness_depth(&near, [0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!((v.depth_lower_bound, v.bound_used), (2, 2.0));
        let sql = QfimMatrix { n_particles: 6, entries: Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, 0.0, 6.0 * (1.0 + 1e-15))) };
        assert_eq!(witness_depth(&sql, [0.0, 0.0, 1.0], 6).unwrap().depth_lower_bound, 1);
    }

    #[test]
    fn depth_bounds() {
        assert_eq!(depth_bound(2, 1), 2.0);
        assert_eq!(depth_bound(2, 2), 4.0);
        assert_eq!(depth_bound(1000, 1), 1000.0);
        assert_eq!(depth_bound(10, 6), 52.0);
        assert_eq!(depth_bound(7, 7), 49.0);
    }
}
