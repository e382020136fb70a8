//! Constrained search `F[gamma; W] = min_{psi -> gamma} <psi|W|psi>`.
//!
//! Three routes:
//! * [`closed_form_n2`]: analytic minimizer for two particles with on-site `W`.
//! * [`numeric_search_direct`]: augmented-Lagrangian minimization on the unit
//!   sphere (Newton inner solves, multistart), finished by a Newton solve of
//!   the KKT system.
//! * [`numeric_search_dual`]: Legendre route; finds the one-body field `h`
//!   whose ground state of `W + h.J` has the target 1-RDM. Any such ground
//!   state is a global constrained minimizer.
//!
//! Targets on the Bloch sphere are fibres of a single spin-coherent state and
//! are answered directly by every route.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

use crate::eigen::{lowest_eigenpair, smallest_eigenpair_tridiagonal, sorted_symmetric_eigen};
use crate::error::{Error, Result};
use crate::fock::{angular, expectation, Axis, FockBasis, HermitianOperator, StateVector};
use crate::rdm::{gamma_from_state, OneBodyRDM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    ClosedForm,
    DualLegendre,
    DirectPenalty,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::ClosedForm => "closed_form",
            Strategy::DualLegendre => "dual_legendre",
            Strategy::DirectPenalty => "direct_penalty",
        }
    }
}

/// Which route [`constrained_search`] should take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StrategyChoice {
    /// Dual first, direct search where the dual has no solution.
    #[default]
    Auto,
    Dual,
    Direct,
    ClosedForm,
}

impl std::str::FromStr for StrategyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "dual" | "dual_legendre" => Ok(Self::Dual),
            "direct" | "direct_penalty" => Ok(Self::Direct),
            "closed" | "closed_form" => Ok(Self::ClosedForm),
            other => Err(Error::InvalidArgument(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub constraint_tolerance: f64,
    pub max_iterations: usize,
    pub multistart_count: usize,
    pub seed: u64,
    pub penalty_growth: f64,
    /// Approach angle `theta` used when the target is exactly the origin and
    /// the closed form is requested.
    pub origin_direction: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            constraint_tolerance: 1e-9,
            max_iterations: 10_000,
            multistart_count: 8,
            seed: 0x5eed,
            penalty_growth: 10.0,
            origin_direction: None,
        }
    }
}

impl SearchOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_direction(mut self, theta: f64) -> Self {
        self.origin_direction = Some(theta);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.constraint_tolerance > 0.0) || self.max_iterations == 0 || self.multistart_count == 0 || !(self.penalty_growth > 1.0) {
            return Err(Error::InvalidArgument("search options must be positive (penalty growth > 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub f_value: f64,
    pub minimizer: StateVector,
    /// `max_a |<J_a> - gamma_a|`.
    pub constraint_residual: f64,
    pub norm_residual: f64,
    pub iterations: usize,
    pub strategy: Strategy,
    pub converged: bool,
    /// Lagrange multipliers `h` of the constraints `<J_a> = gamma_a`, so
    /// that `grad_gamma F = -h`, when the route produces them.
    pub multipliers: Option<[f64; 3]>,
    /// Constraint residual after each accepted outer iteration (direct route).
    pub residual_history: Vec<f64>,
}

/// Spin-coherent state with all bosons in the mode
/// `cos(theta/2) b_l^dag + e^{i phi} sin(theta/2) b_r^dag`; its 1-RDM is
/// `(N/2)(sin t cos p, sin t sin p, cos t)`.
pub fn coherent_state(basis: FockBasis, theta: f64, phi: f64) -> StateVector {
    let n = basis.n_particles();
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let log_pow = |base: f64, exp: usize| if exp == 0 { 0.0 } else { exp as f64 * base.abs().ln() };
    let sign_pow = |base: f64, exp: usize| if base < 0.0 && exp % 2 == 1 { -1.0 } else { 1.0 };
    let amps = DVector::from_fn(n + 1, |k, _| {
        let l = k;
        let r = n - k;
        let log_mag = 0.5 * (ln_fact[n] - ln_fact[l] - ln_fact[r]) + log_pow(c, l) + log_pow(s, r);
        let mag = log_mag.exp() * sign_pow(c, l) * sign_pow(s, r);
        Complex64::from_polar(1.0, r as f64 * phi) * mag
    });
    StateVector::normalized(basis, amps).expect("coherent state has unit norm")
}

/// Two-particle on-site functional in closed form, per unit `|u|`.
///
/// `sign_u` is `+1` (repulsive) or `-1` (attractive). The minimizer is
/// `alpha0 |2,0> + beta |1,1> + alpha2 |0,2>` with
/// `beta^2 = (1 + sign_u sqrt(1 - rho^2)) sin^2(theta) / 2`.
/// `direction` is the approach angle `theta` used at the origin.
pub fn closed_form_n2(gamma_x: f64, gamma_z: f64, sign_u: f64, direction: Option<f64>) -> Result<SearchResult> {
    if sign_u != 1.0 && sign_u != -1.0 {
        return Err(Error::InvalidArgument(format!("sign_u must be +1 or -1, got {sign_u}")));
    }
    let target = OneBodyRDM::in_plane(2, gamma_x, gamma_z)?;
    let rho = target.gamma_rho().min(1.0);
    let theta = if rho == 0.0 {
        direction.ok_or(Error::DirectionRequired)?
    } else {
        gamma_x.atan2(gamma_z)
    };
    let (sin_t, cos_t) = theta.sin_cos();
    let root = (1.0 - rho * rho).max(0.0).sqrt();
    // alpha0 + alpha2 and alpha0 - alpha2, smooth through the axes.
    let sgn = if sin_t < 0.0 { -1.0 } else { 1.0 };
    let sum = sgn * (1.0 - sign_u * root).max(0.0).sqrt();
    let diff = sgn * cos_t * (1.0 + sign_u * root).max(0.0).sqrt();
    let beta = ((1.0 + sign_u * root) / 2.0).max(0.0).sqrt() * sin_t.abs();
    let alpha0 = 0.5 * (sum + diff);
    let alpha2 = 0.5 * (sum - diff);

    let basis = FockBasis::new(2);
    // Ascending index: |0,2>, |1,1>, |2,0>.
    let minimizer = StateVector::from_real(basis, &[alpha2, beta, alpha0])?.canonical();
    let f_value = sign_u * (2.0 - (1.0 + sign_u * root) * sin_t * sin_t);
    let reached = gamma_from_state(&minimizer);
    let residual = if rho == 0.0 { reached.gamma_rho() } else { reached.distance(&target) };
    let norm_residual = (minimizer.amplitudes().norm_squared() - 1.0).abs();
    Ok(SearchResult {
        f_value,
        minimizer,
        constraint_residual: residual,
        norm_residual,
        iterations: 0,
        strategy: Strategy::ClosedForm,
        converged: residual <= 1e-12 && norm_residual <= 1e-10,
        multipliers: None,
        residual_history: Vec::new(),
    })
}

/// On-site strength `u` when `w` is `u sum_j n_j(n_j - 1)` (up to rounding).
pub fn onsite_strength(w: &HermitianOperator) -> Option<f64> {
    let basis = w.basis();
    let n = basis.n_particles();
    if n < 2 {
        return None;
    }
    let u = w.entries()[(0, 0)].re / (n * (n - 1)) as f64;
    let reference = crate::fock::onsite_interaction(basis, u);
    let scale = w.norm_inf().max(1e-300);
    let dev = (w.entries() - reference.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (dev <= 1e-12 * scale).then_some(u)
}

fn commutes_with_jz(w: &HermitianOperator) -> bool {
    let d = w.basis().dim();
    (0..d).all(|i| (0..d).all(|j| i == j || w.entries()[(i, j)] == Complex64::new(0.0, 0.0)))
}

fn check_target(target: &OneBodyRDM, w: &HermitianOperator) -> Result<()> {
    if target.n_particles() != w.basis().n_particles() {
        return Err(Error::BasisMismatch { expected: w.basis().n_particles(), found: target.n_particles() });
    }
    Ok(())
}

/// Relative distance below which a target counts as on the Bloch sphere.
const SURFACE_TOLERANCE: f64 = 1e-12;

fn on_surface(target: &OneBodyRDM) -> bool {
    let r = target.radius();
    r > 0.0 && target.depletion() <= SURFACE_TOLERANCE * r
}

fn surface_result(target: &OneBodyRDM, w: &HermitianOperator, strategy: Strategy) -> SearchResult {
    let basis = w.basis();
    let state = coherent_state(basis, target.theta(), target.phi()).canonical();
    finish(state, target, w, strategy, 0, true, None, Vec::new())
}

fn trivial_result(target: &OneBodyRDM, w: &HermitianOperator, strategy: Strategy) -> SearchResult {
    let state = StateVector::fock(w.basis(), 0);
    finish(state, target, w, strategy, 0, true, None, Vec::new())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    state: StateVector,
    target: &OneBodyRDM,
    w: &HermitianOperator,
    strategy: Strategy,
    iterations: usize,
    solved: bool,
    multipliers: Option<[f64; 3]>,
    residual_history: Vec<f64>,
) -> SearchResult {
    let f_value = expectation(&state, w).expect("same basis");
    let reached = gamma_from_state(&state);
    let constraint_residual = reached.distance(target);
    let norm_residual = (state.amplitudes().norm_squared() - 1.0).abs();
    SearchResult {
        f_value,
        minimizer: state,
        constraint_residual,
        norm_residual,
        iterations,
        strategy,
        converged: solved && norm_residual <= 1e-10,
        multipliers,
        residual_history,
    }
}

fn rotate_about_z(state: &StateVector, phi: f64) -> StateVector {
    if phi == 0.0 {
        return state.clone();
    }
    let n = state.basis().n_particles() as f64;
    let amps = DVector::from_fn(state.basis().dim(), |k, _| {
        state.amplitudes()[k] * Complex64::from_polar(1.0, -phi * (2.0 * k as f64 - n) / 2.0)
    });
    StateVector::normalized(state.basis(), amps).expect("unitary rotation")
}

/// Dispatches to the requested route.
pub fn constrained_search(target: &OneBodyRDM, w: &HermitianOperator, opts: &SearchOptions, choice: StrategyChoice) -> Result<SearchResult> {
    check_target(target, w)?;
    match choice {
        StrategyChoice::Direct => numeric_search_direct(target, w, opts),
        StrategyChoice::Dual => numeric_search_dual(target, w, opts),
        StrategyChoice::ClosedForm => {
            let u = onsite_strength(w).filter(|_| w.basis().n_particles() == 2).ok_or_else(|| {
                Error::InvalidArgument("closed form needs N = 2 and an on-site interaction".into())
            })?;
            if u == 0.0 {
                return Err(Error::InvalidArgument("closed form needs u != 0".into()));
            }
            // Rotate into the gamma_y = 0 plane; the functional is azimuthally symmetric.
            let plane = target.rotated_to_plane();
            let mut res = closed_form_n2(plane.gamma_x(), plane.gamma_z(), u.signum(), opts.origin_direction)?;
            res.f_value *= u.abs();
            res.minimizer = rotate_about_z(&res.minimizer, target.phi());
            let reached = gamma_from_state(&res.minimizer);
            if target.gamma_rho() > 0.0 {
                res.constraint_residual = reached.distance(target);
            }
            Ok(res)
        }
        StrategyChoice::Auto => match numeric_search_dual(target, w, opts) {
            Ok(res) if res.converged => Ok(res),
            Ok(_) | Err(Error::NotVRepresentable) => numeric_search_direct(target, w, opts),
            Err(e) => Err(e),
        },
    }
}

// ---------------------------------------------------------------------------
// Direct route

/// Real quadratic program on the unit sphere:
/// minimize `x^T A0 x` subject to `x^T A_k x = t_k`.
struct QuadProblem {
    objective: DMatrix<f64>,
    constraints: Vec<(DMatrix<f64>, f64)>,
    /// Complex amplitudes embedded as `(Re, Im)`; the global phase is a gauge direction.
    complex: bool,
}

impl QuadProblem {
    fn dim(&self) -> usize {
        self.objective.nrows()
    }

    fn gauge_direction(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        if !self.complex {
            return None;
        }
        let d = self.dim() / 2;
        // i (a + ib) = -b + ia
        let g = DVector::from_fn(2 * d, |k, _| if k < d { -x[k + d] } else { x[k - d] });
        let n = g.norm();
        (n > 0.0).then(|| g / n)
    }

    fn residuals(&self, x: &DVector<f64>) -> Vec<f64> {
        self.constraints.iter().map(|(a, t)| x.dot(&(a * x)) - t).collect()
    }

    fn max_residual(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn objective_value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.objective * x))
    }

    fn augmented(&self, x: &DVector<f64>, lambda: &[f64], mu: f64) -> f64 {
        let g = self.residuals(x);
        self.objective_value(x) + g.iter().zip(lambda).map(|(gk, lk)| lk * gk + 0.5 * mu * gk * gk).sum::<f64>()
    }

    fn scale(&self) -> f64 {
        let n = |m: &DMatrix<f64>| m.abs().row_sum().max();
        let c = self.constraints.iter().map(|(a, _)| n(a)).fold(0.0, f64::max);
        n(&self.objective).max(c).max(1.0)
    }
}

struct LocalSolution {
    x: DVector<f64>,
    lambda: Vec<f64>,
    residual: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// Projects out the normal directions (`x` and, for complex amplitudes, `i x`).
fn tangent_project(v: &DVector<f64>, normals: &[DVector<f64>]) -> DVector<f64> {
    let mut out = v.clone();
    for n in normals {
        out -= n * n.dot(&out);
    }
    out
}

fn normals_at(problem: &QuadProblem, x: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut normals = vec![x.clone()];
    if let Some(g) = problem.gauge_direction(x) {
        normals.push(g);
    }
    normals
}

/// Newton-type minimization of the augmented Lagrangian over the sphere.
/// Negative curvature is handled by using `|eigenvalue|` (saddle-free step).
fn inner_minimize(problem: &QuadProblem, x0: &DVector<f64>, lambda: &[f64], mu: f64, max_steps: usize, scale: f64, inner_tol: f64) -> (DVector<f64>, usize) {
    let d = problem.dim();
    let mut x = x0.clone();
    let mut steps = 0;
    for _ in 0..max_steps {
        steps += 1;
        let g = problem.residuals(&x);
        let ax: Vec<DVector<f64>> = problem.constraints.iter().map(|(a, _)| a * &x).collect();
        let weights: Vec<f64> = lambda.iter().zip(&g).map(|(l, gk)| l + mu * gk).collect();
        let mut grad = &problem.objective * &x * 2.0;
        let mut hess = &problem.objective * 2.0;
        for ((a, _), (w, axk)) in problem.constraints.iter().zip(weights.iter().zip(&ax)) {
            grad += axk * (2.0 * w);
            hess += a * (2.0 * w);
            hess += (axk * axk.transpose()) * (4.0 * mu);
        }
        let normals = normals_at(problem, &x);
        let rgrad = tangent_project(&grad, &normals);
        let gnorm = rgrad.norm();
        if gnorm <= inner_tol.max(1e-13 * scale * (1.0 + mu)) {
            break;
        }
        let radial = x.dot(&grad);
        let mut rh = hess - DMatrix::identity(d, d) * radial;
        // P H P
        let mut p = DMatrix::identity(d, d);
        for n in &normals {
            p -= n * n.transpose();
        }
        rh = &p * rh * &p;
        let (vals, vecs) = sorted_symmetric_eigen(rh);
        let floor = 1e-10 * scale * (1.0 + mu);
        let mut step = DVector::zeros(d);
        for (k, &val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let normal_weight: f64 = normals.iter().map(|n| n.dot(&v).powi(2)).sum();
            if normal_weight > 0.5 {
                continue;
            }
            let coeff = v.dot(&rgrad) / val.abs().max(floor);
            step -= v * coeff;
        }
        let step = tangent_project(&step, &normals);
        // Trust region on the sphere: never move more than a quarter turn.
        let len = step.norm();
        let step = if len > 0.5 { step * (0.5 / len) } else { step };

        let current = problem.augmented(&x, lambda, mu);
        let slope = rgrad.dot(&step);
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &x + &step * alpha;
            let trial = &trial / trial.norm();
            let value = problem.augmented(&trial, lambda, mu);
            if value <= current + 1e-4 * alpha * slope.min(0.0) || (value <= current && alpha < 1e-6) {
                x = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            // Steepest descent fallback.
            let mut alpha = 1.0 / (gnorm.max(1e-300));
            let mut improved = false;
            for _ in 0..60 {
                let trial = &x - &rgrad * alpha;
                let trial = &trial / trial.norm();
                if problem.augmented(&trial, lambda, mu) < current {
                    x = trial;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
    }
    (x, steps)
}

/// Safeguarded augmented Lagrangian: an outer iterate is accepted only when
/// it does not increase the constraint residual, otherwise the penalty grows
/// and the previous iterate is kept.
fn augmented_lagrangian(problem: &QuadProblem, x0: DVector<f64>, opts: &SearchOptions, target: f64, budget: usize) -> LocalSolution {
    let scale = problem.scale();
    let k = problem.constraints.len();
    let mut x = &x0 / x0.norm();
    let mut lambda = vec![0.0; k];
    let mut mu = 10.0 / scale;
    let mut residual = problem.max_residual(&x);
    let mut history = vec![residual];
    let mut iterations = 0;
    while iterations < budget {
        // Inner accuracy tracks the current infeasibility.
        let inner_tol = 0.1 * residual * scale;
        let (candidate, steps) = inner_minimize(problem, &x, &lambda, mu, 60, scale, inner_tol);
        iterations += steps.max(1);
        let g = problem.residuals(&candidate);
        let r = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if r <= residual {
            let improved_enough = r <= 0.25 * residual;
            x = candidate;
            residual = r;
            history.push(r);
            for (l, gk) in lambda.iter_mut().zip(&g) {
                *l += mu * gk;
            }
            if !improved_enough {
                mu *= opts.penalty_growth;
            }
        } else {
            mu *= opts.penalty_growth;
        }
        if residual <= target || mu > 1e14 / scale {
            break;
        }
    }
    LocalSolution { x, lambda, residual, iterations, history }
}

/// Newton iterations on the KKT system
/// `(A0 + sum l_k A_k - nu I) x = 0`, `x^T A_k x = t_k`, `x^T x = 1`,
/// solved in the least-squares sense (the gauge direction is pinned).
fn kkt_polish(problem: &QuadProblem, sol: &LocalSolution) -> Option<(DVector<f64>, Vec<f64>)> {
    let d = problem.dim();
    let k = problem.constraints.len();
    let mut x = sol.x.clone();
    let mut lambda = sol.lambda.clone();
    let mut a_eff = problem.objective.clone();
    for ((a, _), l) in problem.constraints.iter().zip(&lambda) {
        a_eff += a * *l;
    }
    let mut nu = x.dot(&(&a_eff * &x));
    let gauge_ref = problem.gauge_direction(&x);
    let rows = d + k + 1 + usize::from(gauge_ref.is_some());
    let cols = d + k + 1;
    let scale = problem.scale();
    let system = |x: &DVector<f64>, lambda: &[f64], nu: f64| -> DVector<f64> {
        let mut a_eff = problem.objective.clone();
        for ((a, _), l) in problem.constraints.iter().zip(lambda) {
            a_eff += a * *l;
        }
        let mut f = DVector::zeros(rows);
        let stat = &a_eff * x - x * nu;
        f.rows_mut(0, d).copy_from(&stat);
        for (j, (a, t)) in problem.constraints.iter().enumerate() {
            f[d + j] = x.dot(&(a * x)) - t;
        }
        f[d + k] = x.dot(x) - 1.0;
        if let Some(g) = &gauge_ref {
            f[d + k + 1] = g.dot(x);
        }
        f
    };
    let mut f = system(&x, &lambda, nu);
    for _ in 0..30 {
        if f.amax() <= 1e-15 * scale {
            break;
        }
        let mut a_eff = problem.objective.clone();
        for ((a, _), l) in problem.constraints.iter().zip(&lambda) {
            a_eff += a * *l;
        }
        let mut jac = DMatrix::zeros(rows, cols);
        let block = a_eff - DMatrix::identity(d, d) * nu;
        jac.view_mut((0, 0), (d, d)).copy_from(&block);
        for (j, (a, _)) in problem.constraints.iter().enumerate() {
            let ax = a * &x;
            jac.view_mut((0, d + j), (d, 1)).copy_from(&ax);
            jac.view_mut((d + j, 0), (1, d)).copy_from(&(ax.transpose() * 2.0));
        }
        jac.view_mut((0, d + k), (d, 1)).copy_from(&(-&x));
        jac.view_mut((d + k, 0), (1, d)).copy_from(&(x.transpose() * 2.0));
        if let Some(g) = &gauge_ref {
            jac.view_mut((d + k + 1, 0), (1, d)).copy_from(&g.transpose());
        }
        let svd = SVD::new(jac, true, true);
        let eps = 1e-13 * svd.singular_values.max();
        let step = svd.solve(&(-&f), eps).ok()?;
        let new_x = &x + step.rows(0, d);
        let new_lambda: Vec<f64> = (0..k).map(|j| lambda[j] + step[d + j]).collect();
        let new_nu = nu + step[d + k];
        let new_f = system(&new_x, &new_lambda, new_nu);
        if !(new_f.amax() < f.amax()) {
            break;
        }
        x = new_x;
        lambda = new_lambda;
        nu = new_nu;
        f = new_f;
    }
    let x = &x / x.norm();
    Some((x, lambda))
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        // Box-Muller keeps the draw independent of rand_distr.
        let v = DVector::from_fn(d, |_, _| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        });
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Direct constrained minimization over the fibre `psi -> gamma`.
///
/// For interactions commuting with `J_z` the target is rotated into the
/// `gamma_y = 0` plane and real amplitudes are optimized; otherwise the full
/// complex amplitude vector is used.
pub fn numeric_search_direct(target: &OneBodyRDM, w: &HermitianOperator, opts: &SearchOptions) -> Result<SearchResult> {
    opts.validate()?;
    check_target(target, w)?;
    let basis = w.basis();
    if basis.n_particles() == 0 {
        return Ok(trivial_result(target, w, Strategy::DirectPenalty));
    }
    if on_surface(target) {
        return Ok(surface_result(target, w, Strategy::DirectPenalty));
    }
    let symmetric = commutes_with_jz(w);
    let (problem, phi, solve_target) = if symmetric {
        let plane = target.rotated_to_plane();
        let problem = QuadProblem {
            objective: w.real_part(),
            constraints: vec![
                (angular(basis, Axis::X).real_part(), plane.gamma_x()),
                (angular(basis, Axis::Z).real_part(), plane.gamma_z()),
            ],
            complex: false,
        };
        (problem, target.phi(), plane)
    } else {
        let problem = QuadProblem {
            objective: w.real_embedding(),
            constraints: Axis::ALL.iter().map(|&a| (angular(basis, a).real_embedding(), target.component(a))).collect(),
            complex: true,
        };
        (problem, 0.0, *target)
    };
    let d = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<DVector<f64>> = Vec::new();
    {
        // Coherent state along the target direction.
        let c = coherent_state(basis, solve_target.theta(), solve_target.phi());
        let v = if problem.complex {
            DVector::from_fn(d, |k, _| if k < d / 2 { c.amplitudes()[k].re } else { c.amplitudes()[k - d / 2].im })
        } else {
            c.amplitudes().map(|z| z.re)
        };
        starts.push(v);
    }
    for _ in 0..opts.multistart_count {
        starts.push(random_unit(&mut rng, d));
    }

    let budget = (opts.max_iterations / starts.len()).max(50);
    let mut best: Option<(f64, LocalSolution)> = None;
    let mut fallback: Option<LocalSolution> = None;
    let mut total_iterations = 0;
    let tol = opts.constraint_tolerance;
    // The penalty loop only needs to reach the basin of the KKT Newton solve;
    // it is resumed to full accuracy when the polish fails.
    let coarse = (1e-6 * basis.radius().max(1.0)).max(tol);
    let polish = |sol: &mut LocalSolution| {
        if let Some((x, lambda)) = kkt_polish(&problem, sol) {
            let r = problem.max_residual(&x);
            if r <= sol.residual.max(tol) {
                sol.x = x;
                sol.lambda = lambda;
                sol.residual = r;
                if sol.history.last().is_none_or(|&h| r <= h) {
                    sol.history.push(r);
                }
            }
        }
    };
    for start in starts {
        let mut sol = augmented_lagrangian(&problem, start, opts, coarse, budget);
        total_iterations += sol.iterations;
        polish(&mut sol);
        if sol.residual > tol {
            let resumed = augmented_lagrangian(&problem, sol.x.clone(), opts, 0.1 * tol, budget);
            total_iterations += resumed.iterations;
            let mut history = std::mem::take(&mut sol.history);
            let last = history.last().copied().unwrap_or(f64::INFINITY);
            history.extend(resumed.history.iter().copied().filter(|&r| r <= last));
            sol = LocalSolution { history, ..resumed };
            polish(&mut sol);
        }
        if sol.residual <= tol {
            let value = problem.objective_value(&sol.x);
            let better = match &best {
                None => true,
                Some((bv, _)) => value < bv - 1e-12 * problem.scale(),
            };
            if better {
                best = Some((value, sol));
            }
        } else if fallback.as_ref().is_none_or(|f| sol.residual < f.residual) {
            fallback = Some(sol);
        }
    }

    let (sol, solved) = match best {
        Some((_, sol)) => (sol, true),
        None => (fallback.expect("at least one start"), false),
    };
    let amps = if problem.complex {
        let h = d / 2;
        DVector::from_fn(h, |k, _| Complex64::new(sol.x[k], sol.x[k + h]))
    } else {
        sol.x.map(|v| Complex64::new(v, 0.0))
    };
    let state = StateVector::normalized(basis, amps)?;
    let state = rotate_about_z(&state.canonical(), phi).canonical();
    let multipliers = if symmetric {
        let (s, c) = phi.sin_cos();
        Some([sol.lambda[0] * c, sol.lambda[0] * s, sol.lambda[1]])
    } else {
        Some([sol.lambda[0], sol.lambda[1], sol.lambda[2]])
    };
    let mut res = finish(state, target, w, Strategy::DirectPenalty, total_iterations, solved, multipliers, sol.history);
    res.converged = solved && res.constraint_residual <= tol && res.norm_residual <= 1e-10;
    Ok(res)
}

// ---------------------------------------------------------------------------
// Dual route

struct GroundProbe {
    energy: f64,
    gamma: [f64; 3],
    state: StateVector,
    gap: f64,
    norm: f64,
}

fn probe(w: &HermitianOperator, j: &[HermitianOperator; 3], h: [f64; 3], active: &[usize], tri: Option<&(Vec<f64>, Vec<f64>)>) -> GroundProbe {
    let basis = w.basis();
    if let (Some((wd, wo)), false) = (tri, active.contains(&1)) {
        // W + h_x J_x + h_z J_z stays real tridiagonal.
        let n = basis.n_particles();
        let diag: Vec<f64> = wd.iter().enumerate().map(|(k, d)| d + h[2] * (2.0 * k as f64 - n as f64) / 2.0).collect();
        let off: Vec<f64> = wo.iter().enumerate().map(|(k, o)| o + h[0] * (((k + 1) * (n - k)) as f64).sqrt() / 2.0).collect();
        let pair = smallest_eigenpair_tridiagonal(&diag, &off);
        let norm = (0..diag.len())
            .map(|k| diag[k].abs() + if k > 0 { off[k - 1].abs() } else { 0.0 } + off.get(k).map_or(0.0, |o| o.abs()))
            .fold(0.0, f64::max);
        let state = StateVector::normalized(basis, pair.vector.map(|v| Complex64::new(v, 0.0))).expect("eigenvector");
        let g = gamma_from_state(&state).gamma();
        return GroundProbe { energy: pair.value, gamma: g, state, gap: pair.gap, norm };
    }
    let mut op = w.clone();
    for &a in active {
        if h[a] != 0.0 {
            op = op.add(&j[a].scaled(h[a])).expect("same basis");
        }
    }
    let pair = lowest_eigenpair(&op);
    let state = StateVector::normalized(basis, pair.vector).expect("eigenvector");
    let g = gamma_from_state(&state).gamma();
    GroundProbe { energy: pair.value, gamma: g, state, gap: pair.gap, norm: op.norm_inf() }
}

/// Legendre route: solves `grad_h E0(h) = gamma` by Newton ascent on the
/// concave dual `E0(h) - h.gamma`. Fails with [`Error::NotVRepresentable`]
/// when no finite field with a nondegenerate ground state reaches the target.
/// Dual iterations without a 1% drop in the constraint mismatch before the
/// target is declared out of reach.
const STALL_LIMIT: usize = 25;

/// On the z axis a diagonal `W` has only Fock ground states under `W + h_z J_z`,
/// and `|k>` is one of them exactly when `(k, w_k)` is a strict vertex of the
/// lower convex hull of the diagonal. Everything else on the axis is out of
/// reach of the dual route.
fn axis_fock_result(target: &OneBodyRDM, w: &HermitianOperator, tol: f64) -> Result<SearchResult> {
    let basis = w.basis();
    let n = basis.n_particles();
    let kf = target.gamma_z() + n as f64 / 2.0;
    if (kf - kf.round()).abs() > tol {
        return Err(Error::NotVRepresentable);
    }
    let k = kf.round() as usize;
    let diag: Vec<f64> = (0..=n).map(|i| w.entries()[(i, i)].re).collect();
    let left = (0..k).map(|j| (diag[k] - diag[j]) / (k - j) as f64).fold(f64::NEG_INFINITY, f64::max);
    let right = (k + 1..=n).map(|j| (diag[j] - diag[k]) / (j - k) as f64).fold(f64::INFINITY, f64::min);
    if !(left + 1e-12 * w.norm_inf().max(1.0) < right) {
        return Err(Error::NotVRepresentable);
    }
    Ok(finish(StateVector::fock(basis, k), target, w, Strategy::DualLegendre, 0, true, None, Vec::new()))
}

pub fn numeric_search_dual(target: &OneBodyRDM, w: &HermitianOperator, opts: &SearchOptions) -> Result<SearchResult> {
    opts.validate()?;
    check_target(target, w)?;
    let basis = w.basis();
    if basis.n_particles() == 0 {
        return Ok(trivial_result(target, w, Strategy::DualLegendre));
    }
    if on_surface(target) {
        return Ok(surface_result(target, w, Strategy::DualLegendre));
    }
    let j = [angular(basis, Axis::X), angular(basis, Axis::Y), angular(basis, Axis::Z)];
    let tri = w.tridiagonal();
    let symmetric = commutes_with_jz(w);
    let (solve_target, phi, active): (OneBodyRDM, f64, Vec<usize>) = if symmetric {
        (target.rotated_to_plane(), target.phi(), vec![0, 2])
    } else if w.is_real() && target.gamma_y() == 0.0 {
        (*target, 0.0, vec![0, 2])
    } else {
        (*target, 0.0, vec![0, 1, 2])
    };
    if symmetric && solve_target.gamma_x().abs() <= opts.constraint_tolerance {
        return axis_fock_result(&solve_target, w, opts.constraint_tolerance);
    }
    let t = solve_target.gamma();
    let tol = opts.constraint_tolerance;
    let radius = basis.radius();
    let w_scale = w.norm_inf().max(1.0);

    let dual_value = |p: &GroundProbe, h: &[f64; 3]| p.energy - active.iter().map(|&a| h[a] * t[a]).sum::<f64>();
    let mismatch = |p: &GroundProbe| active.iter().map(|&a| (p.gamma[a] - t[a]).abs()).fold(0.0, f64::max);

    // Mean-field start: field antiparallel to the target, sized to the interaction.
    let mut h = [0.0; 3];
    let rho = solve_target.gamma_rho();
    if rho > 0.0 {
        let strength = w_scale / radius.max(1.0) * (rho / radius) / (1.0 - rho / radius).max(1e-3).sqrt();
        for &a in &active {
            h[a] = -strength * t[a] / rho;
        }
    }
    let mut current = probe(w, &j, h, &active, tri.as_ref());
    let mut iterations = 0;
    let max_iter = opts.max_iterations.min(500);
    // Past the tolerance a few extra steps are taken while they still help.
    let floor = 1e-14 * radius.max(1.0);
    let mut polish = 0;
    // Non-v-representable targets stall at a kink of the dual with the
    // mismatch stuck; give up once it stops shrinking.
    let mut best_mismatch = f64::INFINITY;
    let mut stalled = 0;
    loop {
        let m = mismatch(&current);
        let polishing = m <= tol;
        if m < 0.99 * best_mismatch {
            best_mismatch = m;
            stalled = 0;
        } else if !polishing {
            stalled += 1;
            if stalled > STALL_LIMIT {
                return Err(Error::NotVRepresentable);
            }
        }
        if polishing {
            if polish >= 4 || m <= floor {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::NotVRepresentable);
        }
        // Susceptibility by forward differences of gamma(h).
        let k = active.len();
        let mut chi = DMatrix::zeros(k, k);
        let hnorm = active.iter().map(|&a| h[a].abs()).fold(0.0, f64::max);
        let step = 1e-6 * (hnorm + w_scale / radius.max(1.0));
        for (col, &b) in active.iter().enumerate() {
            let mut hp = h;
            hp[b] += step;
            let p = probe(w, &j, hp, &active, tri.as_ref());
            for (row, &a) in active.iter().enumerate() {
                // d gamma_a / d h_b is negative semidefinite
                chi[(row, col)] = -(p.gamma[a] - current.gamma[a]) / step;
            }
        }
        let chi = (&chi + chi.transpose()) * 0.5;
        let grad = DVector::from_iterator(k, active.iter().map(|&a| current.gamma[a] - t[a]));
        let (vals, vecs) = sorted_symmetric_eigen(chi.clone());
        let vmax = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let mut dh = DVector::zeros(k);
        for (i, &v) in vals.iter().enumerate() {
            let col = vecs.column(i);
            dh += col * (col.dot(&grad) / v.max(1e-12 * vmax));
        }
        let g0 = dual_value(&current, &h);
        let ascent = grad.dot(&dh).max(0.0);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let mut trial = h;
            for (i, &a) in active.iter().enumerate() {
                trial[a] += alpha * dh[i];
            }
            let p = probe(w, &j, trial, &active, tri.as_ref());
            let gt = dual_value(&p, &trial);
            let armijo = gt >= g0 + 1e-4 * alpha * ascent - 1e-15 * p.norm.max(1.0) * (1.0 + g0.abs());
            if armijo && (mismatch(&p) < mismatch(&current) || gt > g0) {
                h = trial;
                current = p;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Near a level crossing the dual has a kink and the finite-difference
            // Newton model is useless; fall back to steepest ascent.
            let g2 = grad.norm_squared();
            let mut s = 4.0 * w_scale / radius.max(1.0);
            for _ in 0..60 {
                let mut trial = h;
                for (i, &a) in active.iter().enumerate() {
                    trial[a] += s * grad[i];
                }
                let p = probe(w, &j, trial, &active, tri.as_ref());
                if dual_value(&p, &trial) >= g0 + 1e-4 * s * g2 {
                    h = trial;
                    current = p;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
        }
        if !accepted {
            if polishing {
                break;
            }
            return Err(Error::NotVRepresentable);
        }
        if active.iter().any(|&a| !h[a].is_finite()) || hnorm > 1e12 * w_scale {
            return Err(Error::NotVRepresentable);
        }
    }
    if current.gap <= 1e-10 * current.norm.max(1.0) {
        return Err(Error::NotVRepresentable);
    }
    let state = rotate_about_z(&current.state, phi).canonical();
    let (s, c) = phi.sin_cos();
    let multipliers = if symmetric { [h[0] * c, h[0] * s, h[2]] } else { h };
    let mut res = finish(state, target, w, Strategy::DualLegendre, iterations, true, Some(multipliers), Vec::new());
    res.converged = res.constraint_residual <= tol.max(1e-12 * radius) && res.norm_residual <= 1e-10;
    Ok(res)
}
