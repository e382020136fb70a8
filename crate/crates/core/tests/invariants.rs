use std::f64::consts::PI;

use bosefunc::bec::{exact_ansatz_expectation, rotated_state_gamma, truncated_functional, TruncatedBecState};
use bosefunc::fock::{expectation, onsite_interaction};
use bosefunc::qfim::{depth_bound, mzz_single_coupling, qfim_from_state, qfim_functional, witness_depth};
use bosefunc::search::coherent_state;
use bosefunc::{build_basis, OneBodyRDM, SearchOptions, StateVector, StrategyChoice};
use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;

fn unit(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn random_state(n: usize, re: &[f64], im: &[f64]) -> Option<StateVector> {
    let v = DVector::from_fn(n + 1, |k, _| Complex64::new(re[k], im[k]));
    (v.norm() > 1e-3).then(|| StateVector::normalized(build_basis(n), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn state_qfim_is_psd_and_bounded(n in 1usize..9, re in prop::collection::vec(-1.0f64..1.0, 9), im in prop::collection::vec(-1.0f64..1.0, 9)) {
        let Some(psi) = random_state(n, &re, &im) else { return Ok(()) };
        let m = qfim_from_state(&psi);
        let scale = (n * n) as f64;
        let eig = m.entries().symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-9 * scale, "{eig}");
        prop_assert!(eig.max() <= scale * (1.0 + 1e-12), "{eig}");
    }

    #[test]
    fn coherent_qfim_closed_form(n in 1usize..12, theta in 0.0..PI, phi in 0.0..2.0 * PI) {
        let m = qfim_from_state(&coherent_state(build_basis(n), theta, phi));
        let e = unit(theta, phi);
        let want = (Matrix3::identity() - e * e.transpose()) * n as f64;
        prop_assert!((m.entries() - want).abs().max() < 1e-9 * n as f64);
    }

    #[test]
    fn rotated_fock_gamma(n in 1usize..10, k in 0usize..10, theta in 0.0..PI, phi in 0.0..2.0 * PI) {
        let k = k.min(n);
        let g = rotated_state_gamma(n, k, theta, phi).unwrap();
        let want = unit(theta, phi) * ((n as f64 - 2.0 * k as f64) / 2.0);
        for (a, b) in g.gamma().iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-10 * n as f64);
        }
    }

    #[test]
    fn ansatz_branches_on_real_axis(n in 2usize..14, delta in 0.0f64..2.0, theta in 0.0..PI, phi_pi in prop::bool::ANY) {
        // The theta mode carries e^{-i phi}, so the explicit ansatz depends on
        // cos(2 phi) while the formula uses cos(phi): on the real axis the two
        // branch pairs coincide, with the labels swapped at phi = pi.
        let phi = if phi_pi { PI } else { 0.0 };
        let w = onsite_interaction(build_basis(n), 1.0);
        let brute = |sign: f64| {
            let st = TruncatedBecState::new(delta, sign).unwrap().to_state(n, theta, phi).unwrap();
            expectation(&st, &w).unwrap() + n as f64
        };
        let mut b = [brute(1.0), brute(-1.0)];
        let mut f = [exact_ansatz_expectation(n, delta, theta, phi, 1.0).unwrap(), exact_ansatz_expectation(n, delta, theta, phi, -1.0).unwrap()];
        b.sort_by(f64::total_cmp);
        f.sort_by(f64::total_cmp);
        let tol = 1e-9 * (n * n) as f64;
        prop_assert!((b[0] - f[0]).abs() < tol && (b[1] - f[1]).abs() < tol, "{b:?} vs {f:?}");
        prop_assert!((truncated_functional(n, delta, theta, phi).unwrap() - (b[0] - n as f64)).abs() < tol);
    }

    #[test]
    fn explicit_ansatz_follows_double_angle(n in 2usize..14, delta in 0.0f64..2.0, theta in 0.0..PI, phi in 0.0..2.0 * PI, plus in prop::bool::ANY) {
        // Contracting e^{2i phi} a_rho^dag^2 a_theta^2 + h.c. on the ansatz gives
        // cos(2 phi); the closed form carries cos(phi).
        let sign = if plus { 1.0 } else { -1.0 };
        let st = TruncatedBecState::new(delta, sign).unwrap().to_state(n, theta, phi).unwrap();
        let brute = expectation(&st, &onsite_interaction(build_basis(n), 1.0)).unwrap() + n as f64;
        let formula = exact_ansatz_expectation(n, delta, theta, 2.0 * phi, sign).unwrap();
        prop_assert!((brute - formula).abs() < 1e-9 * (n * n) as f64, "{brute} vs {formula}");
    }

    #[test]
    fn witness_bounds_are_consistent(n in 1usize..30, frac in 0.0f64..=1.0) {
        let q = frac * (n * n) as f64;
        let m = bosefunc::QfimMatrix::new(n, Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, q))).unwrap();
        let v = witness_depth(&m, [0.0, 0.0, 1.0], n).unwrap();
        prop_assert!(v.depth_lower_bound >= 1 && v.depth_lower_bound <= n.max(1));
        if v.depth_lower_bound > 1 {
            prop_assert!(q > depth_bound(n, v.depth_lower_bound - 1));
        }
        for m in 1..n {
            prop_assert!(depth_bound(n, m) <= depth_bound(n, m + 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn repulsive_surface_stays_at_sql(n in 2usize..6, theta in 0.0..PI, phi in 0.0..2.0 * PI) {
        let target = OneBodyRDM::from_spherical(n, n as f64 / 2.0, theta, phi).unwrap();
        let w = onsite_interaction(build_basis(n), 1.0);
        let (m, _) = qfim_functional(&target, &w, &SearchOptions::default(), StrategyChoice::Auto).unwrap();
        prop_assert!(m.entries().symmetric_eigenvalues().max() <= n as f64 + 1e-8);
    }

    #[test]
    fn generating_relation_interior(n in 2usize..5, r in 0.0f64..0.9, theta in 0.0..PI, phi in 0.0..2.0 * PI, u in prop::sample::select(vec![-2.0, -0.5, 0.7, 3.0])) {
        let target = OneBodyRDM::from_spherical(n, r * n as f64 / 2.0, theta, phi).unwrap();
        let w = onsite_interaction(build_basis(n), u);
        let (m, res) = qfim_functional(&target, &w, &SearchOptions::default(), StrategyChoice::Auto).unwrap();
        let from_f = mzz_single_coupling(&target, res.f_value, u).unwrap();
        prop_assert!((from_f - m.zz()).abs() < 1e-6, "{from_f} vs {}", m.zz());
    }
}
