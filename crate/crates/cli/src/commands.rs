use std::f64::consts::{FRAC_PI_2, PI};

use bosefunc::bec::mzz_expansion;
use bosefunc::fock::{build_basis, onsite_interaction, HermitianOperator};
use bosefunc::groundstate::ground_state;
use bosefunc::par::{item_seed, map_indexed};
use bosefunc::qfim::{closed_form_qfim_n2, qfim_from_state, qfim_functional, witness_depth};
use bosefunc::search::{closed_form_n2, coherent_state};
use bosefunc::{OneBodyRDM, QfimMatrix, SearchOptions, StateVector, StrategyChoice};
use nalgebra::Matrix3;
use serde_json::Value;

use crate::config::{Params, RunConfig, WitnessSource};
use crate::error::CliError;
use crate::output::{Cell, Report, Table};

/// A finished command: the report plus the number of points that failed.
pub struct Outcome {
    pub report: Report,
    pub failures: usize,
}

/// Cell-centred grid over `[-N/2, N/2]^2`, kept where `gamma_rho <= N/2 + 1e-12`.
/// Returned row by row (`gamma_x` outer, `gamma_z` inner).
pub fn disk_grid(n_particles: usize, grid: usize) -> Vec<Vec<(f64, f64)>> {
    let radius = n_particles as f64 / 2.0;
    let step = 2.0 * radius / grid as f64;
    let coord = |i: usize| -radius + (i as f64 + 0.5) * step;
    (0..grid)
        .map(|i| (0..grid).map(|k| (coord(i), coord(k))).filter(|&(x, z)| (x * x + z * z).sqrt() <= radius + 1e-12).collect())
        .collect()
}

/// `F` and the QFIM at one in-plane point, closed form or numeric.
pub fn point_qfim(n: usize, x: f64, z: f64, w: &HermitianOperator, u: f64, choice: StrategyChoice, opts: &SearchOptions) -> Result<(f64, QfimMatrix), CliError> {
    if choice == StrategyChoice::ClosedForm {
        let dir = opts.origin_direction;
        let res = closed_form_n2(x, z, u.signum(), dir)?;
        return Ok((u.abs() * res.f_value, closed_form_qfim_n2(x, z, u.signum(), dir)?));
    }
    let target = OneBodyRDM::in_plane(n, x, z)?;
    let (m, res) = qfim_functional(&target, w, opts, choice)?;
    Ok((res.f_value, m))
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let n = cfg.n_particles;
    let u = cfg.sign_or_u;
    let w = onsite_interaction(build_basis(n), u);
    let rows = disk_grid(n, cfg.grid);
    // One seed per grid row, so the output does not depend on scheduling.
    let computed = map_indexed(&rows, |i, row| {
        let opts = SearchOptions::default().with_seed(item_seed(cfg.seed, i)).with_direction(FRAC_PI_2);
        row.iter().map(|&(x, z)| point_qfim(n, x, z, &w, u, cfg.strategy, &opts).ok()).collect::<Vec<_>>()
    });
    let mut table = Table::new(vec!["gamma_x", "gamma_z", "F", "M_xx", "M_yy", "M_zz", "M_xz", "converged"]);
    let mut failures = 0;
    for (row, vals) in rows.iter().zip(computed) {
        for (&(x, z), val) in row.iter().zip(vals) {
            let (f, m, ok) = match val {
                Some((f, m)) => (f, [m.xx(), m.yy(), m.zz(), m.xz()], true),
                None => {
                    failures += 1;
                    (f64::NAN, [f64::NAN; 4], false)
                }
            };
            table.push(vec![Cell::Num(x), Cell::Num(z), Cell::Num(f), Cell::Num(m[0]), Cell::Num(m[1]), Cell::Num(m[2]), Cell::Num(m[3]), Cell::Bool(ok)]);
        }
    }
    Ok(Outcome { report: Report { config: cfg.to_json(), rows: table, checks: None }, failures })
}

pub fn bec_map(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Params::BecMap { theta_points, phi_points, deltas, numeric } = &cfg.params else {
        unreachable!("bec-map called with other params")
    };
    let n = cfg.n_particles;
    let thetas: Vec<f64> = match *theta_points {
        1 => vec![FRAC_PI_2],
        k => (0..k).map(|i| PI * i as f64 / (k - 1) as f64).collect(),
    };
    let phis: Vec<f64> = (0..*phi_points).map(|j| 2.0 * PI * j as f64 / *phi_points as f64).collect();
    let mut points = Vec::with_capacity(deltas.len() * thetas.len() * phis.len());
    for &d in deltas {
        for &t in &thetas {
            points.extend(phis.iter().map(|&p| (t, p, d)));
        }
    }
    let w = numeric.then(|| onsite_interaction(build_basis(n), cfg.sign_or_u));
    let radius = n as f64 / 2.0;
    let numeric_mzz = map_indexed(&points, |i, &(t, p, d)| -> Option<Result<f64, CliError>> {
        let w = w.as_ref()?;
        Some((|| {
            let target = OneBodyRDM::from_spherical(n, radius - d, t, p)?;
            let opts = SearchOptions::default().with_seed(item_seed(cfg.seed, i));
            let (m, _) = qfim_functional(&target, w, &opts, cfg.strategy)?;
            Ok(m.zz())
        })())
    });
    let mut table = Table::new(vec!["theta", "phi", "delta", "Mzz_expansion", "Mzz_numeric_optional", "exceeds_sql"]);
    let mut failures = 0;
    for (&(t, p, d), num) in points.iter().zip(numeric_mzz) {
        let m = mzz_expansion(n, d, t, p);
        let num_cell = match num {
            None => Cell::Empty,
            Some(Ok(v)) => Cell::Num(v),
            Some(Err(_)) => {
                failures += 1;
                Cell::Empty
            }
        };
        table.push(vec![Cell::Num(t), Cell::Num(p), Cell::Num(d), Cell::Num(m), num_cell, Cell::Bool(m > n as f64)]);
    }
    Ok(Outcome { report: Report { config: cfg.to_json(), rows: table, checks: None }, failures })
}

pub fn groundstate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Params::Groundstate { t, u } = cfg.params else { unreachable!("groundstate called with other params") };
    let g = ground_state(cfg.n_particles, t, u)?;
    let mut table = Table::new(vec!["energy", "gamma_x", "gamma_y", "gamma_z", "gap", "degenerate"]);
    let [gx, gy, gz] = g.rdm.gamma();
    table.push(vec![Cell::Num(g.energy), Cell::Num(gx), Cell::Num(gy), Cell::Num(gz), Cell::Num(g.gap), Cell::Bool(g.is_degenerate())]);
    Ok(Outcome { report: Report { config: cfg.to_json(), rows: table, checks: None }, failures: 0 })
}

fn noon_state(n: usize) -> StateVector {
    let mut amps = vec![0.0; n + 1];
    amps[0] = std::f64::consts::FRAC_1_SQRT_2;
    amps[n] += std::f64::consts::FRAC_1_SQRT_2;
    StateVector::from_real(build_basis(n), &amps).expect("NOON amplitudes are normalized")
}

/// Reads `{"n_particles": N, "entries": [[..], [..], [..]]}`.
pub fn read_qfim(text: &str) -> Result<QfimMatrix, CliError> {
    let bad = |m: &str| CliError::Usage(format!("QFIM file: {m}"));
    let v: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let n = v.get("n_particles").and_then(Value::as_u64).ok_or_else(|| bad("missing integer n_particles"))? as usize;
    let rows = v.get("entries").and_then(Value::as_array).filter(|r| r.len() == 3).ok_or_else(|| bad("entries must be a 3x3 array"))?;
    let mut m = Matrix3::zeros();
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().filter(|r| r.len() == 3).ok_or_else(|| bad("entries must be a 3x3 array"))?;
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = e.as_f64().ok_or_else(|| bad("entries must be numbers"))?;
        }
    }
    Ok(QfimMatrix::new(n, m)?)
}

pub fn witness(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Params::Witness { source, directions } = &cfg.params else { unreachable!("witness called with other params") };
    let n = cfg.n_particles;
    let basis = build_basis(n);
    let qfim = match source {
        WitnessSource::Noon => qfim_from_state(&noon_state(n)),
        WitnessSource::Coherent => qfim_from_state(&coherent_state(basis, FRAC_PI_2, 0.0)),
        WitnessSource::Twin => qfim_from_state(&StateVector::fock(basis, n / 2)),
        WitnessSource::Fock(k) => qfim_from_state(&StateVector::fock(basis, *k)),
        WitnessSource::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            read_qfim(&text)?
        }
        WitnessSource::Gamma(x, z) => {
            let w = onsite_interaction(basis, cfg.sign_or_u);
            let opts = SearchOptions::default().with_seed(cfg.seed).with_direction(FRAC_PI_2);
            point_qfim(n, *x, *z, &w, cfg.sign_or_u, cfg.strategy, &opts)?.1
        }
    };
    let n_eff = qfim.n_particles();
    let mut table = Table::new(vec!["direction_x", "direction_y", "direction_z", "qfi", "depth_lower_bound", "bound_used", "exceeds_sql"]);
    for d in directions {
        let v = witness_depth(&qfim, *d, n_eff)?;
        table.push(vec![
            Cell::Num(v.direction[0]),
            Cell::Num(v.direction[1]),
            Cell::Num(v.direction[2]),
            Cell::Num(v.qfi_value),
            Cell::Int(v.depth_lower_bound as i64),
            Cell::Num(v.bound_used),
            Cell::Bool(v.qfi_value > n_eff as f64),
        ]);
    }
    Ok(Outcome { report: Report { config: cfg.to_json(), rows: table, checks: None }, failures: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_grid_has_four_points() {
        let g = disk_grid(2, 2);
        assert_eq!(g.iter().map(Vec::len).sum::<usize>(), 4);
        for &(x, z) in g.iter().flatten() {
            assert_eq!((x.abs(), z.abs()), (0.5, 0.5));
        }
    }

    #[test]
    fn grid_is_masked_to_disk() {
        let pts: Vec<_> = disk_grid(4, 31).into_iter().flatten().collect();
        assert!(pts.iter().all(|&(x, z)| x * x + z * z <= 4.0 + 1e-9));
        assert!(pts.len() < 31 * 31 && pts.len() > 31 * 31 * 3 / 4);
    }

    #[test]
    fn qfim_file_parsing() {
        let q = read_qfim(r#"{"n_particles": 2, "entries": [[0,0,0],[0,0,0],[0,0,4]]}"#).unwrap();
        assert_eq!(q.zz(), 4.0);
        assert!(read_qfim(r#"{"n_particles": 2, "entries": [[0,0],[0,0]]}"#).is_err());
        assert!(read_qfim("not json").is_err());
        assert!(read_qfim(r#"{"n_particles": 2, "entries": [[0,1,0],[0,0,0],[0,0,0]]}"#).is_err());
    }

    #[test]
    fn noon_qfim() {
        assert!((qfim_from_state(&noon_state(2)).zz() - 4.0).abs() < 1e-12);
        // N = 1: the "NOON" state is x-polarized.
        assert!((qfim_from_state(&noon_state(1)).zz() - 1.0).abs() < 1e-12);
    }
}
