//! Shared sampling and driver helpers for the acceptance harness.

use std::f64::consts::PI;

use bosefunc::OneBodyRDM;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cell-centred `grid x grid` points of the `gamma_y = 0` disk of radius `N/2`.
pub fn cell_grid(n_particles: usize, grid: usize) -> Vec<(f64, f64)> {
    let r = n_particles as f64 / 2.0;
    let step = 2.0 * r / grid as f64;
    let mut pts = Vec::new();
    for i in 0..grid {
        for k in 0..grid {
            let (x, z) = (-r + (i as f64 + 0.5) * step, -r + (k as f64 + 0.5) * step);
            if x.hypot(z) <= r + 1e-12 {
                pts.push((x, z));
            }
        }
    }
    pts
}

/// Uniform point of the ball of radius `0.9 N/2`.
pub fn random_interior(rng: &mut ChaCha8Rng, n_particles: usize) -> OneBodyRDM {
    let r = 0.9 * n_particles as f64 / 2.0 * rng.gen::<f64>().cbrt();
    let cos_t: f64 = rng.gen_range(-1.0..1.0);
    OneBodyRDM::from_spherical(n_particles, r, cos_t.acos(), rng.gen_range(0.0..2.0 * PI)).expect("interior point")
}

/// Runs the command-line driver in-process and returns `(exit code, stdout)`.
pub fn run_cli(args: &[&str]) -> (u8, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = bosefunc_cli::run_args(std::iter::once("bosefunc").chain(args.iter().copied()), &mut out, &mut err);
    (code, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn grid_counts() {
        assert_eq!(cell_grid(2, 2).len(), 4);
        assert!(cell_grid(2, 50).iter().all(|(x, z)| x.hypot(*z) <= 1.0 + 1e-12));
    }

    #[test]
    fn interior_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(random_interior(&mut rng, 4).gamma_rho() <= 1.8 + 1e-12);
        }
    }

    #[test]
    fn driver_exit_codes() {
        assert_eq!(run_cli(&["sweep", "--grid", "1"]).0, 1);
        let (code, out) = run_cli(&["sweep", "--grid", "2"]);
        assert_eq!(code, 0);
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 5);
    }
}
