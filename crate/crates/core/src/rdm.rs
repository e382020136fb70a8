//! The two-site 1-RDM as the collective-spin vector `gamma_a = <J_a>`.

use std::f64::consts::{LN_2, PI, TAU};

use crate::error::{Error, Result};
use crate::fock::{apply_angular, Axis, FockBasis, StateVector};

/// Slack allowed on the Bloch-sphere bound `|gamma| <= N/2`.
pub const REPRESENTABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneBodyRDM {
    n_particles: usize,
    gamma: [f64; 3],
}

impl OneBodyRDM {
    pub fn new(n_particles: usize, gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Result<Self> {
        let rdm = Self { n_particles, gamma: [gamma_x, gamma_y, gamma_z] };
        if !rdm.gamma.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidArgument("non-finite 1-RDM component".into()));
        }
        let radius = rdm.radius();
        if rdm.gamma_rho() > radius + REPRESENTABILITY_SLACK * radius.max(1.0) {
            return Err(Error::NotRepresentable { gamma_rho: rdm.gamma_rho(), radius });
        }
        Ok(rdm)
    }

    /// Point in the real-wavefunction plane `gamma_y = 0`.
    pub fn in_plane(n_particles: usize, gamma_x: f64, gamma_z: f64) -> Result<Self> {
        Self::new(n_particles, gamma_x, 0.0, gamma_z)
    }

    /// `gamma = gamma_rho (sin t cos p, sin t sin p, cos t)`.
    pub fn from_spherical(n_particles: usize, gamma_rho: f64, theta: f64, phi: f64) -> Result<Self> {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::new(n_particles, gamma_rho * st * cp, gamma_rho * st * sp, gamma_rho * ct)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn gamma(&self) -> [f64; 3] {
        self.gamma
    }

    pub fn component(&self, axis: Axis) -> f64 {
        self.gamma[axis.index()]
    }

    pub fn gamma_x(&self) -> f64 {
        self.gamma[0]
    }

    pub fn gamma_y(&self) -> f64 {
        self.gamma[1]
    }

    pub fn gamma_z(&self) -> f64 {
        self.gamma[2]
    }

    pub fn radius(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    pub fn gamma_rho(&self) -> f64 {
        let [x, y, z] = self.gamma;
        (x * x + y * y + z * z).sqrt()
    }

    /// Polar angle in `[0, pi]`; 0 at the origin.
    pub fn theta(&self) -> f64 {
        let r = self.gamma_rho();
        if r == 0.0 {
            return 0.0;
        }
        (self.gamma[2] / r).clamp(-1.0, 1.0).acos()
    }

    /// Azimuth in `[0, 2 pi)`; 0 on the z axis.
    pub fn phi(&self) -> f64 {
        let [x, y, _] = self.gamma;
        if x == 0.0 && y == 0.0 {
            return 0.0;
        }
        let p = y.atan2(x);
        let p = if p < 0.0 { p + TAU } else { p };
        if p >= TAU {
            0.0
        } else {
            p
        }
    }

    /// `delta = N/2 - |gamma|`, the number of particles outside the condensate mode.
    pub fn depletion(&self) -> f64 {
        self.radius() - self.gamma_rho()
    }

    /// Same `gamma_rho` and `theta` rotated to azimuth 0.
    pub fn rotated_to_plane(&self) -> Self {
        let [x, y, z] = self.gamma;
        Self { n_particles: self.n_particles, gamma: [(x * x + y * y).sqrt(), 0.0, z] }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.gamma.iter().zip(other.gamma.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Von Neumann entropy of the unit-trace one-body matrix, whose
    /// eigenvalues are `1/2 +- |gamma|/N`. `ln 2` for `N = 0`.
    pub fn correlation_entropy(&self) -> f64 {
        if self.n_particles == 0 {
            return LN_2;
        }
        let r = (self.gamma_rho() / self.n_particles as f64).min(0.5);
        let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
        h(0.5 + r) + h(0.5 - r)
    }
}

pub fn gamma_from_state(state: &StateVector) -> OneBodyRDM {
    let basis: FockBasis = state.basis();
    let g = |axis| state.amplitudes().dotc(&apply_angular(state, axis)).re;
    let rdm = OneBodyRDM { n_particles: basis.n_particles(), gamma: [g(Axis::X), g(Axis::Y), g(Axis::Z)] };
    let radius = rdm.radius();
    assert!(
        rdm.gamma_rho() <= radius + REPRESENTABILITY_SLACK * radius.max(1.0),
        "normalized state produced |gamma| = {} > N/2 = {radius}",
        rdm.gamma_rho()
    );
    rdm
}

/// Cartesian -> spherical -> Cartesian.
pub fn spherical_roundtrip(rdm: &OneBodyRDM) -> OneBodyRDM {
    let (r, t, p) = (rdm.gamma_rho(), rdm.theta(), rdm.phi());
    debug_assert!((0.0..=PI).contains(&t) && (0.0..TAU).contains(&p));
    let (st, ct) = t.sin_cos();
    let (sp, cp) = p.sin_cos();
    OneBodyRDM { n_particles: rdm.n_particles, gamma: [r * st * cp, r * st * sp, r * ct] }
}

pub fn correlation_entropy(rdm: &OneBodyRDM) -> f64 {
    rdm.correlation_entropy()
}
