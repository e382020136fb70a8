//! Fixed-N two-mode bosonic Fock space and the collective (Schwinger-boson)
//! operators acting on it.
//!
//! Index `n` of every vector and matrix counts the bosons in the left mode,
//! i.e. basis state `n` is `|n, N - n>`, in ascending order `n = 0..=N`.
//! Matrices printed in the descending convention (`|N,0>` first) are the
//! same operators conjugated by the reversal permutation `n -> N - n`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// The `N + 1` dimensional sector of `N` bosons on two sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockBasis {
    n_particles: usize,
}

impl FockBasis {
    pub fn new(n_particles: usize) -> Self {
        Self { n_particles }
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    /// Occupations `(n_left, n_right)` of basis index `index`.
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        assert!(index <= self.n_particles, "basis index out of range");
        (index, self.n_particles - index)
    }

    /// Basis index of `|n_left, N - n_left>`.
    pub fn index_of(&self, n_left: usize) -> usize {
        assert!(n_left <= self.n_particles, "occupation exceeds particle number");
        n_left
    }

    /// Radius of the Bloch ball of admissible 1-RDMs.
    pub fn radius(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    fn check_same(&self, other: &FockBasis) -> Result<()> {
        if self.n_particles != other.n_particles {
            return Err(Error::BasisMismatch { expected: self.n_particles, found: other.n_particles });
        }
        Ok(())
    }
}

pub fn build_basis(n_particles: usize) -> FockBasis {
    FockBasis::new(n_particles)
}

/// Dense Hermitian matrix on a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    basis: FockBasis,
    entries: DMatrix<Complex64>,
    real_tridiagonal: bool,
}

impl HermitianOperator {
    /// Wraps `entries`, which must be Hermitian. The tridiagonal hint is
    /// detected from the entries.
    pub fn new(basis: FockBasis, entries: DMatrix<Complex64>) -> Result<Self> {
        let d = basis.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "expected a {d}x{d} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let scale = entries.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        for i in 0..d {
            for j in 0..=i {
                if (entries[(i, j)] - entries[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!("matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_parts(basis, entries))
    }

    fn from_parts(basis: FockBasis, entries: DMatrix<Complex64>) -> Self {
        let real_tridiagonal = detect_real_tridiagonal(&entries);
        Self { basis, entries, real_tridiagonal }
    }

    pub fn zeros(basis: FockBasis) -> Self {
        let d = basis.dim();
        Self { basis, entries: DMatrix::from_element(d, d, ZERO), real_tridiagonal: true }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn is_real_tridiagonal(&self) -> bool {
        self.real_tridiagonal
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    /// Diagonal and first off-diagonal when the tridiagonal hint is set.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if !self.real_tridiagonal {
            return None;
        }
        let d = self.basis.dim();
        let diag = (0..d).map(|i| self.entries[(i, i)].re).collect();
        let off = (0..d.saturating_sub(1)).map(|i| self.entries[(i + 1, i)].re).collect();
        Some((diag, off))
    }

    /// Real part of the matrix. Exact for real operators.
    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    /// The `2d x 2d` real symmetric matrix `[[A, -B], [B, A]]` for `H = A + iB`,
    /// acting on `(Re psi, Im psi)`.
    pub fn real_embedding(&self) -> DMatrix<f64> {
        let d = self.basis.dim();
        let mut out = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.entries[(i, j)];
                out[(i, j)] = z.re;
                out[(i + d, j + d)] = z.re;
                out[(i, j + d)] = -z.im;
                out[(i + d, j)] = z.im;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            basis: self.basis,
            entries: self.entries.map(|z| z * factor),
            real_tridiagonal: self.real_tridiagonal,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.basis.check_same(&other.basis)?;
        Ok(Self::from_parts(self.basis, &self.entries + &other.entries))
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self> {
        self.basis.check_same(&other.basis)?;
        let ab = &self.entries * &other.entries;
        let ba = &other.entries * &self.entries;
        Ok(Self::from_parts(self.basis, symmetrize(ab + ba)))
    }

    /// Matrix product; the result is generally not Hermitian.
    pub fn product(&self, other: &Self) -> Result<DMatrix<Complex64>> {
        self.basis.check_same(&other.basis)?;
        Ok(&self.entries * &other.entries)
    }

    /// Frobenius-free infinity norm, max row sum of moduli.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, state: &StateVector) -> Result<DVector<Complex64>> {
        self.basis.check_same(&state.basis)?;
        Ok(&self.entries * &state.amplitudes)
    }
}

fn detect_real_tridiagonal(m: &DMatrix<Complex64>) -> bool {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            if z.im != 0.0 {
                return false;
            }
            if i.abs_diff(j) > 1 && z.re != 0.0 {
                return false;
            }
        }
    }
    true
}

// Removes rounding asymmetry from products of Hermitian matrices.
fn symmetrize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = m.nrows();
    let mut out = m.clone();
    for i in 0..d {
        out[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in 0..i {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

/// Normalized amplitude vector on a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: FockBasis,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Wraps already-normalized amplitudes.
    pub fn new(basis: FockBasis, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                basis.dim(),
                amplitudes.len()
            )));
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn normalized(basis: FockBasis, amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.len() != basis.dim() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize amplitude vector".into()));
        }
        Ok(Self { basis, amplitudes: amplitudes / Complex64::new(norm, 0.0) })
    }

    pub fn from_real(basis: FockBasis, amplitudes: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&a| Complex64::new(a, 0.0)));
        Self::normalized(basis, v)
    }

    /// The Fock state `|n_left, N - n_left>`.
    pub fn fock(basis: FockBasis, n_left: usize) -> Self {
        let mut v = DVector::from_element(basis.dim(), ZERO);
        v[basis.index_of(n_left)] = Complex64::new(1.0, 0.0);
        Self { basis, amplitudes: v }
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn is_real(&self) -> bool {
        self.amplitudes.iter().all(|z| z.im == 0.0)
    }

    /// Fixes the global phase so the first amplitude with modulus above
    /// `1e-12` is real and positive.
    pub fn canonical(mut self) -> Self {
        if let Some(z) = self.amplitudes.iter().find(|z| z.norm() > 1e-12).copied() {
            let phase = z.conj() / z.norm();
            self.amplitudes.iter_mut().for_each(|a| *a *= phase);
            // The reference amplitude is now real up to rounding.
            if let Some(a) = self.amplitudes.iter_mut().find(|a| a.norm() > 1e-12) {
                a.im = 0.0;
            }
        }
        self
    }

    /// `|<self|other>|^2`.
    pub fn overlap_sq(&self, other: &StateVector) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// Symmetric coupling strengths `u_ab` (stored once per unordered pair)
/// plus an optional on-site strength `u` multiplying `sum_j n_j (n_j - 1)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingSet {
    entries: BTreeMap<(Axis, Axis), f64>,
    single_u: Option<f64>,
}

impl CouplingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn onsite(u: f64) -> Self {
        Self { entries: BTreeMap::new(), single_u: Some(u) }
    }

    pub fn with(mut self, a: Axis, b: Axis, u: f64) -> Self {
        self.set(a, b, u);
        self
    }

    pub fn with_onsite(mut self, u: f64) -> Self {
        self.single_u = Some(u);
        self
    }

    pub fn set(&mut self, a: Axis, b: Axis, u: f64) {
        self.entries.insert(ordered(a, b), u);
    }

    pub fn set_onsite(&mut self, u: f64) {
        self.single_u = Some(u);
    }

    pub fn get(&self, a: Axis, b: Axis) -> f64 {
        self.entries.get(&ordered(a, b)).copied().unwrap_or(0.0)
    }

    pub fn single_u(&self) -> Option<f64> {
        self.single_u
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((Axis, Axis), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|&u| u == 0.0) && self.single_u.unwrap_or(0.0) == 0.0
    }

    /// Value of the coupling addressed by `key`.
    pub fn value(&self, key: CouplingKey) -> f64 {
        match key {
            CouplingKey::Pair(a, b) => self.get(a, b),
            CouplingKey::OnSite => self.single_u.unwrap_or(0.0),
        }
    }

    /// Copy with the coupling addressed by `key` replaced.
    pub fn with_value(&self, key: CouplingKey, u: f64) -> Self {
        let mut out = self.clone();
        match key {
            CouplingKey::Pair(a, b) => out.set(a, b, u),
            CouplingKey::OnSite => out.single_u = Some(u),
        }
        out
    }

    /// True when `W` commutes with `J_z`, so rotations about z map the
    /// constrained-search fibres onto each other.
    pub fn is_azimuthally_symmetric(&self) -> bool {
        let xx = self.get(Axis::X, Axis::X);
        let yy = self.get(Axis::Y, Axis::Y);
        self.pairs().all(|((a, b), u)| u == 0.0 || matches!((a, b), (Axis::Z, Axis::Z) | (Axis::X, Axis::X) | (Axis::Y, Axis::Y)))
            && xx == yy
    }
}

/// Addresses one independent coupling of a [`CouplingSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingKey {
    Pair(Axis, Axis),
    OnSite,
}

fn ordered(a: Axis, b: Axis) -> (Axis, Axis) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `J_a = (1/2) Psi^dag sigma_a Psi` with `Psi = (b_l, b_r)`.
pub fn angular(basis: FockBasis, axis: Axis) -> HermitianOperator {
    let n = basis.n_particles();
    let d = basis.dim();
    let mut m = DMatrix::from_element(d, d, ZERO);
    match axis {
        Axis::Z => {
            for k in 0..d {
                m[(k, k)] = Complex64::new((2.0 * k as f64 - n as f64) / 2.0, 0.0);
            }
        }
        Axis::X | Axis::Y => {
            // b_l^dag b_r |k, N-k> = sqrt((k+1)(N-k)) |k+1, N-k-1>
            for k in 0..n {
                let s = (((k + 1) * (n - k)) as f64).sqrt() / 2.0;
                let (up, down) = match axis {
                    Axis::X => (Complex64::new(s, 0.0), Complex64::new(s, 0.0)),
                    _ => (Complex64::new(0.0, -s), Complex64::new(0.0, s)),
                };
                m[(k + 1, k)] = up;
                m[(k, k + 1)] = down;
            }
        }
    }
    HermitianOperator::from_parts(basis, m)
}

/// `J_a |psi>` without forming the matrix (`O(N)`).
pub fn apply_angular(state: &StateVector, axis: Axis) -> DVector<Complex64> {
    let n = state.basis.n_particles();
    let c = &state.amplitudes;
    let half = |k: usize| (((k + 1) * (n - k)) as f64).sqrt() / 2.0;
    DVector::from_fn(n + 1, |k, _| match axis {
        Axis::Z => c[k] * ((2.0 * k as f64 - n as f64) / 2.0),
        Axis::X | Axis::Y => {
            // <k|J|k-1> and <k|J|k+1>
            let (from_below, from_above) = match axis {
                Axis::X => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
                _ => (Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)),
            };
            let mut v = ZERO;
            if k > 0 {
                v += from_below * half(k - 1) * c[k - 1];
            }
            if k < n {
                v += from_above * half(k) * c[k + 1];
            }
            v
        }
    })
}

/// `u * sum_j n_j (n_j - 1)`, diagonal in the Fock basis.
pub fn onsite_interaction(basis: FockBasis, u: f64) -> HermitianOperator {
    let n = basis.n_particles() as f64;
    let d = basis.dim();
    let mut m = DMatrix::from_element(d, d, ZERO);
    for k in 0..d {
        let l = k as f64;
        let r = n - l;
        m[(k, k)] = Complex64::new(u * (l * (l - 1.0) + r * (r - 1.0)), 0.0);
    }
    HermitianOperator::from_parts(basis, m)
}

/// `W = sum_{a<b} u_ab {J_a, J_b} + sum_a u_aa J_a^2 + u * sum_j n_j (n_j - 1)`.
///
/// Equivalently `sum over ordered pairs (a, b)` of `u_ab (J_a J_b + J_b J_a) / 2`,
/// the normalization under which each ordered-pair derivative of the
/// functional is `<{J_a, J_b}>/2`.
pub fn general_coupling(basis: FockBasis, couplings: &CouplingSet) -> HermitianOperator {
    let j = [angular(basis, Axis::X), angular(basis, Axis::Y), angular(basis, Axis::Z)];
    let d = basis.dim();
    let mut acc = DMatrix::from_element(d, d, ZERO);
    for ((a, b), u) in couplings.pairs() {
        if u == 0.0 {
            continue;
        }
        let weight = if a == b { 0.5 * u } else { u };
        let anti = j[a.index()].anticommutator(&j[b.index()]).expect("same basis");
        acc += anti.entries.map(|z| z * weight);
    }
    if let Some(u) = couplings.single_u() {
        if u != 0.0 {
            acc += onsite_interaction(basis, u).entries;
        }
    }
    HermitianOperator::from_parts(basis, symmetrize(acc))
}

/// The dimer Hamiltonian `-t (b_l^dag b_r + h.c.) + u sum_j n_j (n_j - 1)`,
/// i.e. `-2t J_x + W`.
pub fn hamiltonian(basis: FockBasis, t: f64, u: f64) -> HermitianOperator {
    let hop = angular(basis, Axis::X).scaled(-2.0 * t);
    hop.add(&onsite_interaction(basis, u)).expect("same basis")
}

/// `<psi|Op|psi>`, real by Hermiticity.
pub fn expectation(state: &StateVector, op: &HermitianOperator) -> Result<f64> {
    let v = op.apply(state)?;
    let z = state.amplitudes.dotc(&v);
    let scale = op.norm_inf().max(1.0);
    debug_assert!(z.im.abs() <= 1e-12 * scale, "imaginary expectation {z}");
    Ok(z.re)
}

/// Largest entrywise deviation between `sum_j n_j(n_j - 1)` and
/// `2 J_z^2 + N^2/2 - N`.
pub fn identity_deviation(basis: FockBasis) -> f64 {
    let n = basis.n_particles() as f64;
    let lhs = onsite_interaction(basis, 1.0);
    let jz = angular(basis, Axis::Z);
    let jz2 = jz.product(&jz).expect("same basis");
    let d = basis.dim();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for k in 0..d {
            let shift = if i == k { n * n / 2.0 - n } else { 0.0 };
            let rhs = jz2[(i, k)] * 2.0 + Complex64::new(shift, 0.0);
            worst = worst.max((lhs.entries[(i, k)] - rhs).norm());
        }
    }
    worst
}
