//! Reduced density matrix functionals and quantum Fisher information for the
//! two-mode Bose-Hubbard dimer.
//!
//! States live in the Fock basis `|n, N-n>` (ascending `n`, the left-mode
//! occupation). The one-body reduced density matrix is the collective-spin
//! vector `gamma = <J>`; see [`rdm::OneBodyRDM`].

pub mod bec;
pub mod eigen;
pub mod error;
pub mod fock;
pub mod groundstate;
pub mod rdm;
pub mod par;
pub mod qfim;
pub mod search;

pub use error::{Error, Result};
pub use fock::{build_basis, Axis, CouplingKey, CouplingSet, FockBasis, HermitianOperator, StateVector};
pub use rdm::{gamma_from_state, OneBodyRDM};
pub use search::{SearchOptions, SearchResult, Strategy, StrategyChoice};
pub use qfim::{QfimMatrix, WitnessVerdict};
