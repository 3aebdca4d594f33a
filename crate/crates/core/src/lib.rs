//! Symmetrized entanglement of pure states.
//!
//! The acceptance probability `C_k^S(ψ, G)` is the weight of `k` copies of a
//! pure state on the `G`-symmetric subspace of a subsystem `S`, for `G` the
//! symmetric, cyclic or dihedral group on `k` letters. The entanglement
//! measure is `E = 1 - C`.
//!
//! Modules:
//!
//! - [`combinatorics`]: partitions, class weights, totients, divisor chains.
//! - [`state`]: pure states, state families, partial traces and spectra.
//! - [`measures`]: exact acceptance probabilities and entanglement measures.
//! - [`estimators`]: shot-noise samplers, allocation plans, budgets,
//!   Newton–Girard extrapolation.
//! - [`cyclic_test`]: exact outcome distribution of the parallelized cyclic
//!   permutation test and its post-processing.
//! - [`campaign`]: end-to-end estimation trials and error statistics.

pub mod campaign;
pub mod combinatorics;
mod error;
pub mod estimators;
mod jacobi;
pub mod measures;
pub mod state;

pub use error::{Error, Result};
pub use measures::GroupKind;
pub use state::{MomentVector, PureState, Spectrum, StateFamily};
