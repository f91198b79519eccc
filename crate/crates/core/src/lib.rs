//! Numerical toolkit for finite-dimensional operator systems.
//!
//! The library works with concrete operator systems `V ⊆ M_d(ℂ)` given by a
//! Hermitian basis, and implements:
//!
//! * matrix orderings `{C_n}` and order norms ([`opsys`]),
//! * compression cones `C(p_n)` induced by a positive contraction `p`,
//!   together with the kernel subspace `J_p` ([`compression`]),
//! * quotient operator systems `V/J_p` and their complete order isomorphism
//!   with the compressed corner `pVp` ([`quotient`]),
//! * an abstract-projection detector built on the map
//!   `x ↦ [[x, x], [x, x]] + J_{p⊕q}` ([`projection`]),
//! * non-signalling and quantum-commuting correlations generated by states
//!   on operator systems spanned by projections ([`correlations`]).
//!
//! Every decision procedure returns a serializable certificate recording the
//! numerical evidence (eigenvalue margins, epsilon/t schedules, shift
//! coefficients) so that runs are reproducible and auditable.

pub mod certificate;
pub mod compression;
pub mod correlations;
pub mod error;
pub mod io;
pub mod matlin;
pub mod opsys;
pub mod projection;
pub mod quotient;
pub mod sampling;
pub mod selftest;

pub use certificate::{ConeCertificate, Decision, EpsilonStep};
pub use compression::{ContractionData, JSubspace, MembershipParams};
pub use correlations::{Correlation, NsOperatorSystem, PvmFamily, StateFunctional};
pub use error::Error;
pub use matlin::{C64, ComplexMatrix, HermitianMatrix};
pub use opsys::{LevelElement, OperatorSystemSpace};
pub use projection::{ProjectionStatus, ProjectionVerdict};
pub use quotient::{CosetElement, QuotientSystem};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
