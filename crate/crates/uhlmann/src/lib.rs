//! Uhlmann holonomy of discrete density-operator sequences.
//!
//! The crate computes the holonomy two independent ways and verifies them
//! against each other:
//!
//! * **analytic**: the ordered product of relative polar factors of adjacent
//!   square roots, which is the closed-form definition;
//! * **operational**: an exact density-matrix simulation of the two-path
//!   interferometric protocol, where each amplitude is carried by the
//!   off-diagonal block of a two-path state, parallelity is scored by a
//!   controlled-swap functional, and the holonomy is read out from the final
//!   state by probe maximization.
//!
//! Modules follow the pipeline: [`linalg`] (dense complex factorizations),
//! [`states`] (density operators, subamplitudes, block encodings),
//! [`interferometry`] (circuit simulation and probe readout),
//! [`preparation`] (branch-mixture state preparation), [`optimizer`]
//! (trace maximization over unitaries and contractions), and [`transport`]
//! (the transport loop and the analytic cross-check).

pub mod interferometry;
pub mod linalg;
pub mod optimizer;
pub mod preparation;
pub mod states;
pub mod transport;

pub use linalg::ComplexMatrix;
pub use states::{BlockState, DensityMatrix, Subamplitude};
pub use transport::{HolonomyResult, SequenceSpec};
