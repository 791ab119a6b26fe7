//! Upper bounds on the Hilbert-Schmidt distance between a multipartite
//! quantum state and the set of separable states.
//!
//! The [`gilbert`] module runs a randomized Gilbert iteration that builds a
//! sequence of separable states approaching the tested state. The
//! [`analysis`] module turns the resulting trace into an estimate of the
//! limiting distance and the final iterate into an entanglement witness.

// negated float comparisons are deliberate: NaN must fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod gilbert;
pub mod io;
pub mod linalg;
pub mod states;
pub mod symmetry;

pub use error::{Error, Result};
pub use gilbert::{HaltCriteria, RunState, StepOutcome, Trace, TraceRecord};
pub use linalg::{ComplexMatrix, DensityMatrix, PureState};
pub use states::{Sampler, SamplerConfig};
pub use symmetry::{Generator, SymmetryGroup};
