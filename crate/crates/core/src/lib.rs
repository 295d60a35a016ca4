//! Simulation toolkit for telling quickly oscillating pure states apart from
//! genuinely mixed states.
//!
//! Strong, non-post-selected statistics of a state whose relative phases wind
//! many times within the instrument's time resolution are identical to those
//! of its dephased mixture ([`strongeq`]). Time-averaged weak values on a
//! post-selected ensemble are not ([`weakval`], [`continuum`]), and
//! [`pointerlab`] simulates the pointer readout that would show it.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod error;
pub mod oscillate;
pub mod pointerlab;
pub mod qcore;
pub mod strongeq;
pub mod weakval;

pub use error::{Error, Result};
pub use oscillate::{AveragingWindow, FastnessReport, OscillatingPureState, QuadratureRule};
pub use qcore::{
    expectation, make_density, make_observable, transition_probability, ComplexMatrix, ComplexVector, DensityOperator,
    MixtureDecomposition, Observable, PureState, C64,
};
pub use weakval::{TwoStateConfig, Verdict, VerdictKind, WeakValue};
