//! Regularized Cantor sets in `R^d`, s-Riesz transforms of discrete measures
//! supported on them, and empirical checks of the norm, capacity and
//! distribution estimates those sets satisfy.
//!
//! The pipeline is
//! [`SigmaSequence`] → [`Ladder`] → [`CantorSet`] → [`DiscreteMeasure`] →
//! transforms and operator norms ([`riesz`]) → reports ([`estimates`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod geometry;
pub mod measure;
pub mod quad;
pub mod riesz;
pub mod sequence;
pub mod sum;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{Address, CantorSet, Cube, Location};
pub use measure::{DiscreteMeasure, GrowthReport, Mode};
pub use riesz::{Exclusion, OperatorHandle, RieszField, TargetSet};
pub use sequence::{GaugeFunction, Ladder, LadderParams, LadderStats, SigmaSequence};
