// Negated comparisons such as `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hib;
pub mod laplace;
pub mod posterior;
pub mod quadrature;
pub mod screening;
pub mod simulation;
pub mod specfun;
pub mod twogroups;

pub use error::{Error, Result};
pub use hib::{HIBParams, ShrinkageProfilePoint};
pub use posterior::EffectPosterior;
pub use specfun::{LogSigned, SeriesControl};
