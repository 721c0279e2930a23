//! Dirichlet-Ferguson and entropic random measures on the flat torus and the
//! unit interval, computed through semi-discrete optimal transport.

// `!(x > 0.0)` is used on purpose: NaN must fail positivity checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conjugation;
pub mod energy;
pub mod error;
pub mod measure;
pub mod metrics;
pub mod one_dim;
pub mod rng;
pub mod sdot;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
