//! Finite mixtures whose per-item densities are convex combinations of fixed
//! basis functions, fitted by EM or by a collapsed Gibbs sampler over the
//! number of components.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basis;
pub mod data;
pub mod em;
pub mod error;
pub mod oracle;
mod par;
pub mod sampler;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use par::is_parallel;
