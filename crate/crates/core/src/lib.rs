//! Relative growth in ordered groups, with circle lifts, contact flows on the
//! torus and the stable norm of periodic metrics as models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod error;
pub mod interval;
pub mod order;
pub mod torus;
pub mod report;
pub mod stable;
pub mod suite;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/growth.md")]
    mod growth {}
    #[doc = include_str!("../../../book/src/circle.md")]
    mod circle {}
    #[doc = include_str!("../../../book/src/torus.md")]
    mod torus {}
    #[doc = include_str!("../../../book/src/stable_norm.md")]
    mod stable_norm {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
