//! Exact compensating variation for public-good provision changes under
//! homothetic utility, with the numerical machinery to check it.
//!
//! The modules build on each other:
//!
//! - [`utility`]: bundles, prices, utility specifications and evaluation.
//! - [`duality`]: numerical utility maximization and expenditure
//!   minimization, plus closed-form oracles for the worked examples.
//! - [`homogeneity`]: degree estimation and pass/fail scaling checks.
//! - [`welfare`]: compensating variation by formula, by brute force, and
//!   good by good.
//! - [`separable`]: the additively separable contrast case.
//! - [`estimate`]: synthetic panels and the log-change regression that
//!   recovers the sufficient statistic.

pub mod duality;
pub mod error;
pub mod estimate;
pub mod homogeneity;
pub mod numeric;
pub mod separable;
pub mod utility;
pub mod welfare;

pub use error::{Error, Result};
