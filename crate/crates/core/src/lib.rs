#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait)]

//! Statistical model checking of stochastic timed component models.

pub mod expr;
pub mod kernel;
pub mod stochastics;
pub mod monitor;
pub mod smc;
pub mod attacks;
pub mod corpus;
