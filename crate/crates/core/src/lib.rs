//! Gradient descent on linearly separable data and numerical certification of
//! its implicit bias towards the hard-margin SVM direction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod margin;
pub mod multiclass;
pub mod optim;
pub mod rates;

pub use error::{Error, Result};
