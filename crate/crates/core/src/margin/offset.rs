//! The bounded offset `w_tilde` of the GD iterates: the solution of
//! `eta * exp(-x_n^T w_tilde) = alpha_n` on the support set, pinned outside the
//! support span by the initialization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

use super::MaxMarginSolution;

/// Stop when the surrogate gradient norm falls below this, relative to the surrogate value.
const GRAD_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 200;

/// Solves `sum_n beta_n exp(-x_n^T z) x_n = w_hat` for `z` in the column span of `xs`.
///
/// Works in an orthonormal frame of `span(xs)` whose first axis is `w_hat / ||w_hat||`.
/// The coordinates orthogonal to `w_hat` minimize the strictly convex
/// `E(s) = sum_n beta_n exp(-s^T v_n)`; the coordinate along `w_hat` then has a
/// closed form because every column of `xs` has unit margin under `w_hat`.
pub(crate) fn balance_in_frame(xs: &DMatrix<f64>, betas: &[f64], w_hat: &DVector<f64>) -> Result<DVector<f64>> {
    let d = xs.nrows();
    let wn = w_hat.norm();
    let u1 = w_hat / wn;
    let span = linalg::range_basis(xs);
    let rest = linalg::range_basis(&((DMatrix::identity(d, d) - &u1 * u1.transpose()) * &span));
    let k = rest.ncols();
    let v = rest.transpose() * xs;

    let mut s = DVector::zeros(k);
    let surrogate = |s: &DVector<f64>| -> f64 {
        betas
            .iter()
            .enumerate()
            .map(|(n, b)| b * (-v.column(n).dot(s)).exp())
            .sum()
    };
    let mut e = surrogate(&s);
    let mut converged = k == 0;
    let mut grad_norm = 0.0;
    for _ in 0..MAX_NEWTON {
        if k == 0 {
            break;
        }
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for (n, b) in betas.iter().enumerate() {
            let vn = v.column(n);
            let p = b * (-vn.dot(&s)).exp();
            grad -= vn * p;
            hess += vn * vn.transpose() * p;
        }
        grad_norm = grad.norm();
        if grad_norm <= GRAD_TOL * e {
            converged = true;
            break;
        }
        let step = hess
            .clone()
            .cholesky()
            .map(|c| c.solve(&(-&grad)))
            .unwrap_or_else(|| -&grad);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &s + &step * t;
            let ec = surrogate(&cand);
            if ec <= e + 1e-4 * t * slope || t < 1e-12 {
                s = cand;
                e = ec;
                break;
            }
            t *= 0.5;
        }
        if !e.is_finite() {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            msg: format!("offset surrogate did not converge (gradient norm {grad_norm:e})"),
            best: Some(linalg::to_vec(&(&rest * &s))),
        });
    }
    let s1 = wn * (e / (wn * wn)).ln();
    Ok(&u1 * s1 + &rest * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualOffset {
    pub w_tilde: Vec<f64>,
    pub eta: f64,
    /// `P_bar_1 w0`, the component outside the support span fixed by the start point.
    pub complement_component: Vec<f64>,
    /// `max_{n in S} |eta exp(-x_n^T w_tilde) / alpha_n - 1|`.
    pub max_relative_residual: f64,
}

/// Offset with `eta exp(-x_n^T w_tilde) = alpha_n` on the support set and
/// `P_bar_1 (w_tilde - w0) = 0`.
pub fn solve_w_tilde(sol: &MaxMarginSolution, data: &Dataset, eta: f64, w0: &[f64]) -> Result<ResidualOffset> {
    if sol.degenerate {
        return Err(Error::Unsupported(
            "support vectors with zero dual coefficients; use degenerate_chain".into(),
        ));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::input("eta must be positive"));
    }
    if w0.len() != data.dim() {
        return Err(Error::input("w0 dimension mismatch"));
    }
    let xs = linalg::select_columns(data.points(), &sol.support);
    let w_hat = DVector::from_column_slice(&sol.w_hat);
    let betas = vec![eta; sol.support.len()];
    let in_span = balance_in_frame(&xs, &betas, &w_hat)?;
    let complement = linalg::complement_projector(&xs) * DVector::from_column_slice(w0);
    let w_tilde = in_span + &complement;

    let max_relative_residual = sol
        .support
        .iter()
        .map(|&n| {
            let pred = eta * (-linalg::dot(data.column(n), w_tilde.as_slice())).exp();
            (pred / sol.alpha[n] - 1.0).abs()
        })
        .fold(0.0, f64::max);
    if max_relative_residual > 1e-8 {
        return Err(Error::NonConvergence {
            msg: format!("offset equations hold only to {max_relative_residual:e}"),
            best: Some(linalg::to_vec(&w_tilde)),
        });
    }
    Ok(ResidualOffset {
        w_tilde: linalg::to_vec(&w_tilde),
        eta,
        complement_component: linalg::to_vec(&complement),
        max_relative_residual,
    })
}
