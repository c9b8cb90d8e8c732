//! Structure of the dual optimal face `{alpha >= 0 : X_M alpha = w_hat}` over the
//! margin points `M`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

use super::offset;

/// A margin point is zero-coefficient when the largest feasible coefficient it
/// can carry over the dual optimal face is at most this.
pub const ZERO_COEFFICIENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FaceAnalysis {
    /// Margin points carrying a positive coefficient in some dual solution.
    pub positive: Vec<usize>,
    /// Margin points whose coefficient is zero in every dual solution.
    pub zero: Vec<usize>,
    /// Canonical dual coefficients over the margin points (in `margin` order).
    pub alpha: Vec<f64>,
    /// Whether the dual solution is unique once exact duplicates are merged.
    pub unique: bool,
    /// Margin points whose classification sits within 10x of the tolerance.
    pub borderline: Vec<usize>,
}

/// Groups identical columns (exact up to `1e-12` relative); returns one
/// representative per group and the member lists.
pub(crate) fn duplicate_groups(xs: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let scale = xs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..xs.ncols() {
        let found = groups.iter_mut().find(|g| {
            let r = g[0];
            (xs.column(j) - xs.column(r)).amax() <= 1e-12 * scale
        });
        match found {
            Some(g) => g.push(j),
            None => groups.push(vec![j]),
        }
    }
    groups
}

/// Largest coefficient column `target` can carry with `xs alpha = w_hat`, `alpha >= 0`.
fn max_coefficient(reduced: &DMatrix<f64>, rhs: &DVector<f64>, target: usize) -> Result<f64> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..reduced.ncols())
        .map(|j| problem.add_var(if j == target { 1.0 } else { 0.0 }, (0.0, f64::INFINITY)))
        .collect();
    for r in 0..reduced.nrows() {
        let row: Vec<_> = vars.iter().enumerate().map(|(j, &v)| (v, reduced[(r, j)])).collect();
        problem.add_constraint(row.as_slice(), ComparisonOp::Eq, rhs[r]);
    }
    let sol = problem.solve().map_err(|e| Error::NonConvergence {
        msg: format!("dual face linear program failed: {e}"),
        best: None,
    })?;
    match sol {
        SolveOutcome::Solution(sol) => Ok(sol[vars[target]]),
        SolveOutcome::Interrupted(_) => Err(Error::NonConvergence {
            msg: "dual face linear program interrupted".into(),
            best: None,
        }),
    }
}

/// Classifies the margin points and picks canonical dual coefficients.
///
/// When the merged Gram matrix is invertible the dual is unique and is solved
/// directly, with duplicate points sharing their group's coefficient equally.
/// Otherwise each point's maximal coefficient over the face is found by a small
/// linear program, and the canonical coefficients are the maximum-entropy point
/// of the face restricted to the positive points (`alpha_n = exp(-x_n^T z)`).
pub fn analyze_face(xs: &DMatrix<f64>, w_hat: &DVector<f64>) -> Result<FaceAnalysis> {
    let m = xs.ncols();
    let groups = duplicate_groups(xs);
    let reps: Vec<usize> = groups.iter().map(|g| g[0]).collect();
    let xr = linalg::select_columns(xs, &reps);

    if linalg::rank(&xr) == reps.len() {
        let gram = xr.transpose() * &xr;
        let ones = DVector::from_element(reps.len(), 1.0);
        let ar = gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&ones))
            .unwrap_or_else(|| linalg::pinv(&gram) * &ones);
        let mut alpha = vec![0.0; m];
        let mut positive = Vec::new();
        let mut zero = Vec::new();
        let mut borderline = Vec::new();
        for (g, &a) in groups.iter().zip(ar.iter()) {
            if a < -1e-8 {
                return Err(Error::NonConvergence {
                    msg: format!("negative dual coefficient {a:e} on the margin set"),
                    best: Some(linalg::to_vec(w_hat)),
                });
            }
            let share = a.max(0.0) / g.len() as f64;
            for &j in g {
                alpha[j] = share;
                if a <= ZERO_COEFFICIENT_TOL {
                    zero.push(j);
                } else {
                    positive.push(j);
                }
                if a > ZERO_COEFFICIENT_TOL && a <= 10.0 * ZERO_COEFFICIENT_TOL {
                    borderline.push(j);
                }
            }
        }
        for &j in &zero {
            alpha[j] = 0.0;
        }
        positive.sort_unstable();
        zero.sort_unstable();
        return Ok(FaceAnalysis { positive, zero, alpha, unique: true, borderline });
    }

    // Non-unique dual: equality constraints in an orthonormal frame of span(xs).
    let basis = linalg::range_basis(xs);
    let reduced = basis.transpose() * xs;
    let rhs = basis.transpose() * w_hat;
    let mut positive = Vec::new();
    let mut zero = Vec::new();
    let mut borderline = Vec::new();
    for j in 0..m {
        let best = max_coefficient(&reduced, &rhs, j)?;
        if best > ZERO_COEFFICIENT_TOL {
            positive.push(j);
        } else {
            zero.push(j);
        }
        if best > ZERO_COEFFICIENT_TOL && best <= 10.0 * ZERO_COEFFICIENT_TOL {
            borderline.push(j);
        }
    }
    let xp = linalg::select_columns(xs, &positive);
    let ones = vec![1.0; positive.len()];
    let z = offset::balance_in_frame(&xp, &ones, w_hat)?;
    let mut alpha = vec![0.0; m];
    for (k, &j) in positive.iter().enumerate() {
        alpha[j] = (-xp.column(k).dot(&z)).exp();
    }
    Ok(FaceAnalysis { positive, zero, alpha, unique: false, borderline })
}
