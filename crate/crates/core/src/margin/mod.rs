//! Hard-margin SVM with KKT certification, dual analysis, the residual offset
//! and the recursive decomposition for degenerate datasets.

pub mod chain;
pub mod dual;
pub mod offset;
pub mod wolfe;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

pub use chain::{degenerate_chain, ChainLevel, DegenerateChain};
pub use offset::{solve_w_tilde, ResidualOffset};

/// A sample is on the margin when `|w_hat^T x_n - 1|` is at most this.
pub const MARGIN_TOL: f64 = 1e-7;
/// Solutions whose KKT certificate exceeds this are rejected.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMarginSolution {
    pub w_hat: Vec<f64>,
    /// Margin points, `w_hat^T x_n = 1`.
    pub support: Vec<usize>,
    /// Margin points whose dual coefficient is zero in every dual solution.
    pub zero_coefficient: Vec<usize>,
    /// Dual coefficients, zero off the support.
    pub alpha: Vec<f64>,
    /// Smallest margin among non-support points.
    pub theta: Option<f64>,
    /// Geometric margin `1 / ||w_hat||`.
    pub margin: f64,
    pub degenerate: bool,
    /// Dual uniqueness after merging exactly repeated support points.
    pub dual_unique: bool,
    pub kkt_residual: f64,
    /// Samples whose classification sits close to a tolerance boundary.
    pub borderline: Vec<usize>,
}

impl MaxMarginSolution {
    pub fn w_hat_norm(&self) -> f64 {
        linalg::norm(&self.w_hat)
    }

    pub fn direction(&self) -> Vec<f64> {
        let n = self.w_hat_norm();
        self.w_hat.iter().map(|v| v / n).collect()
    }
}

fn margins(data: &Dataset, w: &[f64]) -> Vec<f64> {
    (0..data.count()).map(|n| linalg::dot(w, data.column(n))).collect()
}

/// `argmin ||w||^2 s.t. w^T x_n >= 1` for folded data.
///
/// The nearest point of the sample hull to the origin gives the support set;
/// `w_hat` is then recomputed as the min-norm solution of the support
/// equalities and certified through the KKT conditions.
pub fn solve_hard_margin(data: &Dataset) -> Result<MaxMarginSolution> {
    let np = wolfe::nearest_point(data.points())?;
    let scale = (0..data.count())
        .map(|n| linalg::norm(data.column(n)).powi(2))
        .fold(0.0, f64::max);
    if np.sq_norm <= 1e-20 * scale {
        return Err(Error::Infeasible("the origin lies in the convex hull of the folded samples".into()));
    }
    let mut w: Vec<f64> = np.point.iter().map(|v| v / np.sq_norm).collect();
    let mut m = margins(data, &w);
    let mut support: Vec<usize> = Vec::new();
    for _ in 0..8 {
        let cand: Vec<usize> = (0..data.count()).filter(|&n| m[n] <= 1.0 + MARGIN_TOL).collect();
        if cand.is_empty() {
            return Err(Error::NonConvergence { msg: "empty margin set".into(), best: Some(w) });
        }
        let xs = linalg::select_columns(data.points(), &cand);
        let ones = DVector::from_element(cand.len(), 1.0);
        let polished = linalg::pinv(&xs.transpose()) * ones;
        let pm = margins(data, polished.as_slice());
        let stable = cand == support;
        support = cand;
        w = linalg::to_vec(&polished);
        m = pm;
        if stable || m.iter().all(|&v| v >= 1.0 - 1e-10) {
            break;
        }
    }
    support.retain(|&n| (m[n] - 1.0).abs() <= MARGIN_TOL);

    let xs = linalg::select_columns(data.points(), &support);
    let w_vec = DVector::from_column_slice(&w);
    let face = dual::analyze_face(&xs, &w_vec)?;
    let mut alpha = vec![0.0; data.count()];
    for (k, &n) in support.iter().enumerate() {
        alpha[n] = face.alpha[k];
    }
    let zero_coefficient: Vec<usize> = face.zero.iter().map(|&k| support[k]).collect();
    let mut borderline: Vec<usize> = face.borderline.iter().map(|&k| support[k]).collect();
    borderline.extend((0..data.count()).filter(|&n| m[n] > 1.0 + MARGIN_TOL && m[n] <= 1.0 + 10.0 * MARGIN_TOL));
    borderline.sort_unstable();

    let theta = (0..data.count())
        .filter(|n| !support.contains(n))
        .map(|n| m[n])
        .reduce(f64::min);
    let norm = linalg::norm(&w);
    let mut sol = MaxMarginSolution {
        w_hat: w,
        support,
        degenerate: !zero_coefficient.is_empty(),
        zero_coefficient,
        alpha,
        theta,
        margin: 1.0 / norm,
        dual_unique: face.unique,
        kkt_residual: 0.0,
        borderline,
    };
    sol.kkt_residual = kkt_certificate(&sol, data);
    if sol.kkt_residual > KKT_TOL {
        return Err(Error::NonConvergence {
            msg: format!("KKT residual {:e} above tolerance", sol.kkt_residual),
            best: Some(sol.w_hat.clone()),
        });
    }
    Ok(sol)
}

/// Largest of primal violation, dual negativity, stationarity gap
/// `||w_hat - sum alpha_n x_n||` and complementary slackness gap.
pub fn kkt_certificate(sol: &MaxMarginSolution, data: &Dataset) -> f64 {
    let m = margins(data, &sol.w_hat);
    let primal = m.iter().map(|&v| (1.0 - v).max(0.0)).fold(0.0, f64::max);
    let dual = sol.alpha.iter().map(|&a| (-a).max(0.0)).fold(0.0, f64::max);
    let mut recon = vec![0.0; data.dim()];
    for (n, &a) in sol.alpha.iter().enumerate() {
        for (r, x) in recon.iter_mut().zip(data.column(n)) {
            *r += a * x;
        }
    }
    let stationarity = sol
        .w_hat
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let slackness = sol
        .alpha
        .iter()
        .zip(&m)
        .map(|(&a, &v)| (a * (v - 1.0)).abs())
        .fold(0.0, f64::max);
    primal.max(dual).max(stationarity).max(slackness)
}

/// `min_{n not in S} w_hat^T x_n`.
pub fn nonsupport_theta(sol: &MaxMarginSolution, data: &Dataset) -> Result<f64> {
    let theta = (0..data.count())
        .filter(|n| !sol.support.contains(n))
        .map(|n| linalg::dot(&sol.w_hat, data.column(n)))
        .reduce(f64::min)
        .ok_or_else(|| Error::NotApplicable("every sample is a support vector".into()))?;
    debug_assert!(theta > 1.0 + 1e-10, "non-support margin {theta} too close to 1");
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualPositivity {
    pub unique: bool,
    pub min_alpha_on_support: f64,
}

/// Whether `X_S^T X_S alpha_S = 1` pins down the dual (repeated support points
/// merged into one column) and the smallest coefficient on the support.
pub fn dual_positivity_check(sol: &MaxMarginSolution, data: &Dataset) -> DualPositivity {
    let xs = linalg::select_columns(data.points(), &sol.support);
    let groups = dual::duplicate_groups(&xs);
    let reps: Vec<usize> = groups.iter().map(|g| g[0]).collect();
    let unique = linalg::rank(&linalg::select_columns(&xs, &reps)) == reps.len();
    let min_alpha_on_support = sol
        .support
        .iter()
        .map(|&n| sol.alpha[n])
        .fold(f64::INFINITY, f64::min);
    DualPositivity { unique, min_alpha_on_support }
}

/// Number of distinct support points (exact repeats counted once).
pub fn distinct_support_count(sol: &MaxMarginSolution, data: &Dataset) -> usize {
    let xs = linalg::select_columns(data.points(), &sol.support);
    dual::duplicate_groups(&xs).len()
}
