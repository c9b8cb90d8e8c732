//! Wolfe's nearest-point algorithm for the convex hull of a finite point set.
//!
//! For folded data the hard-margin problem `min ||w||^2 s.t. w^T x_n >= 1` is
//! equivalent to finding the point `z` of `conv{x_n}` closest to the origin:
//! `w_hat = z / ||z||^2` and the barycentric weights scaled by `1/||z||^2` are a
//! dual solution. The origin lies in the hull exactly when the data is not
//! separable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

const Z1: f64 = 1e-13;
const Z2: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NearestPoint {
    pub point: Vec<f64>,
    /// Barycentric weights, one per input column, summing to one.
    pub weights: Vec<f64>,
    pub sq_norm: f64,
}

/// Minimizer of `||sum_i v_i p_i||` over the affine hull of the selected columns.
fn affine_minimizer(points: &DMatrix<f64>, set: &[usize]) -> Vec<f64> {
    let k = set.len();
    if k == 1 {
        return vec![1.0];
    }
    let xs = linalg::select_columns(points, set);
    let gram = xs.transpose() * &xs;
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    kkt.view_mut((0, 0), (k, k)).copy_from(&gram);
    for i in 0..k {
        kkt[(i, k)] = 1.0;
        kkt[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = match kkt.clone().lu().solve(&rhs) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => linalg::pinv(&kkt) * rhs,
    };
    let v: Vec<f64> = sol.iter().take(k).copied().collect();
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

fn combine(points: &DMatrix<f64>, set: &[usize], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points.nrows()];
    for (&j, &wj) in set.iter().zip(w) {
        for (xi, pi) in x.iter_mut().zip(points.column(j).iter()) {
            *xi += wj * pi;
        }
    }
    x
}

/// Nearest point to the origin of the convex hull of the columns of `points`.
pub fn nearest_point(points: &DMatrix<f64>) -> Result<NearestPoint> {
    let n = points.ncols();
    if n == 0 {
        return Err(Error::input("no points"));
    }
    let sq: Vec<f64> = (0..n).map(|j| points.column(j).norm_squared()).collect();
    let scale = sq.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Infeasible("all samples are zero".into()));
    }
    let first = (0..n).min_by(|&a, &b| sq[a].total_cmp(&sq[b])).expect("n > 0");
    let mut set = vec![first];
    let mut w = vec![1.0];
    let mut x = points.column(first).iter().copied().collect::<Vec<_>>();

    let max_major = 100 * (n + points.nrows()) + 100;
    let mut converged = false;
    for _ in 0..max_major {
        let xx = linalg::norm(&x).powi(2);
        if xx <= 1e-28 * scale {
            converged = true;
            break;
        }
        let (j, xpj) = (0..n)
            .map(|j| (j, points.column(j).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("n > 0");
        if xpj > xx - Z1 * scale || set.contains(&j) {
            converged = true;
            break;
        }
        set.push(j);
        w.push(0.0);

        let mut minor_ok = false;
        for _ in 0..=points.nrows() + set.len() + 1 {
            let v = affine_minimizer(points, &set);
            if v.iter().all(|&vi| vi > Z2) {
                w = v;
                x = combine(points, &set, &w);
                minor_ok = true;
                break;
            }
            // Move towards the affine minimizer until a weight hits zero.
            let theta = w
                .iter()
                .zip(&v)
                .filter(|(_, &vi)| vi <= Z2)
                .map(|(&wi, &vi)| if wi - vi > 0.0 { wi / (wi - vi) } else { 0.0 })
                .fold(1.0, f64::min)
                .clamp(0.0, 1.0);
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = (1.0 - theta) * *wi + theta * vi;
            }
            let mut keep_set = Vec::with_capacity(set.len());
            let mut keep_w = Vec::with_capacity(set.len());
            // Drop at least the weight that reached zero.
            let drop = w
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("nonempty");
            for (i, (&j, &wi)) in set.iter().zip(&w).enumerate() {
                if wi > Z2 && i != drop {
                    keep_set.push(j);
                    keep_w.push(wi);
                }
            }
            let total: f64 = keep_w.iter().sum();
            set = keep_set;
            w = keep_w.iter().map(|v| v / total).collect();
            x = combine(points, &set, &w);
        }
        if !minor_ok {
            return Err(Error::NonConvergence {
                msg: "nearest-point minor cycle did not terminate".into(),
                best: Some(x),
            });
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            msg: "nearest-point major cycle limit reached".into(),
            best: Some(x),
        });
    }
    let mut weights = vec![0.0; n];
    for (&j, &wj) in set.iter().zip(&w) {
        weights[j] += wj;
    }
    let sq_norm = linalg::norm(&x).powi(2);
    Ok(NearestPoint { point: x, weights, sq_norm })
}
