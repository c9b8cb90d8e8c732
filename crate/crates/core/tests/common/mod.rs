#![allow(dead_code)]

use maxmargin::data::Dataset;
use maxmargin::linalg;
use nalgebra::DVector;

/// Minimum-norm `w` over all subsets `S` of size at most `d` with `X_S^T w = 1`
/// that classify every point with margin at least one.
pub fn brute_force(data: &Dataset) -> Vec<f64> {
    let (d, n) = (data.dim(), data.count());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > d {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let xs = linalg::select_columns(data.points(), &idx);
        let w = linalg::pinv(&xs.transpose()) * DVector::from_element(idx.len(), 1.0);
        let consistent = idx.iter().all(|&i| (linalg::dot(data.column(i), w.as_slice()) - 1.0).abs() < 1e-9);
        let feasible = (0..n).all(|i| linalg::dot(data.column(i), w.as_slice()) >= 1.0 - 1e-9);
        if consistent && feasible && best.as_ref().is_none_or(|(b, _)| w.norm() < *b) {
            best = Some((w.norm(), linalg::to_vec(&w)));
        }
    }
    best.expect("separable instance").1
}

pub fn margin_set(data: &Dataset, w: &[f64]) -> Vec<usize> {
    (0..data.count()).filter(|&i| linalg::dot(data.column(i), w) <= 1.0 + 1e-6).collect()
}

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-6;

pub fn central_difference(f: impl Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let (mut p, mut m) = (w.to_vec(), w.to_vec());
            p[i] += H;
            m[i] -= H;
            (f(&p) - f(&m)) / (2.0 * H)
        })
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest gap between `full_gradient` and central differences on random instance `seed`.
pub fn binary_fd_error(seed: u64) -> f64 {
    use maxmargin::losses::LossSpec;
    use maxmargin::optim::{full_gradient, BinaryObjective, Objective};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = 2 + seed as usize % 3;
    let data = maxmargin::data::make_random(d, 5 + seed as usize % 4, seed, 0.2);
    let loss = if seed.is_multiple_of(2) { LossSpec::logistic() } else { LossSpec::exp() };
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let obj = BinaryObjective { loss: &loss, data: &data };
    let fd = central_difference(|v| obj.loss(v).unwrap(), &w);
    max_diff(&full_gradient(&loss, &data, &w).unwrap(), &fd)
}

/// Largest gap between `ce_gradient` and central differences on random instance `seed`.
pub fn ce_fd_error(seed: u64) -> f64 {
    use maxmargin::multiclass::{ce_gradient, ce_loss, MulticlassProblem};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
    let (d, k, n) = (2 + seed as usize % 2, 2 + seed as usize % 3, 6);
    let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|i| 1 + i % k).collect();
    let p = MulticlassProblem::from_columns(&cols, labels, k).unwrap();
    let w: Vec<f64> = (0..d * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fd = central_difference(|v| ce_loss(&p, v).unwrap(), &w);
    max_diff(&ce_gradient(&p, &w).unwrap(), &fd)
}

pub struct OracleCase {
    pub label: String,
    pub data: Dataset,
}

/// 25 random separable instances with `d` in {2, 3} and `N` in 4..=8.
pub fn oracle_cases() -> Vec<OracleCase> {
    (0..25u64)
        .map(|i| {
            let d = 2 + (i % 2) as usize;
            let n = 4 + (i % 5) as usize;
            OracleCase {
                label: format!("d={d} N={n} seed={i}"),
                data: maxmargin::data::make_random(d, n, 100 + i, 0.1 + 0.04 * i as f64),
            }
        })
        .collect()
}
