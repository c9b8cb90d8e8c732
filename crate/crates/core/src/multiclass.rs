//! Softmax cross-entropy over `K` linear predictors, the pairwise-difference
//! reduction to a binary problem, and the K-class hard-margin SVM.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::margin::{self, MaxMarginSolution};
use crate::optim::{Objective, Trajectory};
use crate::rates::{fit_bounded, AnalysisOptions, BoundFit};

/// Unfolded points with class labels in `1..=K`. Predictors are stored as
/// `w_flat`, the concatenation of the rows `w_1, ..., w_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassProblem {
    points: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl MulticlassProblem {
    pub fn new(points: DMatrix<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::input(format!("need at least two classes, got {classes}")));
        }
        if points.ncols() == 0 || points.nrows() == 0 {
            return Err(Error::input("empty multiclass dataset"));
        }
        if labels.len() != points.ncols() {
            return Err(Error::input(format!("{} labels for {} points", labels.len(), points.ncols())));
        }
        if let Some((n, &y)) = labels.iter().enumerate().find(|(_, &y)| y == 0 || y > classes) {
            return Err(Error::input(format!("label {y} of sample {n} is outside 1..={classes}")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("points must be finite"));
        }
        Ok(MulticlassProblem { points, labels, classes })
    }

    pub fn from_columns(cols: &[Vec<f64>], labels: Vec<usize>, classes: usize) -> Result<Self> {
        let d = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != d) {
            return Err(Error::input("points have different dimensions"));
        }
        let flat: Vec<f64> = cols.iter().flatten().copied().collect();
        Self::new(DMatrix::from_column_slice(d, cols.len(), &flat), labels, classes)
    }

    /// Two-class problem from a binary dataset: label `+1` becomes class 1 and
    /// `-1` class 2.
    pub fn from_binary(data: &Dataset) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..data.count()).map(|n| data.raw_column(n)).collect();
        let labels = data.labels().iter().map(|&y| if y > 0.0 { 1 } else { 2 }).collect();
        Self::from_columns(&cols, labels, 2)
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn count(&self) -> usize {
        self.points.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// Length of `w_flat`.
    pub fn flat_dim(&self) -> usize {
        self.classes * self.dim()
    }

    fn point(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice()[n * d..(n + 1) * d]
    }

    /// `(n, k)` for every sample and every class `k != y_n`, classes 1-based.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.count())
            .flat_map(|n| (1..=self.classes).filter(move |&k| k != self.labels[n]).map(move |k| (n, k)))
            .collect()
    }

    /// Splits `w_flat` into its `K` rows.
    pub fn rows(&self, w_flat: &[f64]) -> Result<Vec<Vec<f64>>> {
        if w_flat.len() != self.flat_dim() {
            return Err(Error::input(format!("w_flat has length {}, expected {}", w_flat.len(), self.flat_dim())));
        }
        Ok(w_flat.chunks(self.dim()).map(<[f64]>::to_vec).collect())
    }

    /// All transformed vectors as a folded binary dataset, columns in `pairs()` order.
    pub fn transformed(&self) -> Result<Dataset> {
        let cols = self
            .pairs()
            .into_iter()
            .map(|(n, k)| pairwise_transform(self, n, k))
            .collect::<Result<Vec<_>>>()?;
        Dataset::from_columns(&cols)
    }

    /// `1 / (4 sigma_max(X~)^2)`.
    pub fn default_step(&self) -> Result<f64> {
        let s = self.transformed()?.sigma_max();
        if s == 0.0 {
            return Err(Error::DegenerateInput("all points are zero".into()));
        }
        Ok(1.0 / (4.0 * s * s))
    }
}

/// The `Kd`-vector with `+x_n` in block `y_n` and `-x_n` in block `k`.
pub fn pairwise_transform(problem: &MulticlassProblem, n: usize, k: usize) -> Result<Vec<f64>> {
    if n >= problem.count() {
        return Err(Error::input(format!("sample {n} out of range")));
    }
    let y = problem.labels[n];
    if k == y || k == 0 || k > problem.classes {
        return Err(Error::input(format!("class {k} is not a valid competitor for label {y}")));
    }
    let d = problem.dim();
    let mut out = vec![0.0; problem.flat_dim()];
    for (i, &x) in problem.point(n).iter().enumerate() {
        out[(y - 1) * d + i] = x;
        out[(k - 1) * d + i] = -x;
    }
    Ok(out)
}

fn scores(problem: &MulticlassProblem, w_flat: &[f64], n: usize, out: &mut [f64]) -> Result<()> {
    let x = problem.point(n);
    for (k, s) in out.iter_mut().enumerate() {
        *s = linalg::dot(&w_flat[k * problem.dim()..(k + 1) * problem.dim()], x);
    }
    if out.iter().any(|s| !s.is_finite()) {
        return Err(Error::Overflow { sample: n, msg: "non-finite class score".into() });
    }
    Ok(())
}

fn argmax(s: &[f64]) -> (usize, f64) {
    s.iter().enumerate().fold((0, f64::NEG_INFINITY), |(i, m), (k, &v)| if v > m { (k, v) } else { (i, m) })
}

fn check_flat(problem: &MulticlassProblem, w_flat: &[f64]) -> Result<()> {
    if w_flat.len() != problem.flat_dim() {
        return Err(Error::input(format!("w_flat has length {}, expected {}", w_flat.len(), problem.flat_dim())));
    }
    Ok(())
}

/// `sum_n [logsumexp_k(w_k^T x_n) - w_{y_n}^T x_n]`.
pub fn ce_loss(problem: &MulticlassProblem, w_flat: &[f64]) -> Result<f64> {
    check_flat(problem, w_flat)?;
    let mut s = vec![0.0; problem.classes];
    let mut total = 0.0;
    for n in 0..problem.count() {
        scores(problem, w_flat, n, &mut s)?;
        let y = problem.labels[n] - 1;
        let (top, max) = argmax(&s);
        // Summing only the non-maximal terms keeps log1p accurate for large gaps.
        let rest: f64 = s.iter().enumerate().filter(|&(k, _)| k != top).map(|(_, v)| (v - max).exp()).sum();
        total += (max - s[y]) + rest.ln_1p();
    }
    Ok(total)
}

fn ce_gradient_into(problem: &MulticlassProblem, w_flat: &[f64], batch: Option<&[usize]>, out: &mut [f64]) -> Result<()> {
    check_flat(problem, w_flat)?;
    out.iter_mut().for_each(|o| *o = 0.0);
    let d = problem.dim();
    let mut s = vec![0.0; problem.classes];
    let mut add = |n: usize| -> Result<()> {
        scores(problem, w_flat, n, &mut s)?;
        let (_, max) = argmax(&s);
        for v in s.iter_mut() {
            *v = (*v - max).exp();
        }
        let z: f64 = s.iter().sum();
        let y = problem.labels[n] - 1;
        // 1 - p_y as the sum of the competing probabilities, exact in the tail.
        let others: f64 = s.iter().enumerate().filter(|&(k, _)| k != y).map(|(_, v)| v).sum();
        let x = problem.point(n);
        for (k, e) in s.iter().enumerate() {
            let coef = if k == y { -others / z } else { e / z };
            if coef != 0.0 {
                for (o, xi) in out[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *o += coef * xi;
                }
            }
        }
        Ok(())
    };
    match batch {
        Some(idx) => idx.iter().try_for_each(|&n| add(n)),
        None => (0..problem.count()).try_for_each(add),
    }
}

/// Gradient of `ce_loss` with respect to `w_flat`; block `k` is
/// `sum_n (p_{n,k} - [k = y_n]) x_n`.
pub fn ce_gradient(problem: &MulticlassProblem, w_flat: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; problem.flat_dim()];
    ce_gradient_into(problem, w_flat, None, &mut g)?;
    Ok(g)
}

/// Cross-entropy as an optimizer objective over `w_flat`.
#[derive(Debug, Clone, Copy)]
pub struct CrossEntropyObjective<'a>(pub &'a MulticlassProblem);

impl Objective for CrossEntropyObjective<'_> {
    fn dim(&self) -> usize {
        self.0.flat_dim()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    fn loss(&self, w: &[f64]) -> Result<f64> {
        ce_loss(self.0, w)
    }

    fn gradient_into(&self, w: &[f64], batch: Option<&[usize]>, out: &mut [f64]) -> Result<()> {
        ce_gradient_into(self.0, w, batch, out)
    }

    fn name(&self) -> String {
        "cross-entropy".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KClassSvmSolution {
    /// Rows `w_hat_1, ..., w_hat_K`.
    pub w_hat: Vec<Vec<f64>>,
    /// `(n, k)` pairs with `(w_hat_{y_n} - w_hat_k)^T x_n = 1`, classes 1-based.
    pub support_pairs: Vec<(usize, usize)>,
    /// Coefficients aligned with `MulticlassProblem::pairs()`.
    pub alpha: Vec<f64>,
    pub kkt_residual: f64,
    pub binary: MaxMarginSolution,
}

impl KClassSvmSolution {
    pub fn w_flat(&self) -> Vec<f64> {
        self.w_hat.iter().flatten().copied().collect()
    }
}

/// `min sum_k ||w_k||^2` s.t. `(w_{y_n} - w_k)^T x_n >= 1` for all `k != y_n`,
/// solved as the binary hard-margin problem over the transformed vectors.
pub fn solve_kclass_svm(problem: &MulticlassProblem) -> Result<KClassSvmSolution> {
    let xt = problem.transformed()?;
    let sol = margin::solve_hard_margin(&xt).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible("the K-class margin constraints are infeasible".into()),
        other => other,
    })?;
    let pairs = problem.pairs();
    let w_hat = problem.rows(&sol.w_hat)?;
    Ok(KClassSvmSolution {
        w_hat,
        support_pairs: sol.support.iter().map(|&j| pairs[j]).collect(),
        alpha: sol.alpha.clone(),
        kkt_residual: sol.kkt_residual,
        binary: sol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassBias {
    pub times: Vec<f64>,
    /// `||w_k(t) - w_hat_k log t||` per class, indexed `[k][checkpoint]`.
    pub class_residuals: Vec<Vec<f64>>,
    pub fits: Vec<BoundFit>,
}

impl MulticlassBias {
    pub fn all_bounded(&self) -> bool {
        self.fits.iter().all(|f| f.bounded)
    }
}

/// Per-class residual series of a trajectory over `w_flat`, each checked
/// with `fit_bounded` over checkpoints from `opts.fit_from` on.
pub fn multiclass_bias_check(traj: &Trajectory, svm: &KClassSvmSolution, opts: AnalysisOptions) -> Result<MulticlassBias> {
    let k = svm.w_hat.len();
    let d = svm.w_hat.first().map_or(0, Vec::len);
    if traj.dim() != k * d {
        return Err(Error::input(format!("trajectory dimension {} differs from K d = {}", traj.dim(), k * d)));
    }
    let mut times = Vec::new();
    let mut class_residuals = vec![Vec::new(); k];
    for c in traj.checkpoints.iter().filter(|c| c.t >= 1) {
        let lt = (c.t as f64).ln();
        times.push(c.t as f64);
        for (j, row) in svm.w_hat.iter().enumerate() {
            let r = c.w[j * d..(j + 1) * d]
                .iter()
                .zip(row)
                .map(|(w, h)| (w - h * lt).powi(2))
                .sum::<f64>()
                .sqrt();
            class_residuals[j].push(r);
        }
    }
    let fits = class_residuals
        .iter()
        .map(|series| {
            let pairs: Vec<(f64, f64)> = times
                .iter()
                .copied()
                .zip(series.iter().copied())
                .filter(|&(t, _)| t >= opts.fit_from)
                .collect();
            fit_bounded(&pairs, crate::rates::Transform::Raw, opts.tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassBias { times, class_residuals, fits })
}

/// Nine points in the plane, three per class in a narrow wedge around the
/// directions at 0, 120 and 240 degrees, at radius about 0.5.
pub fn make_multiclass_toy() -> MulticlassProblem {
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for k in 0..3 {
        let base = k as f64 * 2.0 * std::f64::consts::PI / 3.0;
        for (j, (dt, r)) in [(-0.1, 0.475), (0.0, 0.5), (0.1, 0.4875)].into_iter().enumerate() {
            let a = base + dt + 0.05 * j as f64;
            cols.push(vec![r * a.cos(), r * a.sin()]);
            labels.push(k + 1);
        }
    }
    MulticlassProblem::from_columns(&cols, labels, 3).expect("fixed data")
}

/// `x_1,...,x_d,label` rows with a header, readable by `parse_multiclass_csv`.
pub fn multiclass_to_csv(problem: &MulticlassProblem) -> String {
    let header: Vec<String> = (1..=problem.dim()).map(|i| format!("x_{i}")).collect();
    let mut out = format!("{},label\n", header.join(","));
    for n in 0..problem.count() {
        for v in problem.point(n) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", problem.labels[n]));
    }
    out
}

/// Parses `x_1,...,x_d,label` rows with integer labels in `1..=K`; `K` is the
/// largest label present. A non-numeric first row is a header.
pub fn parse_multiclass_csv(text: &str) -> Result<MulticlassProblem> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let vals = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Parse { row, msg: "non-numeric field".into() }),
        };
        if vals.len() < 2 {
            return Err(Error::Parse { row, msg: "need at least one coordinate and a label".into() });
        }
        let (x, y) = vals.split_at(vals.len() - 1);
        if cols.first().is_some_and(|c: &Vec<f64>| c.len() != x.len()) {
            return Err(Error::Parse { row, msg: "ragged row".into() });
        }
        let y = y[0];
        if y.fract() != 0.0 || y < 1.0 {
            return Err(Error::Parse { row, msg: format!("label {y} is not an integer >= 1") });
        }
        cols.push(x.to_vec());
        labels.push(y as usize);
    }
    if cols.is_empty() {
        return Err(Error::input("no data rows"));
    }
    let k = labels.iter().copied().max().unwrap_or(0).max(2);
    MulticlassProblem::from_columns(&cols, labels, k)
}

pub fn load_multiclass_csv(path: &Path) -> Result<MulticlassProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_multiclass_csv(&text)
}
