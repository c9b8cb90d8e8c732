//! Label-folded datasets, separability certificates, CSV interchange and the
//! builtin generators used by the experiments.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::margin;

/// Where a dataset came from. Generator parameters are recorded so that a
/// dataset can be regenerated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Csv { path: String },
    Figure1 { seed: u64, box_lo: f64, box_hi: f64, min_margin: f64, x2_scale: f64 },
    Random { seed: u64, offset: f64 },
    Degenerate3d,
    Custom,
}

/// A `d x N` matrix of label-folded samples (column `n` is `y_n x_n`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
    labels: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Wraps already-folded columns; all labels are recorded as `+1`.
    pub fn from_folded(points: DMatrix<f64>) -> Result<Self> {
        let labels = vec![1.0; points.ncols()];
        Dataset::new(points, labels, Provenance::Custom)
    }

    fn new(points: DMatrix<f64>, labels: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::input("dataset needs d >= 1 and N >= 1"));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite entry in sample {}", pos / points.nrows())));
        }
        Ok(Dataset { points, labels, provenance })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let d = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != d) {
            return Err(Error::input("all samples must have the same dimension"));
        }
        let flat: Vec<f64> = cols.iter().flatten().copied().collect();
        Dataset::from_folded(DMatrix::from_column_slice(d, cols.len(), &flat))
    }

    /// Raw samples with labels in `{-1, +1}`, folded.
    pub fn from_labeled(points: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::input("all samples must have the same dimension"));
        }
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        fold_labels(&DMatrix::from_column_slice(d, points.len(), &flat), labels)
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// Original `+-1` labels, used when writing the unfolded CSV form.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn count(&self) -> usize {
        self.points.ncols()
    }

    /// Folded sample `n`.
    #[inline]
    pub fn column(&self, n: usize) -> &[f64] {
        let d = self.points.nrows();
        &self.points.as_slice()[n * d..(n + 1) * d]
    }

    pub fn sigma_max(&self) -> f64 {
        linalg::sigma_max(&self.points)
    }

    /// Sub-dataset of the given sample indices.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let points = linalg::select_columns(&self.points, idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(points, labels, Provenance::Custom)
    }

    /// Applies a linear map to every sample (labels are kept).
    pub fn map_points(&self, m: &DMatrix<f64>) -> Result<Self> {
        Dataset::new(m * &self.points, self.labels.clone(), Provenance::Custom)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Dataset::new(&self.points * s, self.labels.clone(), Provenance::Custom)
    }

    /// Unfolded column `n` (`x_n = y_n * folded_n`).
    pub fn raw_column(&self, n: usize) -> Vec<f64> {
        self.column(n).iter().map(|v| v * self.labels[n]).collect()
    }
}

/// Folds labels into samples: column `n` becomes `labels[n] * raw[:, n]`.
pub fn fold_labels(raw: &DMatrix<f64>, labels: &[f64]) -> Result<Dataset> {
    if raw.ncols() != labels.len() {
        return Err(Error::input(format!(
            "{} samples but {} labels",
            raw.ncols(),
            labels.len()
        )));
    }
    if let Some((n, y)) = labels.iter().enumerate().find(|(_, &y)| y != 1.0 && y != -1.0) {
        return Err(Error::input(format!("label {y} of sample {n} is not -1 or +1")));
    }
    let mut points = raw.clone();
    for (n, &y) in labels.iter().enumerate() {
        points.column_mut(n).scale_mut(y);
    }
    Dataset::new(points, labels.to_vec(), Provenance::Custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityCertificate {
    pub separable: bool,
    /// When separable, `min_n witness^T x_n >= 1`.
    pub witness: Option<Vec<f64>>,
    pub min_margin: Option<f64>,
}

/// Decides whether `w^T x_n >= 1` is feasible for every sample, using the
/// min-norm-point formulation of the max-margin problem.
pub fn check_separability(data: &Dataset) -> Result<SeparabilityCertificate> {
    match margin::solve_hard_margin(data) {
        Ok(sol) => {
            let min_margin = (0..data.count())
                .map(|n| linalg::dot(&sol.w_hat, data.column(n)))
                .fold(f64::INFINITY, f64::min);
            Ok(SeparabilityCertificate {
                separable: true,
                witness: Some(sol.w_hat),
                min_margin: Some(min_margin),
            })
        }
        Err(Error::Infeasible(_)) => Ok(SeparabilityCertificate {
            separable: false,
            witness: None,
            min_margin: None,
        }),
        Err(Error::NonConvergence { msg, best }) => Err(Error::NonConvergence {
            msg: format!("separability indeterminate: {msg}"),
            best,
        }),
        Err(e) => Err(e),
    }
}

/// Sampling box for the random points of the figure-1 dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Params {
    pub box_lo: f64,
    pub box_hi: f64,
    /// Rejection threshold on `w_hat^T x` for the random points (must exceed 1).
    pub min_margin: f64,
}

impl Default for Figure1Params {
    fn default() -> Self {
        Figure1Params {
            box_lo: 0.0,
            box_hi: 2.0,
            min_margin: 1.4,
        }
    }
}

/// Unnormalized max-margin vector of the figure-1 dataset.
pub const FIGURE1_W_HAT: [f64; 2] = [0.5, 0.5];

/// Four fixed support vectors `(0.5, 1.5)`, `(1.5, 0.5)` and their negatives
/// (labels `+1, +1, -1, -1`) plus six random non-margin points per class.
pub fn make_figure1(seed: u64) -> Dataset {
    make_figure1_with(seed, Figure1Params::default(), 1.0)
}

/// The figure-1 dataset with every second coordinate multiplied by `x2_scale`.
pub fn make_figure1_scaled(seed: u64, x2_scale: f64) -> Dataset {
    make_figure1_with(seed, Figure1Params::default(), x2_scale)
}

pub fn make_figure1_with(seed: u64, params: Figure1Params, x2_scale: f64) -> Dataset {
    assert!(params.min_margin > 1.0, "random points must stay off the margin");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<[f64; 2]> = vec![[0.5, 1.5], [1.5, 0.5], [-0.5, -1.5], [-1.5, -0.5]];
    let mut labels = vec![1.0, 1.0, -1.0, -1.0];
    for class in [1.0, -1.0] {
        let mut drawn = 0;
        while drawn < 6 {
            let p = [
                rng.random_range(params.box_lo..params.box_hi),
                rng.random_range(params.box_lo..params.box_hi),
            ];
            if FIGURE1_W_HAT[0] * p[0] + FIGURE1_W_HAT[1] * p[1] < params.min_margin {
                continue;
            }
            raw.push([class * p[0], class * p[1]]);
            labels.push(class);
            drawn += 1;
        }
    }
    let flat: Vec<f64> = raw.iter().flat_map(|p| [p[0], p[1] * x2_scale]).collect();
    let m = DMatrix::from_column_slice(2, raw.len(), &flat);
    let mut data = fold_labels(&m, &labels).expect("labels are +-1");
    data.provenance = Provenance::Figure1 {
        seed,
        box_lo: params.box_lo,
        box_hi: params.box_hi,
        min_margin: params.min_margin,
        x2_scale,
    };
    data
}

/// Three folded points `(1,1,0)`, `(1,-1,0)`, `(1,0,1)`: all lie on the margin of
/// `w_hat = (1,0,0)` but the third has a zero dual coefficient in every dual optimum.
pub fn make_degenerate3d() -> Dataset {
    let m = DMatrix::from_column_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0, 1.0]);
    let mut data = Dataset::from_folded(m).expect("fixed data");
    data.provenance = Provenance::Degenerate3d;
    data
}

/// Random folded samples with first coordinate in `[offset, offset + 2)` and the
/// remaining coordinates in `[-1, 1)`; separable by `e_1` whenever `offset > 0`.
pub fn make_random(dim: usize, count: usize, seed: u64, offset: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, count, |r, _| {
        if r == 0 {
            offset + 2.0 * rng.random::<f64>()
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let mut data = Dataset::from_folded(m).expect("finite data");
    data.provenance = Provenance::Random { seed, offset };
    data
}

/// Parses `x_1,...,x_d,label` rows with labels in `{-1, 1}`. A first row that
/// does not parse as numbers is treated as a header.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                // Header row.
                width = Some(fields.len());
                continue;
            }
            Err(e) => return Err(Error::Parse { row, msg: format!("non-numeric field: {e}") }),
        };
        if values.len() < 2 {
            return Err(Error::Parse { row, msg: "need at least one feature and a label".into() });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse { row, msg: format!("expected {w} fields, found {}", values.len()) })
            }
            _ => width = Some(values.len()),
        }
        let (x, y) = values.split_at(values.len() - 1);
        if y[0] != 1.0 && y[0] != -1.0 {
            return Err(Error::Parse { row, msg: format!("label {} is not -1 or 1", y[0]) });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { row, msg: "non-finite feature".into() });
        }
        rows.push(x.to_vec());
        labels.push(y[0]);
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, msg: "empty file".into() });
    }
    let d = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let raw = DMatrix::from_column_slice(d, labels.len(), &flat);
    fold_labels(&raw, &labels)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = parse_csv(&text)?;
    data.provenance = Provenance::Csv { path: path.display().to_string() };
    Ok(data)
}

/// Unfolded CSV text with a header row.
pub fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=data.dim()).map(|i| format!("x_{i}")).collect();
    let _ = writeln!(out, "{},label", header.join(","));
    for n in 0..data.count() {
        let raw = data.raw_column(n);
        for v in &raw {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", data.labels()[n] as i64);
    }
    out
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(data)).map_err(|e| Error::io(path, e))
}
