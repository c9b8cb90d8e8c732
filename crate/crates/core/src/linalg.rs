//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for ranks, pseudoinverses and range bases.
pub const RANK_CUTOFF: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

type Svd = (DMatrix<f64>, DVector<f64>, DMatrix<f64>);

/// Thin SVD `(u, s, v_t)` whose reconstruction has been checked.
///
/// nalgebra's default convergence test can stop early on matrices with
/// repeated singular values, leaving `u s v_t` visibly different from `m`.
/// Retries on the transpose and with a tighter threshold, keeping the best.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let accept = 1e-12 * scale * (m.nrows().max(m.ncols()) as f64);
    let mut best: Option<(f64, Svd)> = None;
    for attempt in 0..3 {
        let parts = match attempt {
            0 => m.clone().svd(true, true).into_parts(false),
            1 => m
                .transpose()
                .svd(true, true)
                .into_parts(true),
            _ => m
                .clone()
                .try_svd(true, true, 1e-17, 10_000)
                .and_then(|s| s.into_parts(false)),
        };
        let Some((u, s, vt)) = parts else { continue };
        let err = (&u * DMatrix::from_diagonal(&s) * &vt - m).amax();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, (u, s, vt)));
        }
        if err <= accept {
            break;
        }
    }
    best.expect("at least one SVD attempt succeeds").1
}

trait Parts {
    fn into_parts(self, transposed: bool) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)>;
}

impl Parts for nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    fn into_parts(self, transposed: bool) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        let (u, vt) = (self.u?, self.v_t?);
        if transposed {
            Some((vt.transpose(), self.singular_values, u.transpose()))
        } else {
            Some((u, self.singular_values, vt))
        }
    }
}

/// Largest singular value of `m`.
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).1.max()
}

/// Orthonormal basis (as columns) of the column space of `m`, dropping
/// singular values below `RANK_CUTOFF * sigma_max`.
pub fn range_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let (u, s, _) = svd(m);
    let smax = s.max();
    if smax <= 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> = s
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_CUTOFF * smax)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    range_basis(m).ncols()
}

/// Moore-Penrose pseudoinverse with the relative cutoff `RANK_CUTOFF * sigma_max`.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let (u, sv, vt) = svd(m);
    let smax = sv.max();
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in sv.iter().enumerate() {
        if smax > 0.0 && s > RANK_CUTOFF * smax {
            let vk = vt.row(k).transpose();
            let uk = u.column(k);
            out += (vk * uk.transpose()) / s;
        }
    }
    out
}

/// Orthogonal projector onto the column space of `m`.
pub fn range_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let b = range_basis(m);
    &b * b.transpose()
}

/// Orthogonal projector onto the orthogonal complement of the column space of `m`.
pub fn complement_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(m.nrows(), m.nrows()) - range_projector(m)
}

/// Columns of `m` selected by `idx`, in order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
