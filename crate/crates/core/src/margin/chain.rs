//! Recursive max-margin decomposition for datasets whose support vectors carry
//! zero dual coefficients.
//!
//! Level `m` solves the max-margin problem for the zero-coefficient points of
//! level `m - 1`, projected away from every positive-coefficient support vector
//! found so far. The recursion stops at the first level without
//! zero-coefficient points.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

use super::solve_hard_margin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLevel {
    pub m: usize,
    pub w_hat: Vec<f64>,
    /// Margin points with a positive coefficient in some dual solution (`S_m`).
    pub support: Vec<usize>,
    /// Margin points with zero coefficient in every dual solution (`S_bar_m`).
    pub zero_coefficient: Vec<usize>,
    /// Points strictly above the margin at this level (`S_m^+`).
    pub nonsupport: Vec<usize>,
    /// Rows of the projector `P_bar_m` onto the orthogonal complement of all
    /// positive-coefficient support vectors up to this level.
    pub p_bar: Vec<Vec<f64>>,
}

impl ChainLevel {
    pub fn p_bar_matrix(&self) -> DMatrix<f64> {
        let d = self.p_bar.len();
        DMatrix::from_fn(d, d, |r, c| self.p_bar[r][c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateChain {
    pub levels: Vec<ChainLevel>,
}

impl DegenerateChain {
    /// Depth `M`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn w_hats(&self) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| l.w_hat.clone()).collect()
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

pub fn degenerate_chain(data: &Dataset) -> Result<DegenerateChain> {
    let d = data.dim();
    let mut active: Vec<usize> = (0..data.count()).collect();
    let mut p_bar = DMatrix::<f64>::identity(d, d);
    let mut consumed: Vec<usize> = Vec::new();
    let mut levels = Vec::new();
    for m in 1..=d + 1 {
        let projected = data.subset(&active)?.map_points(&p_bar)?;
        let sol = solve_hard_margin(&projected)?;
        let support: Vec<usize> = sol
            .support
            .iter()
            .filter(|k| !sol.zero_coefficient.contains(k))
            .map(|&k| active[k])
            .collect();
        let zero: Vec<usize> = sol.zero_coefficient.iter().map(|&k| active[k]).collect();
        let nonsupport: Vec<usize> = (0..active.len())
            .filter(|k| !sol.support.contains(k))
            .map(|k| active[k])
            .collect();
        consumed.extend(&support);
        p_bar = linalg::complement_projector(&linalg::select_columns(data.points(), &consumed));
        levels.push(ChainLevel {
            m,
            w_hat: sol.w_hat.clone(),
            support,
            zero_coefficient: zero.clone(),
            nonsupport,
            p_bar: to_rows(&p_bar),
        });
        if zero.is_empty() {
            return Ok(DegenerateChain { levels });
        }
        active = zero;
    }
    Err(Error::NonConvergence {
        msg: "degenerate chain exceeded the dimension bound".into(),
        best: None,
    })
}
