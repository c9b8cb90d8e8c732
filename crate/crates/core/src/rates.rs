//! Convergence-rate series along a trajectory, boundedness fits and verdicts.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::LossSpec;
use crate::margin::{DegenerateChain, MaxMarginSolution, ResidualOffset};
use crate::optim::Trajectory;

fn nonzero_norm(w: &[f64]) -> Result<f64> {
    let n = linalg::norm(w);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::input("gap is undefined for a zero or non-finite weight vector"));
    }
    Ok(n)
}

/// `|| w/||w|| - w_hat/||w_hat|| ||`.
pub fn direction_gap(w: &[f64], w_hat: &[f64]) -> Result<f64> {
    if w.len() != w_hat.len() {
        return Err(Error::input("dimension mismatch"));
    }
    let (a, b) = (nonzero_norm(w)?, nonzero_norm(w_hat)?);
    Ok(w.iter().zip(w_hat).map(|(x, y)| (x / a - y / b).powi(2)).sum::<f64>().sqrt())
}

/// `1 - cos(w, w_hat)`.
pub fn angle_gap(w: &[f64], w_hat: &[f64]) -> Result<f64> {
    if w.len() != w_hat.len() {
        return Err(Error::input("dimension mismatch"));
    }
    let (a, b) = (nonzero_norm(w)?, nonzero_norm(w_hat)?);
    Ok(1.0 - linalg::dot(w, w_hat) / (a * b))
}

/// `1/||w_hat|| - min_n x_n^T w / ||w||`.
pub fn margin_gap(w: &[f64], data: &Dataset, w_hat: &[f64]) -> Result<f64> {
    if w.len() != data.dim() || w_hat.len() != data.dim() {
        return Err(Error::input("dimension mismatch"));
    }
    let (a, b) = (nonzero_norm(w)?, nonzero_norm(w_hat)?);
    let min = (0..data.count())
        .map(|n| linalg::dot(w, data.column(n)))
        .fold(f64::INFINITY, f64::min);
    Ok(1.0 / b - min / a)
}

/// `t L(w(t))`.
pub fn scaled_loss(t: f64, loss_value: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::input(format!("scaled loss needs t >= 1, got {t}")));
    }
    Ok(t * loss_value)
}

/// `log` applied `m` times; `None` unless every intermediate value exceeds 1.
pub fn iterated_log(t: f64, m: usize) -> Option<f64> {
    let mut x = t;
    for _ in 0..m {
        if !(x > 1.0) {
            return None;
        }
        x = x.ln();
    }
    (m == 0 || x > 1.0).then_some(x)
}

/// Per-checkpoint scalars, checkpoints with `t >= 1` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub times: Vec<f64>,
    pub direction_gap: Vec<f64>,
    pub angle_gap: Vec<f64>,
    pub margin_gap: Vec<f64>,
    pub scaled_loss: Vec<f64>,
    /// `||w(t)|| - ||w_hat|| log t`.
    pub norm_minus_log: Vec<f64>,
    /// `||w(t) - w_hat log t||`.
    pub rho_norm: Vec<f64>,
    /// `||w(t) - w_hat log t - w_tilde||` when the offset is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<Vec<f64>>,
    /// `||w(t) - sum_m w_hat_m log^m t||`, absent before the iterated logs exceed 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_residual_norm: Option<Vec<Option<f64>>>,
    pub degenerate: bool,
}

impl RateSeries {
    /// `(t, value)` pairs of the named quantity, absent entries skipped.
    pub fn pairs(&self, quantity: &str) -> Result<Vec<(f64, f64)>> {
        let zip = |v: &[f64]| self.times.iter().copied().zip(v.iter().copied()).collect();
        Ok(match quantity {
            "direction_gap" => zip(&self.direction_gap),
            "angle_gap" => zip(&self.angle_gap),
            "margin_gap" => zip(&self.margin_gap),
            "scaled_loss" => zip(&self.scaled_loss),
            "norm_minus_log" => zip(&self.norm_minus_log),
            "rho_norm" => zip(&self.rho_norm),
            "residual_norm" => zip(self.residual_norm.as_deref().ok_or_else(|| missing(quantity))?),
            "chain_residual_norm" => self
                .times
                .iter()
                .zip(self.chain_residual_norm.as_ref().ok_or_else(|| missing(quantity))?)
                .filter_map(|(&t, v)| v.map(|v| (t, v)))
                .collect(),
            _ => return Err(Error::input(format!("unknown quantity '{quantity}'"))),
        })
    }
}

fn missing(q: &str) -> Error {
    Error::NotApplicable(format!("series '{q}' was not computed"))
}

pub fn residual_series(
    traj: &Trajectory,
    data: &Dataset,
    sol: &MaxMarginSolution,
    offset: Option<&ResidualOffset>,
    chain: Option<&DegenerateChain>,
) -> Result<RateSeries> {
    let d = data.dim();
    if traj.dim() != d || sol.w_hat.len() != d || offset.is_some_and(|o| o.w_tilde.len() != d) {
        return Err(Error::input("trajectory, dataset and solution dimensions differ"));
    }
    if sol.degenerate && chain.is_none() {
        return Err(Error::input("degenerate solutions need the chain decomposition"));
    }
    if let Some(c) = chain {
        if c.levels.iter().any(|l| l.w_hat.len() != d) {
            return Err(Error::input("chain dimension differs from the dataset"));
        }
    }
    let w_hat = &sol.w_hat;
    let w_hat_norm = linalg::norm(w_hat);
    let mut s = RateSeries {
        times: Vec::new(),
        direction_gap: Vec::new(),
        angle_gap: Vec::new(),
        margin_gap: Vec::new(),
        scaled_loss: Vec::new(),
        norm_minus_log: Vec::new(),
        rho_norm: Vec::new(),
        residual_norm: offset.map(|_| Vec::new()),
        chain_residual_norm: chain.map(|_| Vec::new()),
        degenerate: sol.degenerate,
    };
    let diff_norm = |w: &[f64], sub: &[f64]| w.iter().zip(sub).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    for c in traj.checkpoints.iter().filter(|c| c.t >= 1) {
        let t = c.t as f64;
        let lt = t.ln();
        let w = &c.w;
        s.times.push(t);
        s.direction_gap.push(direction_gap(w, w_hat)?);
        s.angle_gap.push(angle_gap(w, w_hat)?);
        s.margin_gap.push(margin_gap(w, data, w_hat)?);
        s.scaled_loss.push(scaled_loss(t, c.loss)?);
        s.norm_minus_log.push(linalg::norm(w) - w_hat_norm * lt);
        let base: Vec<f64> = w_hat.iter().map(|v| v * lt).collect();
        s.rho_norm.push(diff_norm(w, &base));
        if let (Some(o), Some(r)) = (offset, s.residual_norm.as_mut()) {
            let pred: Vec<f64> = base.iter().zip(&o.w_tilde).map(|(a, b)| a + b).collect();
            r.push(diff_norm(w, &pred));
        }
        if let (Some(ch), Some(r)) = (chain, s.chain_residual_norm.as_mut()) {
            let mut pred = vec![0.0; d];
            let mut ok = true;
            for (m, level) in ch.levels.iter().enumerate() {
                match iterated_log(t, m + 1) {
                    Some(l) => pred.iter_mut().zip(&level.w_hat).for_each(|(p, v)| *p += v * l),
                    None => ok = false,
                }
            }
            r.push(ok.then(|| diff_norm(w, &pred)));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Raw,
    TimesLogt,
    TimesLog2t,
    TimesT,
    /// `value * log t / log log t`.
    TimesLogtOverLoglogt,
}

impl Transform {
    pub fn apply(self, t: f64, v: f64) -> f64 {
        let lt = t.ln();
        match self {
            Transform::Raw => v,
            Transform::TimesLogt => v * lt,
            Transform::TimesLog2t => v * lt * lt,
            Transform::TimesT => v * t,
            Transform::TimesLogtOverLoglogt => v * lt / lt.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundTolerance {
    pub kappa: f64,
    pub slack: f64,
}

impl Default for BoundTolerance {
    fn default() -> Self {
        BoundTolerance { kappa: 1.5, slack: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub sup_first_decade: f64,
    pub sup_last_decade: f64,
    /// `max - min` of the transformed series over the last decade.
    pub last_decade_oscillation: f64,
    /// Transformed magnitude never increases across the last decade.
    pub monotone_tail: bool,
    pub bounded: bool,
}

/// Compares the supremum of `|transform(t, value)|` over the last decade of
/// `t` with the supremum over the first decade.
pub fn fit_bounded(series: &[(f64, f64)], transform: Transform, tol: BoundTolerance) -> Result<BoundFit> {
    if series.len() < 10 {
        return Err(Error::input(format!("need at least 10 points, got {}", series.len())));
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(t, _)| (lo.min(t), hi.max(t)));
    if !(lo > 1.0 || transform == Transform::Raw || transform == Transform::TimesT) || !(lo > 0.0) {
        return Err(Error::input("log transforms need t > 1"));
    }
    if transform == Transform::TimesLogtOverLoglogt && !(lo > std::f64::consts::E) {
        return Err(Error::input("log t / log log t transform needs t > e"));
    }
    if hi < 100.0 * lo {
        return Err(Error::input(format!("series spans less than two decades ({lo}..{hi})")));
    }
    let tr: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, transform.apply(t, v))).collect();
    if tr.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::input("series has non-finite entries"));
    }
    let sup = |a: f64, b: f64| tr.iter().filter(|(t, _)| *t >= a && *t <= b).map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let sup_first = sup(lo, 10.0 * lo);
    let sup_last = sup(hi / 10.0, hi);
    let tail: Vec<f64> = tr.iter().filter(|(t, _)| *t >= hi / 10.0).map(|(_, v)| *v).collect();
    let osc = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    let monotone_tail = tail.windows(2).all(|p| p[1].abs() <= p[0].abs());
    Ok(BoundFit {
        sup_first_decade: sup_first,
        sup_last_decade: sup_last,
        last_decade_oscillation: osc,
        monotone_tail,
        bounded: sup_last <= tol.kappa * sup_first + tol.slack,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn regression_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::input("regression needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("regression abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSlope {
    /// Slope of the validation loss against `log t` over the last two decades.
    pub slope: f64,
    /// `min_x w_hat^T x` over the validation set.
    pub worst_margin: f64,
}

/// Growth of `sum_{x in V} l(w(t)^T x)` on validation points that `w_hat`
/// misclassifies. `val_data` is folded, like the training set.
pub fn validation_loss_slope(
    traj: &Trajectory,
    val_data: &Dataset,
    loss: &LossSpec,
    w_hat: &[f64],
) -> Result<ValidationSlope> {
    if val_data.dim() != traj.dim() || w_hat.len() != traj.dim() {
        return Err(Error::input("validation data dimension differs from the trajectory"));
    }
    let worst = (0..val_data.count())
        .map(|n| linalg::dot(w_hat, val_data.column(n)))
        .fold(f64::INFINITY, f64::min);
    if !(worst < 0.0) {
        return Err(Error::NotApplicable(
            "every validation point is classified correctly by w_hat; its loss decreases".into(),
        ));
    }
    let hi = traj.final_t as f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for c in traj.window(hi / 100.0, hi).filter(|c| c.t >= 1) {
        let l: f64 = (0..val_data.count())
            .map(|n| loss.value_unchecked(linalg::dot(&c.w, val_data.column(n))))
            .sum();
        xs.push((c.t as f64).ln());
        ys.push(l);
    }
    Ok(ValidationSlope { slope: regression_slope(&xs, &ys)?, worst_margin: worst })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityFit {
    pub quantity: String,
    pub transform: Transform,
    #[serde(flatten)]
    pub fit: BoundFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub options: AnalysisOptions,
    pub fits: Vec<QuantityFit>,
    pub verdicts: Vec<Verdict>,
}

impl RateReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Limit of `max - min` of the offset residual over the last decade.
pub const RESIDUAL_OSCILLATION_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default)]
    pub tolerance: BoundTolerance,
    /// Checkpoints before this time are left out of the fits; the rates are
    /// asymptotic and the first steps are spent leaving the linear regime of
    /// the loss.
    #[serde(default = "default_fit_from")]
    pub fit_from: f64,
}

fn default_fit_from() -> f64 {
    100.0
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { tolerance: BoundTolerance::default(), fit_from: default_fit_from() }
    }
}

/// Fits every applicable quantity and derives the verdicts.
///
/// Non-degenerate series check `t L`, `margin_gap log t`, `angle_gap log^2 t`,
/// `||w|| - ||w_hat|| log t` and the boundedness of `w(t) - w_hat log t`; with
/// an offset also its convergence. Degenerate series replace the angle rate by
/// `direction_gap log t / log log t` and check the chain residual.
pub fn analyze(series: &RateSeries, opts: AnalysisOptions) -> Result<RateReport> {
    let tol = opts.tolerance;
    let windowed = |q: &str| -> Result<Vec<(f64, f64)>> {
        let mut p = series.pairs(q)?;
        p.retain(|&(t, _)| t >= opts.fit_from);
        Ok(p)
    };
    let mut plan = vec![
        ("scaled_loss", Transform::Raw, "loss_rate"),
        ("margin_gap", Transform::TimesLogt, "margin_rate"),
        ("norm_minus_log", Transform::Raw, "norm_rate"),
    ];
    if series.degenerate {
        plan.push(("direction_gap", Transform::TimesLogtOverLoglogt, "direction_rate"));
        plan.push(("chain_residual_norm", Transform::Raw, "chain_residual_bounded"));
    } else {
        plan.push(("angle_gap", Transform::TimesLog2t, "angle_rate"));
        plan.push(("rho_norm", Transform::Raw, "residual_bounded"));
    }
    let mut fits = Vec::new();
    let mut verdicts = Vec::new();
    for (q, tr, name) in plan {
        let mut pairs = windowed(q)?;
        if tr == Transform::TimesLogtOverLoglogt {
            pairs.retain(|&(t, _)| t > std::f64::consts::E.exp());
        }
        let fit = fit_bounded(&pairs, tr, tol)?;
        verdicts.push(Verdict {
            name: name.into(),
            passed: fit.bounded,
            detail: format!(
                "{q} ({tr:?}): last-decade sup {:.4e} vs first-decade sup {:.4e}",
                fit.sup_last_decade, fit.sup_first_decade
            ),
        });
        fits.push(QuantityFit { quantity: q.into(), transform: tr, fit });
    }
    if series.residual_norm.is_some() {
        let fit = fit_bounded(&windowed("residual_norm")?, Transform::Raw, BoundTolerance { kappa: 1.0, slack: 0.1 })?;
        let passed = fit.bounded && fit.last_decade_oscillation < RESIDUAL_OSCILLATION_TOL;
        verdicts.push(Verdict {
            name: "residual_converges".into(),
            passed,
            detail: format!(
                "residual_norm: last-decade sup {:.4e}, first-decade sup {:.4e}, oscillation {:.4e}",
                fit.sup_last_decade, fit.sup_first_decade, fit.last_decade_oscillation
            ),
        });
        fits.push(QuantityFit { quantity: "residual_norm".into(), transform: Transform::Raw, fit });
    }
    Ok(RateReport { options: opts, fits, verdicts })
}

/// `t,value,transformed` rows for one quantity.
pub fn series_csv(pairs: &[(f64, f64)], transform: Transform) -> String {
    let mut out = String::from("t,value,transformed\n");
    for &(t, v) in pairs {
        out.push_str(&format!("{t},{v},{}\n", transform.apply(t, v)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn gap_examples() {
        let w_hat = [0.5, 0.5];
        assert_abs_diff_eq!(direction_gap(&[3.0, 3.0], &w_hat).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(direction_gap(&[1.0, -1.0], &w_hat).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(angle_gap(&[2.0, 2.0], &w_hat).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(angle_gap(&[1.0, -1.0], &w_hat).unwrap(), 1.0, epsilon = 1e-15);
        assert!(direction_gap(&[0.0, 0.0], &w_hat).is_err());
        assert!(angle_gap(&[0.0, 0.0], &w_hat).is_err());
        let data = crate::data::make_figure1(0);
        assert_abs_diff_eq!(margin_gap(&w_hat, &data, &w_hat).unwrap(), 0.0, epsilon = 1e-12);
        assert!(margin_gap(&[0.0, 0.0], &data, &w_hat).is_err());
        assert!(scaled_loss(0.0, 1.0).is_err());
        assert_eq!(scaled_loss(10.0, 0.5).unwrap(), 5.0);
    }

    #[test]
    fn iterated_log_guard() {
        assert_eq!(iterated_log(10.0, 0), Some(10.0));
        assert_abs_diff_eq!(iterated_log(1e6, 1).unwrap(), 1e6f64.ln());
        assert!(iterated_log(2.0, 1).is_none());
        assert!(iterated_log(10.0, 2).is_none());
        assert!(iterated_log(100.0, 2).is_some());
    }

    #[test]
    fn fit_bounded_examples() {
        let ts = log_grid(10.0, 1e5, 60);
        let constant: Vec<_> = ts.iter().map(|&t| (t, 2.0)).collect();
        assert!(fit_bounded(&constant, Transform::Raw, BoundTolerance::default()).unwrap().bounded);
        let growing: Vec<_> = ts.iter().map(|&t| (t, t.ln())).collect();
        assert!(!fit_bounded(&growing, Transform::Raw, BoundTolerance::default()).unwrap().bounded);
        let decaying: Vec<_> = ts.iter().map(|&t| (t, 1.0 / t.ln())).collect();
        let f = fit_bounded(&decaying, Transform::TimesLogt, BoundTolerance::default()).unwrap();
        assert!(f.bounded);
        assert_abs_diff_eq!(f.last_decade_oscillation, 0.0, epsilon = 1e-12);
        let short: Vec<_> = log_grid(10.0, 500.0, 20).into_iter().map(|t| (t, 1.0)).collect();
        assert!(fit_bounded(&short, Transform::Raw, BoundTolerance::default()).is_err());
        assert!(fit_bounded(&constant[..5], Transform::Raw, BoundTolerance::default()).is_err());
    }

    #[test]
    fn summable_log_powers_are_bounded() {
        // Partial sums of 1/(t log^2 t) converge; those of 1/(t log t) do not.
        let mut s2 = 0.0;
        let mut s1 = 0.0;
        let mut conv = Vec::new();
        let mut div = Vec::new();
        let mut next = 10.0;
        for t in 3..2_000_000u64 {
            let tf = t as f64;
            s2 += 1.0 / (tf * tf.ln().powi(2));
            s1 += 1.0 / (tf * tf.ln());
            if tf >= next {
                conv.push((tf, s2));
                div.push((tf, s1));
                next *= 1.2;
            }
        }
        let tight = BoundTolerance { kappa: 1.5, slack: 0.0 };
        assert!(fit_bounded(&conv, Transform::Raw, tight).unwrap().bounded);
        let f = fit_bounded(&div, Transform::Raw, tight).unwrap();
        assert!(f.sup_last_decade > 1.5 * f.sup_first_decade);
    }

    #[test]
    fn regression_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v - 2.0).collect();
        assert_abs_diff_eq!(regression_slope(&x, &y).unwrap(), 0.7, epsilon = 1e-12);
        assert!(regression_slope(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn csv_rows() {
        let csv = series_csv(&[(10.0, 2.0), (100.0, 1.0)], Transform::TimesT);
        assert_eq!(csv, "t,value,transformed\n10,2,20\n100,1,100\n");
    }

    proptest! {
        #[test]
        fn gaps_are_scale_invariant(w in prop::collection::vec(-5.0..5.0f64, 3), h in prop::collection::vec(-5.0..5.0f64, 3), c in 0.01..100.0f64) {
            prop_assume!(linalg::norm(&w) > 1e-3 && linalg::norm(&h) > 1e-3);
            let cw: Vec<f64> = w.iter().map(|v| v * c).collect();
            prop_assert!((direction_gap(&w, &h).unwrap() - direction_gap(&cw, &h).unwrap()).abs() <= 1e-12);
            prop_assert!((angle_gap(&w, &h).unwrap() - angle_gap(&cw, &h).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn law_of_cosines(w in prop::collection::vec(-5.0..5.0f64, 4), h in prop::collection::vec(-5.0..5.0f64, 4)) {
            prop_assume!(linalg::norm(&w) > 1e-3 && linalg::norm(&h) > 1e-3);
            let dg = direction_gap(&w, &h).unwrap();
            let ag = angle_gap(&w, &h).unwrap();
            prop_assert!((dg * dg - 2.0 * ag).abs() <= 1e-10);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&dg) && (0.0..=2.0 + 1e-12).contains(&ag));
        }
    }
}
