//! Monotone decreasing, smooth, exponential-tailed scalar losses.
//!
//! Every loss is evaluated in a form that stays finite and strictly positive
//! (value) or strictly negative (derivative) until the underlying exponential
//! leaves the representable range.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

/// Parameters of the exponential tail sandwich
/// `c(1 - e^{-mu_minus u}) e^{-a u} <= -l'(u) <= c(1 + e^{-mu_plus u}) e^{-a u}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub a: f64,
    pub c: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub u_plus: f64,
    pub u_minus: f64,
}

impl Default for TailParams {
    fn default() -> Self {
        TailParams {
            a: 1.0,
            c: 1.0,
            mu_plus: 1.0,
            mu_minus: 1.0,
            u_plus: 0.0,
            u_minus: 0.0,
        }
    }
}

impl TailParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.c, self.mu_plus, self.mu_minus, self.u_plus, self.u_minus];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("tail parameters must be finite"));
        }
        if self.mu_plus <= 0.0 || self.mu_minus <= 0.0 || self.a <= 0.0 || self.c <= 0.0 {
            return Err(Error::input("tail parameters a, c, mu_plus, mu_minus must be positive"));
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        self.a == 1.0 && self.c == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossTag {
    Exp,
    Logistic,
    Probit,
    Custom,
}

impl fmt::Display for LossTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossTag::Exp => "exp",
            LossTag::Logistic => "logistic",
            LossTag::Probit => "probit",
            LossTag::Custom => "custom",
        };
        f.write_str(s)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Exp,
    Logistic,
    Probit,
    Custom { value: ScalarFn, derivative: ScalarFn },
}

/// A scalar loss `l(u)` with its derivative, smoothness constant and tail.
#[derive(Clone)]
pub struct LossSpec {
    kind: Kind,
    name: String,
    /// Lipschitz constant of `l'`. For the exp loss this is a local constant,
    /// see [`LossSpec::exp_local`].
    pub beta: f64,
    pub tail: TailParams,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossSpec")
            .field("name", &self.name)
            .field("beta", &self.beta)
            .field("tail", &self.tail)
            .finish()
    }
}

/// Config-file form of a loss: a builtin tag plus optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tag: LossTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailParams>,
}

impl LossSpec {
    /// `l(u) = e^{-u}` with the local smoothness constant at the origin.
    pub fn exp() -> Self {
        LossSpec {
            kind: Kind::Exp,
            name: "exp".into(),
            beta: 1.0,
            tail: TailParams::default(),
        }
    }

    /// Exp loss whose declared smoothness is `max_n exp(-w0^T x_n)`. The exp
    /// loss has no global smoothness constant; this local value at the start
    /// point is what the step-size rule uses.
    pub fn exp_local(data: &Dataset, w0: &[f64]) -> Self {
        let beta = (0..data.count())
            .map(|n| (-linalg::dot(w0, data.column(n))).exp())
            .fold(0.0, f64::max);
        LossSpec {
            beta,
            ..LossSpec::exp()
        }
    }

    /// `l(u) = log(1 + e^{-u})`, `beta = 1/4`.
    pub fn logistic() -> Self {
        LossSpec {
            kind: Kind::Logistic,
            name: "logistic".into(),
            beta: 0.25,
            tail: TailParams::default(),
        }
    }

    /// `l(u) = -log Phi(u)` with the standard normal CDF `Phi`. Its tail is
    /// Gaussian rather than exponential, so the declared tail parameters are
    /// the caller's claim and should be checked with [`tail_sandwich_check`].
    pub fn probit() -> Self {
        LossSpec {
            kind: Kind::Probit,
            name: "probit".into(),
            beta: probit_beta(),
            tail: TailParams::default(),
        }
    }

    pub fn custom<V, D>(name: impl Into<String>, value: V, derivative: D, beta: f64, tail: TailParams) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        LossSpec {
            kind: Kind::Custom {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
            },
            name: name.into(),
            beta,
            tail,
        }
    }

    pub fn from_config(cfg: &LossConfig) -> Result<Self> {
        let mut spec = match cfg.tag {
            LossTag::Exp => LossSpec::exp(),
            LossTag::Logistic => LossSpec::logistic(),
            LossTag::Probit => LossSpec::probit(),
            LossTag::Custom => {
                return Err(Error::input(
                    "custom losses need code for l and l'; a config can only name exp, logistic or probit",
                ))
            }
        };
        if let Some(beta) = cfg.beta {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::input("beta must be positive"));
            }
            spec.beta = beta;
        }
        if let Some(tail) = cfg.tail {
            tail.validate()?;
            spec.tail = tail;
        }
        Ok(spec)
    }

    pub fn to_config(&self) -> LossConfig {
        LossConfig {
            tag: self.tag(),
            beta: Some(self.beta),
            tail: Some(self.tail),
        }
    }

    pub fn tag(&self) -> LossTag {
        match self.kind {
            Kind::Exp => LossTag::Exp,
            Kind::Logistic => LossTag::Logistic,
            Kind::Probit => LossTag::Probit,
            Kind::Custom { .. } => LossTag::Custom,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `l(u)` without input validation, for hot loops.
    #[inline]
    pub fn value_unchecked(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Exp => (-u).exp(),
            Kind::Logistic => {
                if u >= 0.0 {
                    (-u).exp().ln_1p()
                } else {
                    -u + u.exp().ln_1p()
                }
            }
            Kind::Probit => -log_normal_cdf(u),
            Kind::Custom { value, .. } => value(u),
        }
    }

    /// `l'(u)` without input validation, for hot loops.
    #[inline]
    pub fn derivative_unchecked(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Exp => -(-u).exp(),
            Kind::Logistic => {
                if u >= 0.0 {
                    let e = (-u).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + u.exp())
                }
            }
            Kind::Probit => -normal_hazard(u),
            Kind::Custom { derivative, .. } => derivative(u),
        }
    }
}

pub fn loss_value(spec: &LossSpec, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::input(format!("loss argument must be finite, got {u}")));
    }
    Ok(spec.value_unchecked(u))
}

pub fn loss_derivative(spec: &LossSpec, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::input(format!("loss argument must be finite, got {u}")));
    }
    Ok(spec.derivative_unchecked(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheckRow {
    pub u: f64,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub ok: bool,
}

/// Checks the tail sandwich on a grid of points beyond both thresholds.
pub fn tail_sandwich_check(spec: &LossSpec, grid: &[f64]) -> Result<Vec<TailCheckRow>> {
    if grid.is_empty() {
        return Err(Error::input("tail check needs a non-empty grid"));
    }
    let tp = &spec.tail;
    let threshold = tp.u_plus.max(tp.u_minus);
    grid.iter()
        .map(|&u| {
            if !u.is_finite() || u <= threshold {
                return Err(Error::input(format!(
                    "grid point {u} must exceed the tail thresholds ({threshold})"
                )));
            }
            let base = tp.c * (-tp.a * u).exp();
            let lower = base * (1.0 - (-tp.mu_minus * u).exp());
            let upper = base * (1.0 + (-tp.mu_plus * u).exp());
            let value = -spec.derivative_unchecked(u);
            // Rounding band: a few ulps relative to the envelopes.
            let tol = 4.0 * f64::EPSILON;
            let ok = value >= lower * (1.0 - tol) && value <= upper * (1.0 + tol);
            Ok(TailCheckRow { u, lower, value, upper, ok })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBudget {
    pub sigma_max: f64,
    /// `beta * sigma_max^2`, the smoothness constant of the empirical loss.
    pub global_beta: f64,
    /// `2 / global_beta`, the largest step for which GD is guaranteed to converge.
    pub max_step: f64,
}

pub fn smoothness_budget(spec: &LossSpec, data: &Dataset) -> Result<SmoothnessBudget> {
    let sigma_max = data.sigma_max();
    if sigma_max <= 0.0 {
        return Err(Error::DegenerateInput("data matrix is zero".into()));
    }
    let global_beta = spec.beta * sigma_max * sigma_max;
    Ok(SmoothnessBudget {
        sigma_max,
        global_beta,
        max_step: 2.0 / global_beta,
    })
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `log Phi(u)` for the standard normal CDF.
fn log_normal_cdf(u: f64) -> f64 {
    if u >= 0.0 {
        (-0.5 * libm::erfc(u * FRAC_1_SQRT_2)).ln_1p()
    } else if u > -30.0 {
        (0.5 * libm::erfc(-u * FRAC_1_SQRT_2)).ln()
    } else {
        // Asymptotic Mills-ratio expansion; erfc underflows further out.
        let inv2 = 1.0 / (u * u);
        -0.5 * u * u - LN_SQRT_2PI - (-u).ln() + (1.0 - inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2).ln()
    }
}

/// `phi(u) / Phi(u)`, the derivative of `-log Phi(u)` up to sign.
fn normal_hazard(u: f64) -> f64 {
    if u > -30.0 {
        let pdf = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        pdf / (0.5 * libm::erfc(-u * FRAC_1_SQRT_2))
    } else {
        let inv2 = 1.0 / (u * u);
        -u / (1.0 - inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2)
    }
}

/// Grid supremum of `l''(u) = h(u)(u + h(u))` for the probit loss, where `h`
/// is the normal hazard. The supremum is approached as `u -> -inf`.
fn probit_beta() -> f64 {
    static BETA: OnceLock<f64> = OnceLock::new();
    *BETA.get_or_init(|| {
        (0..=12_000)
            .map(|i| -60.0 + i as f64 * 0.01)
            .map(|u| {
                let h = normal_hazard(u);
                h * (u + h)
            })
            .fold(0.0, f64::max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    fn builtin() -> Vec<LossSpec> {
        vec![LossSpec::exp(), LossSpec::logistic(), LossSpec::probit()]
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(loss_value(&LossSpec::exp(), 0.0).unwrap(), 1.0);
        assert_relative_eq!(loss_value(&LossSpec::logistic(), 0.0).unwrap(), 2f64.ln(), max_relative = 1e-15);
        assert_eq!(loss_derivative(&LossSpec::exp(), 0.0).unwrap(), -1.0);
        assert_eq!(loss_derivative(&LossSpec::logistic(), 0.0).unwrap(), -0.5);
        assert_relative_eq!(loss_derivative(&LossSpec::exp(), 10.0).unwrap(), -4.539_992_976_248_485e-5, max_relative = 1e-12);
    }

    #[test]
    fn logistic_far_tail_is_accurate() {
        // log1p(e^-50) = e^-50 - e^-100/2 + ...; the correction is below 1e-43 relative.
        let v = loss_value(&LossSpec::logistic(), 50.0).unwrap();
        let expected = 1.928_749_847_963_917_8e-22;
        assert!(v > 0.0 && v < 2.1e-22);
        assert_relative_eq!(v, expected, max_relative = 1e-6);
        // Far negative side stays finite and close to -u.
        assert_relative_eq!(loss_value(&LossSpec::logistic(), -800.0).unwrap(), 800.0);
    }

    #[test]
    fn rejects_non_finite_arguments() {
        for spec in builtin() {
            assert!(matches!(loss_value(&spec, f64::NAN), Err(Error::Input(_))));
            assert!(matches!(loss_derivative(&spec, f64::INFINITY), Err(Error::Input(_))));
        }
    }

    #[test]
    fn sign_and_monotonicity_on_wide_grid() {
        for spec in builtin() {
            let grid: Vec<f64> = (0..=400).map(|i| -20.0 + 0.125 * i as f64).collect();
            let mut prev_v = f64::INFINITY;
            let mut prev_d = f64::INFINITY;
            for &u in &grid {
                let v = spec.value_unchecked(u);
                let d = spec.derivative_unchecked(u);
                assert!(v > 0.0, "{} value at {u}", spec.name());
                assert!(d < 0.0, "{} derivative at {u}", spec.name());
                assert!(v <= prev_v, "{} not decreasing at {u}", spec.name());
                assert!(-d <= prev_d * (1.0 + 1e-12), "{} -l' not decreasing at {u}", spec.name());
                prev_v = v;
                prev_d = -d;
            }
            let tail: Vec<f64> = [10.0, 20.0, 40.0].iter().map(|&u| spec.value_unchecked(u)).collect();
            assert!(tail[0] > tail[1] && tail[1] > tail[2] && tail[2] < 1e-4);
        }
    }

    #[test]
    fn derivative_does_not_underflow_early() {
        assert!(LossSpec::exp().derivative_unchecked(700.0) < 0.0);
        assert!(LossSpec::logistic().derivative_unchecked(700.0) < 0.0);
        assert!(LossSpec::probit().derivative_unchecked(37.0) < 0.0);
    }

    #[test]
    fn finite_differences_match_derivative() {
        let h = 1e-5;
        for spec in builtin() {
            for i in 0..=70 {
                let u = -5.0 + 0.5 * i as f64;
                let fd = (spec.value_unchecked(u + h) - spec.value_unchecked(u - h)) / (2.0 * h);
                let d = spec.derivative_unchecked(u);
                assert_abs_diff_eq!(d, fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lipschitz_derivative_on_sampled_pairs() {
        for spec in builtin() {
            let grid: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
            for w in grid.windows(2) {
                let lhs = (spec.derivative_unchecked(w[1]) - spec.derivative_unchecked(w[0])).abs();
                // Exp has only a local constant; sample it where u >= 0.
                if spec.tag() == LossTag::Exp && w[0] < 0.0 {
                    continue;
                }
                assert!(lhs <= spec.beta * (w[1] - w[0]) * (1.0 + 1e-9), "{} at {}", spec.name(), w[0]);
            }
        }
    }

    #[test]
    fn probit_smoothness_is_close_to_one() {
        let b = LossSpec::probit().beta;
        assert!(b > 0.99 && b <= 1.0, "{b}");
    }

    #[test]
    fn tail_sandwich_builtin_losses() {
        let grid: Vec<f64> = (0..50).map(|i| 0.5 * 1000f64.powf(i as f64 / 49.0)).collect();
        for spec in [LossSpec::exp(), LossSpec::logistic()] {
            let rows = tail_sandwich_check(&spec, &grid).unwrap();
            assert!(rows.iter().all(|r| r.ok), "{}", spec.name());
        }
        let rows = tail_sandwich_check(&LossSpec::exp(), &[1.0, 5.0, 10.0]).unwrap();
        assert!(rows.iter().all(|r| r.ok));
        let rows = tail_sandwich_check(&LossSpec::logistic(), &[5.0, 10.0, 20.0]).unwrap();
        assert!(rows.iter().all(|r| r.ok));
    }

    #[test]
    fn polynomial_tail_fails_sandwich() {
        let poly = LossSpec::custom("poly", |u: f64| 1.0 / u, |u: f64| -1.0 / (u * u), 2.0, TailParams::default());
        let rows = tail_sandwich_check(&poly, &[10.0, 100.0]).unwrap();
        assert!(rows.iter().all(|r| !r.ok));
    }

    #[test]
    fn probit_tail_is_not_exponential() {
        let rows = tail_sandwich_check(&LossSpec::probit(), &[5.0, 10.0, 20.0]).unwrap();
        assert!(rows.iter().any(|r| !r.ok));
    }

    #[test]
    fn tail_check_input_errors() {
        assert!(tail_sandwich_check(&LossSpec::exp(), &[]).is_err());
        assert!(tail_sandwich_check(&LossSpec::exp(), &[-1.0]).is_err());
    }

    #[test]
    fn smoothness_budget_scaling() {
        let x = Dataset::from_folded(DMatrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        let b = smoothness_budget(&LossSpec::logistic(), &x).unwrap();
        assert_relative_eq!(b.global_beta, 0.25, max_relative = 1e-12);
        assert_relative_eq!(b.max_step, 8.0, max_relative = 1e-12);

        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -0.5, 0.3, 1.0, 2.0]);
        let a = smoothness_budget(&LossSpec::logistic(), &Dataset::from_folded(m.clone()).unwrap()).unwrap();
        let b = smoothness_budget(&LossSpec::logistic(), &Dataset::from_folded(m * 2.0).unwrap()).unwrap();
        assert_relative_eq!(a.max_step / b.max_step, 4.0, max_relative = 1e-12);

        let zero = Dataset::from_folded(DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(smoothness_budget(&LossSpec::exp(), &zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn config_roundtrip_and_overrides() {
        let cfg: LossConfig = serde_json::from_str(r#"{"tag":"probit","tail":{"a":1,"c":1,"mu_plus":0.5,"mu_minus":0.5,"u_plus":2,"u_minus":2}}"#).unwrap();
        let spec = LossSpec::from_config(&cfg).unwrap();
        assert_eq!(spec.tag(), LossTag::Probit);
        assert_eq!(spec.tail.mu_plus, 0.5);
        let bad = LossConfig { tag: LossTag::Exp, beta: Some(-1.0), tail: None };
        assert!(LossSpec::from_config(&bad).is_err());
        assert!(LossSpec::from_config(&LossConfig { tag: LossTag::Custom, beta: None, tail: None }).is_err());
    }
}
