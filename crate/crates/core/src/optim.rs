//! First-order optimizers over the empirical loss `L(w) = sum_n l(w^T x_n)`,
//! with checkpointed trajectories and convergence diagnostics.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{self, LossSpec};

/// A differentiable sum-of-samples objective.
pub trait Objective {
    /// Parameter dimension.
    fn dim(&self) -> usize;
    /// Number of samples in the sum.
    fn count(&self) -> usize;
    fn loss(&self, w: &[f64]) -> Result<f64>;
    /// Writes the gradient summed over `batch` (every sample when `None`) into `out`.
    fn gradient_into(&self, w: &[f64], batch: Option<&[usize]>, out: &mut [f64]) -> Result<()>;
    fn name(&self) -> String;
}

/// Binary linear classification on folded data.
#[derive(Debug, Clone, Copy)]
pub struct BinaryObjective<'a> {
    pub loss: &'a LossSpec,
    pub data: &'a Dataset,
}

impl Objective for BinaryObjective<'_> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn count(&self) -> usize {
        self.data.count()
    }

    fn loss(&self, w: &[f64]) -> Result<f64> {
        check_finite(w)?;
        let mut total = 0.0;
        for n in 0..self.data.count() {
            let v = self.loss.value_unchecked(linalg::dot(w, self.data.column(n)));
            if !v.is_finite() {
                return Err(Error::Overflow { sample: n, msg: format!("loss value {v}") });
            }
            total += v;
        }
        Ok(total)
    }

    fn gradient_into(&self, w: &[f64], batch: Option<&[usize]>, out: &mut [f64]) -> Result<()> {
        check_finite(w)?;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut add = |n: usize| -> Result<()> {
            let x = self.data.column(n);
            let g = self.loss.derivative_unchecked(linalg::dot(w, x));
            if !g.is_finite() {
                return Err(Error::Overflow { sample: n, msg: format!("loss derivative {g}") });
            }
            if g != 0.0 {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += g * xi;
                }
            }
            Ok(())
        };
        match batch {
            Some(idx) => idx.iter().try_for_each(|&n| add(n))?,
            None => (0..self.data.count()).try_for_each(add)?,
        }
        if let Some((n, _)) = out.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Overflow { sample: n, msg: "gradient sum overflowed".into() });
        }
        Ok(())
    }

    fn name(&self) -> String {
        self.loss.name().to_string()
    }
}

fn check_finite(w: &[f64]) -> Result<()> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::input("weight vector has non-finite entries"))
    }
}

fn check_dim(w: &[f64], dim: usize) -> Result<()> {
    if w.len() != dim {
        return Err(Error::input(format!("weight vector has length {}, expected {dim}", w.len())));
    }
    Ok(())
}

/// `sum_n l'(w^T x_n) x_n`.
pub fn full_gradient(loss: &LossSpec, data: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
    check_dim(w, data.dim())?;
    let mut g = vec![0.0; data.dim()];
    BinaryObjective { loss, data }.gradient_into(w, None, &mut g)?;
    Ok(g)
}

pub fn gd_step(loss: &LossSpec, data: &Dataset, w: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta >= 0.0) {
        return Err(Error::input(format!("step size must be non-negative, got {eta}")));
    }
    let g = full_gradient(loss, data, w)?;
    Ok(w.iter().zip(&g).map(|(wi, gi)| wi - eta * gi).collect())
}

/// Iterate plus optimizer memory. `velocity` is the heavy-ball velocity or
/// the first Adam moment; `second_moment` is used by Adam only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub w: Vec<f64>,
    pub velocity: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// Number of steps taken so far.
    pub step: u64,
}

impl OptimState {
    pub fn new(w: Vec<f64>) -> Self {
        let d = w.len();
        OptimState { w, velocity: vec![0.0; d], second_moment: vec![0.0; d], step: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamParams {
    fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::input(format!("invalid Adam parameters {self:?}")));
        }
        Ok(())
    }
}

/// In-place update rules shared by the public step functions and `run`.
struct Stepper {
    grad: Vec<f64>,
    batch: Vec<usize>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Stepper { grad: vec![0.0; dim], batch: Vec::new() }
    }

    fn gd(&mut self, obj: &dyn Objective, s: &mut OptimState, eta: f64) -> Result<()> {
        obj.gradient_into(&s.w, None, &mut self.grad)?;
        for (w, g) in s.w.iter_mut().zip(&self.grad) {
            *w -= eta * g;
        }
        s.step += 1;
        Ok(())
    }

    fn momentum(&mut self, obj: &dyn Objective, s: &mut OptimState, eta: f64, gamma: f64) -> Result<()> {
        obj.gradient_into(&s.w, None, &mut self.grad)?;
        for ((w, v), g) in s.w.iter_mut().zip(s.velocity.iter_mut()).zip(&self.grad) {
            *v = gamma * *v - eta * g;
            *w += *v;
        }
        s.step += 1;
        Ok(())
    }

    fn sgd<R: Rng + ?Sized>(
        &mut self,
        obj: &dyn Objective,
        s: &mut OptimState,
        eta: f64,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<()> {
        let n = obj.count();
        self.batch.clear();
        self.batch.extend(rand::seq::index::sample(rng, n, batch_size).iter());
        self.batch.sort_unstable();
        obj.gradient_into(&s.w, Some(&self.batch), &mut self.grad)?;
        let scale = n as f64 / batch_size as f64;
        for (w, g) in s.w.iter_mut().zip(&self.grad) {
            *w -= eta * (scale * g);
        }
        s.step += 1;
        Ok(())
    }

    fn adam(&mut self, obj: &dyn Objective, s: &mut OptimState, eta: f64, p: AdamParams) -> Result<()> {
        obj.gradient_into(&s.w, None, &mut self.grad)?;
        let t = (s.step + 1) as i32;
        let c1 = 1.0 - p.beta1.powi(t);
        let c2 = 1.0 - p.beta2.powi(t);
        for i in 0..s.w.len() {
            let g = self.grad[i];
            s.velocity[i] = p.beta1 * s.velocity[i] + (1.0 - p.beta1) * g;
            s.second_moment[i] = p.beta2 * s.second_moment[i] + (1.0 - p.beta2) * g * g;
            let m_hat = s.velocity[i] / c1;
            let v_hat = s.second_moment[i] / c2;
            s.w[i] -= eta * m_hat / (v_hat.sqrt() + p.eps);
        }
        s.step += 1;
        Ok(())
    }
}

fn check_state(state: &OptimState, dim: usize) -> Result<()> {
    check_dim(&state.w, dim)?;
    if state.velocity.len() != dim || state.second_moment.len() != dim {
        return Err(Error::input("optimizer state buffers do not match the dimension"));
    }
    Ok(())
}

/// Heavy-ball step: `v <- gamma v - eta grad L(w)`, `w <- w + v`.
pub fn momentum_step(state: &OptimState, loss: &LossSpec, data: &Dataset, eta: f64, gamma: f64) -> Result<OptimState> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::input(format!("momentum coefficient must be in [0, 1), got {gamma}")));
    }
    check_state(state, data.dim())?;
    let mut next = state.clone();
    Stepper::new(data.dim()).momentum(&BinaryObjective { loss, data }, &mut next, eta, gamma)?;
    Ok(next)
}

/// Mini-batch step over a uniformly drawn batch without replacement, with the
/// batch gradient scaled by `N / batch_size`.
pub fn sgd_step<R: Rng + ?Sized>(
    state: &OptimState,
    loss: &LossSpec,
    data: &Dataset,
    eta: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<OptimState> {
    check_batch(batch_size, data.count())?;
    check_state(state, data.dim())?;
    let mut next = state.clone();
    Stepper::new(data.dim()).sgd(&BinaryObjective { loss, data }, &mut next, eta, batch_size, rng)?;
    Ok(next)
}

fn check_batch(batch_size: usize, count: usize) -> Result<()> {
    if batch_size == 0 || batch_size > count {
        return Err(Error::input(format!("batch size {batch_size} must lie in 1..={count}")));
    }
    Ok(())
}

/// Bias-corrected Adam step.
pub fn adam_step(state: &OptimState, loss: &LossSpec, data: &Dataset, eta: f64, params: AdamParams) -> Result<OptimState> {
    params.validate()?;
    check_state(state, data.dim())?;
    let mut next = state.clone();
    Stepper::new(data.dim()).adam(&BinaryObjective { loss, data }, &mut next, eta, params)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gd,
    Momentum,
    Sgd,
    Adam,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gd => "gd",
            Variant::Momentum => "momentum",
            Variant::Sgd => "sgd",
            Variant::Adam => "adam",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Variant::Gd),
            "momentum" | "gdmo" => Ok(Variant::Momentum),
            "sgd" => Ok(Variant::Sgd),
            "adam" => Ok(Variant::Adam),
            other => Err(Error::input(format!("unknown optimizer variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub ratio: f64,
    pub first: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { ratio: 1.2, first: 10 }
    }
}

/// `0`, then `first, first*r, first*r^2, ...` rounded down and deduplicated,
/// then `max_iter`.
pub fn checkpoint_times(max_iter: u64, schedule: Schedule) -> Result<Vec<u64>> {
    if !(schedule.ratio > 1.0) || schedule.first == 0 {
        return Err(Error::input("checkpoint schedule needs ratio > 1 and first >= 1"));
    }
    let mut times = vec![0];
    let mut x = schedule.first as f64;
    while x < max_iter as f64 {
        let t = x.floor() as u64;
        if t > *times.last().unwrap() {
            times.push(t);
        }
        x *= schedule.ratio;
    }
    if max_iter > *times.last().unwrap() {
        times.push(max_iter);
    }
    Ok(times)
}

fn default_gamma() -> f64 {
    0.9
}

fn default_batch() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub variant: Variant,
    /// Defaults to `1 / sigma_max(X)^2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default = "default_gamma")]
    pub momentum: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamParams,
    pub max_iter: u64,
    /// Defaults to the zero vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Schedule,
    /// Proceed with GD even when the step exceeds the smoothness bound.
    #[serde(default)]
    pub allow_large_step: bool,
}

impl OptimConfig {
    pub fn new(variant: Variant, max_iter: u64) -> Self {
        OptimConfig {
            variant,
            step_size: None,
            momentum: default_gamma(),
            batch_size: default_batch(),
            adam: AdamParams::default(),
            max_iter,
            init: None,
            seed: 0,
            checkpoints: Schedule::default(),
            allow_large_step: false,
        }
    }

    pub fn with_step(mut self, eta: f64) -> Self {
        self.step_size = Some(eta);
        self
    }

    pub fn with_init(mut self, w0: Vec<f64>) -> Self {
        self.init = Some(w0);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub w: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub step: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: OptimConfig,
    pub loss: String,
    /// Step size actually used.
    pub step_size: f64,
    pub momentum_form: String,
    pub checkpoints: Vec<Checkpoint>,
    pub final_t: u64,
    pub final_w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<Truncation>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<u64> {
        self.checkpoints.iter().map(|c| c.t).collect()
    }

    pub fn dim(&self) -> usize {
        self.final_w.len()
    }

    /// Checkpoints with `t` in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = &Checkpoint> {
        self.checkpoints.iter().filter(move |c| (c.t as f64) >= lo && (c.t as f64) <= hi)
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("t");
        for i in 1..=d {
            out.push_str(&format!(",w_{i}"));
        }
        out.push_str(",loss,grad_norm\n");
        for c in &self.checkpoints {
            out.push_str(&c.t.to_string());
            for v in &c.w {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{}\n", c.loss, c.grad_norm));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs the configured optimizer on a binary problem. The default step size
/// is `1 / sigma_max^2`; GD steps above `2 / (beta sigma_max^2)` are rejected
/// unless `allow_large_step` is set.
pub fn run(config: &OptimConfig, loss: &LossSpec, data: &Dataset) -> Result<Trajectory> {
    let budget = losses::smoothness_budget(loss, data)?;
    let eta = config.step_size.unwrap_or(1.0 / (budget.sigma_max * budget.sigma_max));
    if config.variant == Variant::Gd && eta >= budget.max_step && !config.allow_large_step {
        return Err(Error::input(format!(
            "step size {eta} is not below the smoothness bound {}",
            budget.max_step
        )));
    }
    run_objective(config, &BinaryObjective { loss, data }, eta)
}

/// Runs the configured optimizer on any objective with an explicit step size.
pub fn run_objective(config: &OptimConfig, obj: &dyn Objective, eta: f64) -> Result<Trajectory> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::input(format!("step size must be positive, got {eta}")));
    }
    let dim = obj.dim();
    let w0 = config.init.clone().unwrap_or_else(|| vec![0.0; dim]);
    check_dim(&w0, dim)?;
    check_finite(&w0)?;
    match config.variant {
        Variant::Momentum if !(0.0..1.0).contains(&config.momentum) => {
            return Err(Error::input(format!("momentum coefficient must be in [0, 1), got {}", config.momentum)))
        }
        Variant::Sgd => check_batch(config.batch_size, obj.count())?,
        Variant::Adam => config.adam.validate()?,
        _ => {}
    }
    let times = checkpoint_times(config.max_iter, config.checkpoints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stepper = Stepper::new(dim);
    let mut grad = vec![0.0; dim];
    let mut state = OptimState::new(w0);
    let mut checkpoints = Vec::with_capacity(times.len());
    let mut truncated = None;
    let mut next = 0;
    for t in 0..=config.max_iter {
        if times.get(next) == Some(&t) {
            let rec = obj
                .loss(&state.w)
                .and_then(|l| obj.gradient_into(&state.w, None, &mut grad).map(|_| l));
            match rec {
                Ok(l) => checkpoints.push(Checkpoint { t, w: state.w.clone(), loss: l, grad_norm: linalg::norm(&grad) }),
                Err(e) => {
                    truncated = Some(Truncation { step: t, reason: e.to_string() });
                    break;
                }
            }
            next += 1;
        }
        if t == config.max_iter {
            break;
        }
        let res = match config.variant {
            Variant::Gd => stepper.gd(obj, &mut state, eta),
            Variant::Momentum => stepper.momentum(obj, &mut state, eta, config.momentum),
            Variant::Sgd => stepper.sgd(obj, &mut state, eta, config.batch_size, &mut rng),
            Variant::Adam => stepper.adam(obj, &mut state, eta, config.adam),
        };
        if let Err(e) = res {
            truncated = Some(Truncation { step: t, reason: e.to_string() });
            break;
        }
    }
    let last = checkpoints.last().map(|c| (c.t, c.w.clone()));
    let (final_t, final_w) = match (&truncated, last) {
        (None, _) => (state.step, state.w),
        (Some(_), Some(l)) => l,
        (Some(_), None) => (0, vec![0.0; dim]),
    };
    Ok(Trajectory {
        config: config.clone(),
        loss: obj.name(),
        step_size: eta,
        momentum_form: "heavy-ball: v <- gamma v - eta g, w <- w + v".into(),
        checkpoints,
        final_t,
        final_w,
        truncated,
    })
}

/// Growth of `sum ||grad L||^2` over the checkpoints of the last decade.
pub fn gradient_sum_increment(traj: &Trajectory) -> f64 {
    let hi = traj.final_t as f64;
    traj.window(hi / 10.0, hi).map(|c| c.grad_norm * c.grad_norm).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub final_loss: f64,
    /// Loss decreases at every checkpoint over the last decade.
    pub loss_monotone_tail: bool,
    /// Norm increases at every checkpoint over the last decade.
    pub norm_increasing_tail: bool,
    /// `||w(T)|| - ||w(t_first)||` with `t_first` the first positive checkpoint.
    pub norm_growth: f64,
    pub final_min_margin: f64,
    pub gradient_sum_increment: f64,
}

impl ConvergenceReport {
    /// Loss below `1e-4`, growing norm, positive margins, summable gradients.
    pub fn passes(&self) -> bool {
        self.final_loss < 1e-4
            && self.loss_monotone_tail
            && self.norm_increasing_tail
            && self.final_min_margin > 0.0
            && self.gradient_sum_increment < 1e-6
    }
}

/// Convergence diagnostics for a binary GD trajectory on separable data.
pub fn convergence_report(traj: &Trajectory, data: &Dataset) -> Result<ConvergenceReport> {
    if traj.checkpoints.len() < 3 || traj.dim() != data.dim() {
        return Err(Error::input("trajectory does not match the dataset or is too short"));
    }
    let hi = traj.final_t as f64;
    let tail: Vec<&Checkpoint> = traj.window(hi / 10.0, hi).collect();
    let pairs = || tail.windows(2);
    let norm = |c: &Checkpoint| linalg::norm(&c.w);
    let first = traj.checkpoints.iter().find(|c| c.t > 0).unwrap_or(&traj.checkpoints[0]);
    let last = traj.checkpoints.last().unwrap();
    let final_min_margin = (0..data.count())
        .map(|n| linalg::dot(&last.w, data.column(n)))
        .fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        final_loss: last.loss,
        loss_monotone_tail: pairs().all(|p| p[1].loss < p[0].loss),
        norm_increasing_tail: pairs().all(|p| norm(p[1]) > norm(p[0])),
        norm_growth: norm(last) - norm(first),
        final_min_margin,
        gradient_sum_increment: gradient_sum_increment(traj),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_figure1;
    use approx::assert_abs_diff_eq;

    fn point() -> Dataset {
        Dataset::from_columns(&[vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let exp = LossSpec::exp();
        assert_eq!(full_gradient(&exp, &point(), &[0.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
        let f1 = make_figure1(0).subset(&[0, 1, 2, 3]).unwrap();
        let g = full_gradient(&exp, &f1, &[0.0, 0.0]).unwrap();
        // Columns (0.5, 1.5), (1.5, 0.5) twice each.
        assert_abs_diff_eq!(g[0], -4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], -4.0, epsilon = 1e-14);
        let far = full_gradient(&LossSpec::logistic(), &f1, &[400.0, 400.0]).unwrap();
        assert_eq!(far, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_overflow_names_sample() {
        let data = Dataset::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        match full_gradient(&LossSpec::exp(), &data, &[0.0, -800.0]) {
            Err(Error::Overflow { sample, .. }) => assert_eq!(sample, 1),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn gd_step_examples() {
        let exp = LossSpec::exp();
        assert_eq!(gd_step(&exp, &point(), &[0.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        let w = gd_step(&exp, &point(), &[1.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 + (-1f64).exp(), epsilon = 1e-15);
        let data = make_figure1(2);
        let w0 = [0.3, -0.2];
        assert_eq!(gd_step(&LossSpec::logistic(), &data, &w0, 0.0).unwrap(), w0.to_vec());
    }

    #[test]
    fn momentum_examples() {
        let exp = LossSpec::exp();
        let s0 = OptimState::new(vec![0.0, 0.0]);
        let s1 = momentum_step(&s0, &exp, &point(), 1.0, 0.9).unwrap();
        assert_eq!(s1.velocity, vec![1.0, 0.0]);
        assert_eq!(s1.w, vec![1.0, 0.0]);
        let s2 = momentum_step(&s1, &exp, &point(), 1.0, 0.9).unwrap();
        assert_abs_diff_eq!(s2.w[0], 1.0 + 0.9 + (-1f64).exp(), epsilon = 1e-15);
        let data = make_figure1(3);
        let s = OptimState::new(vec![0.1, 0.4]);
        let m = momentum_step(&s, &LossSpec::logistic(), &data, 0.05, 0.0).unwrap();
        assert_eq!(m.w, gd_step(&LossSpec::logistic(), &data, &s.w, 0.05).unwrap());
        assert!(momentum_step(&s, &exp, &data, 0.1, 1.0).is_err());
    }

    #[test]
    fn sgd_examples() {
        let data = make_figure1(4);
        let loss = LossSpec::logistic();
        let s = OptimState::new(vec![0.2, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = sgd_step(&s, &loss, &data, 0.1, data.count(), &mut rng).unwrap();
        assert_eq!(full.w, gd_step(&loss, &data, &s.w, 0.1).unwrap());
        let single = sgd_step(&s, &loss, &point(), 0.1, 1, &mut rng).unwrap();
        assert_eq!(single.w, gd_step(&loss, &point(), &s.w, 0.1).unwrap());
        let a = sgd_step(&s, &loss, &data, 0.1, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sgd_step(&s, &loss, &data, 0.1, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(sgd_step(&s, &loss, &data, 0.1, data.count() + 1, &mut rng).is_err());
        assert!(sgd_step(&s, &loss, &data, 0.1, 0, &mut rng).is_err());
    }

    #[test]
    fn adam_examples() {
        let data = Dataset::from_columns(&[vec![1.0, 0.0]]).unwrap();
        // Zero gradient in the second coordinate leaves it untouched.
        let s = OptimState::new(vec![0.0, 0.7]);
        let p = AdamParams::default();
        let a = adam_step(&s, &LossSpec::exp(), &data, 0.01, p).unwrap();
        assert_eq!(a.w[1], 0.7);
        assert_abs_diff_eq!(a.w[0], 0.01, epsilon = 1e-9);
        let far = OptimState::new(vec![800.0, 0.0]);
        let b = adam_step(&far, &LossSpec::logistic(), &data, 0.01, p).unwrap();
        assert_eq!(b.w, far.w);
        assert!(adam_step(&s, &LossSpec::exp(), &data, 0.01, AdamParams { eps: 0.0, ..p }).is_err());
    }

    #[test]
    fn schedule_shape() {
        let t = checkpoint_times(1000, Schedule::default()).unwrap();
        assert_eq!(&t[..4], &[0, 10, 12, 14]);
        assert_eq!(*t.last().unwrap(), 1000);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(checkpoint_times(5, Schedule::default()).unwrap(), vec![0, 5]);
        assert!(checkpoint_times(5, Schedule { ratio: 1.0, first: 10 }).is_err());
    }

    #[test]
    fn single_point_run_tracks_log() {
        let cfg = OptimConfig::new(Variant::Gd, 100_000).with_step(1.0);
        let traj = run(&cfg, &LossSpec::exp(), &point()).unwrap();
        assert!(traj.truncated.is_none());
        assert_eq!(traj.final_t, 100_000);
        for c in &traj.checkpoints {
            assert!((c.w[0] - (c.t as f64 + 1.0).ln()).abs() <= 0.5);
            assert_eq!(c.w[1], 0.0);
        }
        let rep = convergence_report(&traj, &point()).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn zero_momentum_and_full_batch_match_gd_bitwise() {
        let data = make_figure1(6);
        let loss = LossSpec::logistic();
        let gd = run(&OptimConfig::new(Variant::Gd, 3000), &loss, &data).unwrap();
        let mut mo = OptimConfig::new(Variant::Momentum, 3000);
        mo.momentum = 0.0;
        let mo = run(&mo, &loss, &data).unwrap();
        let mut sg = OptimConfig::new(Variant::Sgd, 3000);
        sg.batch_size = data.count();
        let sg = run(&sg, &loss, &data).unwrap();
        assert_eq!(gd.checkpoints, mo.checkpoints);
        assert_eq!(gd.checkpoints, sg.checkpoints);
    }

    #[test]
    fn large_gd_step_rejected_unless_allowed() {
        let data = make_figure1(0);
        let mut cfg = OptimConfig::new(Variant::Gd, 10).with_step(1e3);
        assert!(run(&cfg, &LossSpec::logistic(), &data).is_err());
        cfg.allow_large_step = true;
        assert!(run(&cfg, &LossSpec::logistic(), &data).is_ok());
    }

    #[test]
    fn overflow_truncates_run() {
        let data = Dataset::from_columns(&[vec![1.0], vec![-1.0]]).unwrap();
        let mut cfg = OptimConfig::new(Variant::Gd, 10_000).with_step(50.0);
        cfg.allow_large_step = true;
        cfg.init = Some(vec![3.0]);
        let traj = run(&cfg, &LossSpec::exp(), &data).unwrap();
        let tr = traj.truncated.as_ref().expect("run should overflow");
        assert!(tr.step < 10_000);
        assert!(traj.checkpoints.iter().all(|c| c.t <= tr.step));
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = run(&OptimConfig::new(Variant::Gd, 20).with_step(1.0), &LossSpec::exp(), &point()).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,w_1,w_2,loss,grad_norm"));
        assert_eq!(lines.next(), Some("0,0,0,1,1"));
        assert_eq!(csv.lines().count(), traj.checkpoints.len() + 1);
        let json: serde_json::Value = serde_json::from_str(&traj.to_json().unwrap()).unwrap();
        assert_eq!(json["config"]["adam"]["beta2"], 0.999);
    }
}
