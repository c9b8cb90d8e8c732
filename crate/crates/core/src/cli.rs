//! Experiment driver behind the `maxmargin` binary.
//!
//! One JSON config describes the dataset, loss, optimizers and analyses; the
//! top-level flags override it. Every subcommand writes its outputs under the
//! output directory and maps its outcome onto an exit code.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{self, Dataset, Figure1Params};
use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossSpec};
use crate::margin::{
    self, degenerate_chain, solve_w_tilde, DegenerateChain, DualPositivity, MaxMarginSolution, ResidualOffset,
};
use crate::multiclass::{self, CrossEntropyObjective, KClassSvmSolution, MulticlassBias, MulticlassProblem};
use crate::optim::{self, AdamParams, ConvergenceReport, OptimConfig, Schedule, Trajectory, Variant};
use crate::rates::{self, AnalysisOptions, RateReport, ValidationSlope};

pub const EXIT_OK: i32 = 0;
pub const EXIT_THEORY: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const DEFAULT_ITERS: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(name = "maxmargin", version, about = "Implicit bias of gradient descent on separable data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the hard-margin SVM and write the solution report.
    Svm(CommonArgs),
    /// Run every configured optimizer and write its trajectory.
    Run(CommonArgs),
    /// Fit the convergence rates of existing trajectories.
    Analyze(AnalyzeArgs),
    /// Final direction gap of two or more optimizers on the same data.
    Compare(CommonArgs),
    /// K-class SVM and cross-entropy GD bias check.
    Multiclass(CommonArgs),
    /// Write a builtin dataset to CSV.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<u64>,
    /// Keep only optimizers of this variant; repeatable.
    #[arg(long = "variant")]
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trajectory JSON files; defaults to those `run` wrote to the output directory.
    #[arg(long = "trajectory")]
    pub trajectories: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Builtin generator name; the config's dataset when absent.
    pub generator: Option<Generator>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Figure1,
    Figure1Scaled,
    Degenerate3d,
    SinglePoint,
    Random,
    MulticlassToy,
}

impl Generator {
    fn name(self) -> &'static str {
        match self {
            Generator::Figure1 => "figure1",
            Generator::Figure1Scaled => "figure1-scaled",
            Generator::Degenerate3d => "degenerate3d",
            Generator::SinglePoint => "single-point",
            Generator::Random => "random",
            Generator::MulticlassToy => "multiclass-toy",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    /// Multiplier of the second coordinate (`figure1-scaled`, default 20).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x2_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure1: Option<Figure1Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Csv {
        csv: PathBuf,
        /// Integer labels `1..=K` instead of `+-1`.
        #[serde(default)]
        multiclass: bool,
    },
    Generator {
        generator: Generator,
        #[serde(default)]
        params: GeneratorParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    /// Output file stem; the variant name by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub allow_large_step: bool,
}

impl OptimizerSpec {
    pub fn of(variant: Variant) -> Self {
        OptimizerSpec {
            name: None,
            variant,
            step_size: None,
            momentum: None,
            batch_size: None,
            adam: None,
            init: None,
            allow_large_step: false,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.variant.to_string())
    }

    fn to_config(&self, iters: u64, seed: u64) -> OptimConfig {
        let mut c = OptimConfig::new(self.variant, iters);
        c.step_size = self.step_size;
        if let Some(g) = self.momentum {
            c.momentum = g;
        }
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        if let Some(a) = self.adam {
            c.adam = a;
        }
        c.init = self.init.clone();
        c.seed = seed;
        c.checkpoints = Schedule::default();
        c.allow_large_step = self.allow_large_step;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Svm,
    Decompose,
    Rates,
    Validation,
    Multiclass,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_loss")]
    pub loss: LossConfig,
    #[serde(default = "default_optimizers")]
    pub optimizers: Vec<OptimizerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<u64>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    /// Held-out rows `x_1, ..., x_d, label` for the validation-loss analysis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub seed: u64,
}

fn default_loss() -> LossConfig {
    LossSpec::logistic().to_config()
}

fn default_optimizers() -> Vec<OptimizerSpec> {
    vec![OptimizerSpec::of(Variant::Gd)]
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, seed: u64) -> Self {
        ExperimentConfig {
            dataset,
            loss: default_loss(),
            optimizers: default_optimizers(),
            iters: None,
            analyses: Vec::new(),
            analysis: AnalysisOptions::default(),
            validation: Vec::new(),
            out: None,
            seed,
        }
    }

    pub fn generator(generator: Generator, seed: u64) -> Self {
        ExperimentConfig::new(DatasetSpec::Generator { generator, params: GeneratorParams::default() }, seed)
    }

    pub fn iters(&self) -> u64 {
        self.iters.unwrap_or(DEFAULT_ITERS)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks that every name resolves and the optimizer labels are distinct.
    pub fn validate(&self) -> Result<()> {
        LossSpec::from_config(&self.loss)?;
        if self.optimizers.is_empty() {
            return Err(Error::input("no optimizers configured"));
        }
        let mut seen = BTreeSet::new();
        for o in &self.optimizers {
            if !seen.insert(o.label()) {
                return Err(Error::input(format!("duplicate optimizer name '{}'", o.label())));
            }
        }
        if self.iters == Some(0) {
            return Err(Error::input("iters must be positive"));
        }
        Ok(())
    }
}

/// The parsed config together with the JSON it came from, echoed into reports.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Value,
}

/// Reads the config file (if any) and applies the flag overrides.
pub fn load_config(args: &CommonArgs, fallback: Option<Generator>) -> Result<LoadedConfig> {
    let (mut raw, from_file) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            (serde_json::from_str::<Value>(&text)?, true)
        }
        None => {
            let generator = fallback.unwrap_or(Generator::Figure1);
            let seed = args.seed.ok_or_else(|| Error::Input("--seed is required without --config".into()))?;
            (serde_json::to_value(ExperimentConfig::generator(generator, seed))?, false)
        }
    };
    let obj = raw.as_object_mut().ok_or_else(|| Error::Input("config must be a JSON object".into()))?;
    if let Some(seed) = args.seed {
        obj.insert("seed".into(), seed.into());
    }
    if let Some(iters) = args.iters {
        obj.insert("iters".into(), iters.into());
    }
    if let Some(out) = &args.out {
        obj.insert("out".into(), out.display().to_string().into());
    }
    if from_file && !obj.contains_key("seed") {
        return Err(Error::Input("config is missing the mandatory 'seed'".into()));
    }
    let mut config: ExperimentConfig = serde_json::from_value(raw.clone())?;
    if !args.variants.is_empty() {
        let wanted = args
            .variants
            .iter()
            .map(|v| v.parse::<Variant>().map_err(|e| Error::Input(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut chosen = Vec::new();
        for v in wanted {
            let configured: Vec<OptimizerSpec> = config.optimizers.iter().filter(|o| o.variant == v).cloned().collect();
            if configured.is_empty() {
                chosen.push(OptimizerSpec::of(v));
            } else {
                chosen.extend(configured);
            }
        }
        config.optimizers = chosen;
        raw["optimizers"] = serde_json::to_value(&config.optimizers)?;
    }
    config.validate()?;
    Ok(LoadedConfig { config, raw })
}

/// Binary dataset named by the config.
pub fn build_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    match spec {
        DatasetSpec::Csv { multiclass: true, .. } => {
            Err(Error::input("a multiclass CSV can only be used by the multiclass command"))
        }
        DatasetSpec::Csv { csv, .. } => data::load_csv(csv),
        DatasetSpec::Generator { generator, params } => {
            let f1 = params.figure1.unwrap_or_default();
            match generator {
                Generator::Figure1 => Ok(data::make_figure1_with(seed, f1, params.x2_scale.unwrap_or(1.0))),
                Generator::Figure1Scaled => Ok(data::make_figure1_with(seed, f1, params.x2_scale.unwrap_or(20.0))),
                Generator::Degenerate3d => Ok(data::make_degenerate3d()),
                Generator::SinglePoint => Dataset::from_columns(&[vec![1.0, 0.0]]),
                Generator::Random => {
                    let (d, n) = (params.dim.unwrap_or(2), params.count.unwrap_or(8));
                    if d == 0 || n == 0 {
                        return Err(Error::input("random dataset needs dim and count >= 1"));
                    }
                    Ok(data::make_random(d, n, seed, params.offset.unwrap_or(0.2)))
                }
                Generator::MulticlassToy => {
                    Err(Error::input("multiclass-toy can only be used by the multiclass command"))
                }
            }
        }
    }
}

/// Multiclass problem named by the config; binary datasets map to `K = 2`.
pub fn build_multiclass(spec: &DatasetSpec, seed: u64) -> Result<MulticlassProblem> {
    match spec {
        DatasetSpec::Csv { csv, multiclass: true } => multiclass::load_multiclass_csv(csv),
        DatasetSpec::Generator { generator: Generator::MulticlassToy, .. } => Ok(multiclass::make_multiclass_toy()),
        other => MulticlassProblem::from_binary(&build_dataset(other, seed)?),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub created_unix: u64,
}

fn metadata() -> Metadata {
    let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Metadata { version: env!("CARGO_PKG_VERSION").into(), created_unix }
}

#[derive(Debug, Serialize)]
pub struct SvmReport<'a> {
    pub kind: &'static str,
    pub config: &'a Value,
    pub metadata: Metadata,
    pub solution: &'a MaxMarginSolution,
    pub distinct_support: usize,
    pub dual: DualPositivity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<&'a DegenerateChain>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub kind: String,
    pub name: String,
    pub config: Value,
    #[serde(default)]
    pub metadata: Value,
    pub trajectory: Trajectory,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport<'a> {
    pub kind: &'static str,
    pub name: &'a str,
    pub variant: Variant,
    pub config: &'a Value,
    pub metadata: Metadata,
    /// Whether the GD theory covers this optimizer; only these count toward the exit code.
    pub theory_applies: bool,
    /// An adaptive method whose direction fails to reach `w_hat`, as expected.
    pub expected_divergence: bool,
    pub passed: bool,
    pub report: &'a RateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSlope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<&'a ResidualOffset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<&'a DegenerateChain>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub variant: Variant,
    pub step_size: f64,
    pub final_t: u64,
    pub direction_gap: f64,
    pub final_loss: f64,
}

#[derive(Debug, Serialize)]
pub struct CompareReport<'a> {
    pub kind: &'static str,
    pub config: &'a Value,
    pub metadata: Metadata,
    pub rows: Vec<CompareRow>,
    /// Largest over smallest final direction gap.
    pub gap_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct MulticlassReport<'a> {
    pub kind: &'static str,
    pub config: &'a Value,
    pub metadata: Metadata,
    pub classes: usize,
    pub svm: &'a KClassSvmSolution,
    pub step_size: f64,
    pub final_loss: f64,
    pub gradient_sum_increment: f64,
    pub bias: &'a MulticlassBias,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub code: i32,
    pub category: &'static str,
    pub message: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::Overflow { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn category(code: i32) -> &'static str {
    match code {
        EXIT_NUMERICAL => "numerical",
        _ => "input",
    }
}

fn infeasible_category(err: &Error) -> &'static str {
    if matches!(err, Error::Infeasible(_)) {
        "infeasible"
    } else {
        category(exit_code(err))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

/// Parses the arguments, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let out_hint = match &cli.command {
        Command::Svm(a) | Command::Run(a) | Command::Compare(a) | Command::Multiclass(a) => a.out.clone(),
        Command::Analyze(a) => a.common.out.clone(),
        Command::Gen(a) => a.common.out.clone(),
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("error: {err}");
            if let Some(dir) = out_hint {
                let report =
                    ErrorReport { kind: "error", code, category: infeasible_category(&err), message: err.to_string() };
                let _ = write_json(&dir.join("error.json"), &report);
            }
            code
        }
    }
}

pub fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Svm(a) => cmd_svm(&load_config(a, None)?),
        Command::Run(a) => cmd_run(&load_config(a, None)?).map(|r| r.code),
        Command::Analyze(a) => cmd_analyze(&load_config(&a.common, None)?, &a.trajectories),
        Command::Compare(a) => cmd_compare(&load_config(a, None)?),
        Command::Multiclass(a) => cmd_multiclass(&load_config(a, Some(Generator::MulticlassToy))?),
        Command::Gen(a) => cmd_gen(a),
    }
}

pub fn cmd_svm(cfg: &LoadedConfig) -> Result<i32> {
    let c = &cfg.config;
    let data = build_dataset(&c.dataset, c.seed)?;
    let sol = margin::solve_hard_margin(&data)?;
    let chain = if sol.degenerate || c.analyses.contains(&Analysis::Decompose) {
        Some(degenerate_chain(&data)?)
    } else {
        None
    };
    let report = SvmReport {
        kind: "svm",
        config: &cfg.raw,
        metadata: metadata(),
        solution: &sol,
        distinct_support: margin::distinct_support_count(&sol, &data),
        dual: margin::dual_positivity_check(&sol, &data),
        chain: chain.as_ref(),
    };
    write_json(&c.out_dir().join("svm.json"), &report)?;
    println!(
        "margin {:.12} support {:?} degenerate {} kkt {:.3e}",
        sol.margin, sol.support, sol.degenerate, sol.kkt_residual
    );
    if let Some(ch) = &chain {
        println!("chain depth {}", ch.depth());
    }
    Ok(EXIT_OK)
}

fn trajectory_stem(label: &str) -> String {
    format!("trajectory_{label}")
}

pub struct RunOutcome {
    pub code: i32,
    pub runs: Vec<(OptimizerSpec, Trajectory)>,
}

fn run_all(c: &ExperimentConfig, loss: &LossSpec, data: &Dataset) -> Result<Vec<(OptimizerSpec, Trajectory)>> {
    let iters = c.iters();
    let results: Vec<Result<Trajectory>> = std::thread::scope(|s| {
        let handles: Vec<_> = c
            .optimizers
            .iter()
            .map(|o| {
                let oc = o.to_config(iters, c.seed);
                s.spawn(move || optim::run(&oc, loss, data))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("optimizer thread panicked")).collect()
    });
    c.optimizers.iter().cloned().zip(results).map(|(o, r)| r.map(|t| (o, t))).collect()
}

pub fn cmd_run(cfg: &LoadedConfig) -> Result<RunOutcome> {
    let c = &cfg.config;
    let data = build_dataset(&c.dataset, c.seed)?;
    let loss = LossSpec::from_config(&c.loss)?;
    let runs = run_all(c, &loss, &data)?;
    let dir = c.out_dir();
    let mut code = EXIT_OK;
    for (o, traj) in &runs {
        let stem = trajectory_stem(&o.label());
        write(&dir.join(format!("{stem}.csv")), &traj.to_csv())?;
        let file = TrajectoryFile {
            kind: "trajectory".into(),
            name: o.label(),
            config: cfg.raw.clone(),
            metadata: serde_json::to_value(metadata())?,
            trajectory: traj.clone(),
        };
        write_json(&dir.join(format!("{stem}.json")), &file)?;
        match &traj.truncated {
            Some(tr) => {
                println!("{}: truncated at step {}: {}", o.label(), tr.step, tr.reason);
                code = EXIT_NUMERICAL;
            }
            None => println!(
                "{}: T={} eta={:.6e} final loss {:.6e}",
                o.label(),
                traj.final_t,
                traj.step_size,
                traj.checkpoints.last().map_or(f64::NAN, |c| c.loss)
            ),
        }
    }
    Ok(RunOutcome { code, runs })
}

fn read_trajectory(path: &Path) -> Result<TrajectoryFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let file: TrajectoryFile = serde_json::from_str(&text)?;
    if file.kind != "trajectory" {
        return Err(Error::Input(format!("{} is not a trajectory file", path.display())));
    }
    Ok(file)
}

/// Everything `analyze` derives for one trajectory.
pub struct TrajectoryAnalysis {
    pub report: RateReport,
    pub series: rates::RateSeries,
    pub offset: Option<ResidualOffset>,
    pub chain: Option<DegenerateChain>,
    pub convergence: Option<ConvergenceReport>,
    pub validation: Option<ValidationSlope>,
}

/// Rate analysis of one binary trajectory. The offset is computed for GD runs
/// on non-degenerate data; the chain for degenerate data.
pub fn analyze_trajectory(c: &ExperimentConfig, data: &Dataset, traj: &Trajectory) -> Result<TrajectoryAnalysis> {
    if traj.dim() != data.dim() {
        return Err(Error::Input(format!(
            "trajectory dimension {} does not match the dataset dimension {}",
            traj.dim(),
            data.dim()
        )));
    }
    let first = traj.checkpoints.iter().find(|p| p.t > 0).map_or(0, |p| p.t);
    if first == 0 || (traj.final_t as f64) < 100.0 * first as f64 {
        return Err(Error::Input(format!("trajectory spans less than two decades (t = {first}..{})", traj.final_t)));
    }
    let sol = margin::solve_hard_margin(data)?;
    let chain = if sol.degenerate { Some(degenerate_chain(data)?) } else { None };
    let gd = traj.config.variant == Variant::Gd;
    let offset = if gd && !sol.degenerate {
        let w0 = traj.config.init.clone().unwrap_or_else(|| vec![0.0; data.dim()]);
        Some(solve_w_tilde(&sol, data, traj.step_size, &w0)?)
    } else {
        None
    };
    let series = rates::residual_series(traj, data, &sol, offset.as_ref(), chain.as_ref())?;
    let report = rates::analyze(&series, c.analysis)?;
    let convergence = if gd { Some(optim::convergence_report(traj, data)?) } else { None };
    let validation = if c.analyses.contains(&Analysis::Validation) || !c.validation.is_empty() {
        Some(validation_for(c, data, traj, &sol)?)
    } else {
        None
    };
    Ok(TrajectoryAnalysis { report, series, offset, chain, convergence, validation })
}

fn validation_for(c: &ExperimentConfig, data: &Dataset, traj: &Trajectory, sol: &MaxMarginSolution) -> Result<ValidationSlope> {
    if c.validation.is_empty() {
        return Err(Error::input("validation analysis requested but no validation rows given"));
    }
    let d = data.dim();
    if c.validation.iter().any(|r| r.len() != d + 1) {
        return Err(Error::input(format!("validation rows need {d} coordinates and a label")));
    }
    let flat: Vec<f64> = c.validation.iter().flat_map(|r| r[..d].to_vec()).collect();
    let labels: Vec<f64> = c.validation.iter().map(|r| r[d]).collect();
    let raw = nalgebra::DMatrix::from_column_slice(d, c.validation.len(), &flat);
    let val = data::fold_labels(&raw, &labels)?;
    rates::validation_loss_slope(traj, &val, &LossSpec::from_config(&c.loss)?, &sol.w_hat)
}

pub fn cmd_analyze(cfg: &LoadedConfig, paths: &[PathBuf]) -> Result<i32> {
    let c = &cfg.config;
    let dir = c.out_dir();
    let paths: Vec<PathBuf> = if paths.is_empty() {
        c.optimizers.iter().map(|o| dir.join(format!("{}.json", trajectory_stem(&o.label())))).collect()
    } else {
        paths.to_vec()
    };
    let data = build_dataset(&c.dataset, c.seed)?;
    let mut code = EXIT_OK;
    for path in &paths {
        let file = read_trajectory(path)?;
        let traj = &file.trajectory;
        let a = analyze_trajectory(c, &data, traj)?;
        let variant = traj.config.variant;
        let theory_applies = variant == Variant::Gd;
        let rates_pass = a.report.all_passed();
        let convergence_pass = a.convergence.is_none_or(|r| r.passes());
        let passed = rates_pass && convergence_pass;
        let direction_failed = a
            .report
            .verdicts
            .iter()
            .any(|v| !v.passed && (v.name == "angle_rate" || v.name == "direction_rate"));
        let expected_divergence = variant == Variant::Adam && direction_failed;
        let stem = format!("report_{}", file.name);
        let report = AnalysisReport {
            kind: "rate_report",
            name: &file.name,
            variant,
            config: &cfg.raw,
            metadata: metadata(),
            theory_applies,
            expected_divergence,
            passed,
            report: &a.report,
            convergence: a.convergence,
            validation: a.validation,
            offset: a.offset.as_ref(),
            chain: a.chain.as_ref(),
        };
        write_json(&dir.join(format!("{stem}.json")), &report)?;
        for fit in &a.report.fits {
            let pairs = a.series.pairs(&fit.quantity)?;
            write(&dir.join(&stem).join(format!("{}.csv", fit.quantity)), &rates::series_csv(&pairs, fit.transform))?;
        }
        for v in &a.report.verdicts {
            println!("{}: {} {} {}", file.name, if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
        if let Some(r) = &a.convergence {
            println!(
                "{}: {} convergence final loss {:.3e}, gradient sum {:.3e}",
                file.name,
                if r.passes() { "PASS" } else { "FAIL" },
                r.final_loss,
                r.gradient_sum_increment
            );
        }
        if let Some(v) = &a.validation {
            println!("{}: validation slope {:.4} (worst margin {:.3})", file.name, v.slope, v.worst_margin);
        }
        if expected_divergence {
            println!("{}: direction does not approach w_hat (expected for adam)", file.name);
        }
        if theory_applies && !passed {
            code = EXIT_THEORY;
        }
    }
    Ok(code)
}

pub fn cmd_compare(cfg: &LoadedConfig) -> Result<i32> {
    let c = &cfg.config;
    if c.optimizers.len() < 2 {
        return Err(Error::input("compare needs at least two optimizer variants"));
    }
    let data = build_dataset(&c.dataset, c.seed)?;
    let loss = LossSpec::from_config(&c.loss)?;
    let sol = margin::solve_hard_margin(&data)?;
    let runs = run_all(c, &loss, &data)?;
    let mut rows = Vec::new();
    for (o, traj) in &runs {
        rows.push(CompareRow {
            name: o.label(),
            variant: o.variant,
            step_size: traj.step_size,
            final_t: traj.final_t,
            direction_gap: rates::direction_gap(&traj.final_w, &sol.w_hat)?,
            final_loss: traj.checkpoints.last().map_or(f64::NAN, |p| p.loss),
        });
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.direction_gap).collect();
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let gap_ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let mut csv = String::from("name,variant,step_size,final_t,direction_gap,final_loss\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name, r.variant, r.step_size, r.final_t, r.direction_gap, r.final_loss
        ));
        println!("{:<12} gap {:.6e} loss {:.6e}", r.name, r.direction_gap, r.final_loss);
    }
    let dir = c.out_dir();
    write(&dir.join("compare.csv"), &csv)?;
    write_json(&dir.join("compare.json"), &CompareReport { kind: "compare", config: &cfg.raw, metadata: metadata(), rows, gap_ratio })?;
    println!("gap ratio {gap_ratio:.3}");
    Ok(EXIT_OK)
}

pub fn cmd_multiclass(cfg: &LoadedConfig) -> Result<i32> {
    let c = &cfg.config;
    let problem = build_multiclass(&c.dataset, c.seed)?;
    let svm = multiclass::solve_kclass_svm(&problem)?;
    let spec = &c.optimizers[0];
    if spec.variant != Variant::Gd {
        return Err(Error::input("the multiclass bias check uses gd"));
    }
    let eta = match spec.step_size {
        Some(s) => s,
        None => problem.default_step()?,
    };
    let oc = spec.to_config(c.iters(), c.seed);
    let traj = optim::run_objective(&oc, &CrossEntropyObjective(&problem), eta)?;
    if let Some(tr) = &traj.truncated {
        return Err(Error::Overflow { sample: 0, msg: format!("multiclass run truncated at step {}: {}", tr.step, tr.reason) });
    }
    let bias = multiclass::multiclass_bias_check(&traj, &svm, c.analysis)?;
    let final_loss = traj.checkpoints.last().map_or(f64::NAN, |p| p.loss);
    let passed = bias.all_bounded() && svm.kkt_residual <= margin::KKT_TOL;
    let dir = c.out_dir();
    write(&dir.join("multiclass_trajectory.csv"), &traj.to_csv())?;
    let report = MulticlassReport {
        kind: "multiclass",
        config: &cfg.raw,
        metadata: metadata(),
        classes: problem.classes(),
        svm: &svm,
        step_size: eta,
        final_loss,
        gradient_sum_increment: optim::gradient_sum_increment(&traj),
        bias: &bias,
        passed,
    };
    write_json(&dir.join("multiclass.json"), &report)?;
    for (k, f) in bias.fits.iter().enumerate() {
        println!(
            "class {}: {} residual sup {:.4e} (first decade {:.4e})",
            k + 1,
            if f.bounded { "PASS" } else { "FAIL" },
            f.sup_last_decade,
            f.sup_first_decade
        );
    }
    println!("svm kkt {:.3e}, final loss {:.3e}", svm.kkt_residual, final_loss);
    Ok(if passed { EXIT_OK } else { EXIT_THEORY })
}

pub fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let cfg = match (&args.generator, &args.common.config) {
        (Some(g), None) => {
            let seed = args.common.seed.unwrap_or(0);
            let mut c = ExperimentConfig::generator(*g, seed);
            c.out = args.common.out.clone();
            c
        }
        _ => {
            let mut c = load_config(&args.common, None)?.config;
            if let Some(g) = args.generator {
                c.dataset = DatasetSpec::Generator { generator: g, params: GeneratorParams::default() };
            }
            c
        }
    };
    let (name, text) = match &cfg.dataset {
        DatasetSpec::Generator { generator: Generator::MulticlassToy, .. } => {
            ("multiclass-toy".to_string(), multiclass::multiclass_to_csv(&multiclass::make_multiclass_toy()))
        }
        DatasetSpec::Generator { generator, .. } => {
            (generator.name().to_string(), data::to_csv(&build_dataset(&cfg.dataset, cfg.seed)?))
        }
        DatasetSpec::Csv { csv, multiclass: false } => ("dataset".to_string(), data::to_csv(&data::load_csv(csv)?)),
        DatasetSpec::Csv { csv, multiclass: true } => {
            ("dataset".to_string(), multiclass::multiclass_to_csv(&multiclass::load_multiclass_csv(csv)?))
        }
    };
    let path = cfg.out_dir().join(format!("{name}.csv"));
    write(&path, &text)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}
