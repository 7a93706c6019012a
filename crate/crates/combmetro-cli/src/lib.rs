//! Batch front-end: experiment configs, single runs, parameter sweeps and strategy validation.

use combmetro::comb_algebra::FactorizedComb;
use combmetro::metrology_zoo::{self, ChannelSpec, Order};
use combmetro::qfi_oracle::{self, OracleError};
use combmetro::sdp_engine::{SdpSettings, SdpStatus};
use combmetro::strategy_spaces::{label, StrategyKind, StrategySetSpec};
use combmetro::strategy_synthesis::{
    isometries_to_comb, membership_residual, optimal_strategy, parse_strategy, strategy_isometries, StrategyChoi, StrategyDoc,
};
use combmetro::task_qfi::{self, QfiSettings, SolverStats};
use combmetro::tensor_algebra as ta;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_N: usize = 3;
/// Relative solver gap above which a non-optimal termination counts as a failure.
const SOLVER_ACCEPT_GAP: f64 = 1e-6;
/// Membership and isometry-roundtrip thresholds used by `validate`.
const MEMBERSHIP_TOL: f64 = 1e-8;
const ISOMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Solver(_) => 2,
            Self::Config(_) | Self::Io { .. } => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Either the total duration `t` or the per-step duration `t_segment`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// `N` identical uses of one channel.
    Channel { channel: ChannelSpec, n: usize },
    /// `N` uses of `signal ∘ noise` or `noise ∘ signal`.
    NoisySignal {
        signal: ChannelSpec,
        noise: ChannelSpec,
        #[serde(default)]
        order: Order,
        n: usize,
    },
    /// Two amplitude-damped phase rotations with different damping.
    NonidenticalPair { p1: f64, p2: f64, phi: f64 },
    /// Two-step system-environment evolution.
    Nonmarkovian {
        phi: f64,
        g: f64,
        #[serde(default)]
        t: Option<f64>,
        #[serde(default)]
        t_segment: Option<f64>,
        #[serde(default)]
        markovian: bool,
    },
}

impl ProcessSpec {
    pub fn n(&self) -> usize {
        match self {
            Self::Channel { n, .. } | Self::NoisySignal { n, .. } => *n,
            Self::NonidenticalPair { .. } | Self::Nonmarkovian { .. } => 2,
        }
    }

    /// Total duration of a non-Markovian process.
    fn total_time(&self) -> Option<Result<f64, CliError>> {
        let Self::Nonmarkovian { t, t_segment, .. } = self else { return None };
        Some(match (t, t_segment) {
            (Some(t), None) => Ok(*t),
            (None, Some(s)) => Ok(2.0 * s),
            _ => Err(config_err("nonmarkovian process needs exactly one of `t` (total) or `t_segment`")),
        })
    }

    pub fn check(&self) -> Result<(), CliError> {
        let n = self.n();
        if !(1..=MAX_N).contains(&n) {
            return Err(config_err(format!("n = {n} is outside 1..={MAX_N}")));
        }
        if let Some(t) = self.total_time() {
            t?;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<FactorizedComb, String> {
        let e = |x: &dyn std::fmt::Display| x.to_string();
        match self {
            Self::Channel { channel, n } => {
                let ch = channel.build().map_err(|x| e(&x))?;
                task_qfi::product_comb(&ch, *n).map_err(|x| e(&x))
            }
            Self::NoisySignal { signal, noise, order, n } => {
                let ch = ChannelSpec::with_noise(signal.clone(), noise.clone(), *order).build().map_err(|x| e(&x))?;
                task_qfi::product_comb(&ch, *n).map_err(|x| e(&x))
            }
            Self::NonidenticalPair { p1, p2, phi } => metrology_zoo::nonidentical_pair(*p1, *p2, *phi).map_err(|x| e(&x)),
            Self::Nonmarkovian { phi, g, markovian, .. } => {
                let t = self.total_time().expect("nonmarkovian").map_err(|x| e(&x))?;
                metrology_zoo::nonmarkovian_swap_comb(*phi, *g, t, *markovian).map_err(|x| e(&x))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// JSON pointer into `process`, e.g. `/noise/p`.
    pub parameter: String,
    pub grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub sdp_gap: f64,
    pub sdp_feasibility: f64,
    pub max_iterations: usize,
    /// Largest accepted relative gap between oracle QFI and solver value.
    pub oracle_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sdp_gap: 1e-9, sdp_feasibility: 1e-9, max_iterations: 200, oracle_gap: 1e-4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub result: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Directory for synthesized strategy documents.
    pub strategies: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub process: ProcessSpec,
    pub strategy_sets: Vec<StrategyKind>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    /// Synthesize a strategy for every set and check it with the state-level oracle.
    #[serde(default = "yes")]
    pub verify: bool,
    /// Only consumed by property sampling; results do not depend on it.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(config_err)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&read(path)?)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.process.check()?;
        if self.strategy_sets.is_empty() {
            return Err(config_err("strategy_sets is empty"));
        }
        let mut seen = Vec::new();
        for &k in &self.strategy_sets {
            if seen.contains(&k) {
                return Err(config_err(format!("strategy set {k} listed twice")));
            }
            seen.push(k);
            if k == StrategyKind::ControlFree && self.process.n() != 2 {
                return Err(config_err("control_free needs n = 2"));
            }
        }
        let t = &self.tolerances;
        if !(t.sdp_gap > 0.0 && t.sdp_feasibility > 0.0 && t.oracle_gap > 0.0 && t.max_iterations > 0)
            || ![t.sdp_gap, t.sdp_feasibility, t.oracle_gap].iter().all(|x| x.is_finite())
        {
            return Err(config_err("tolerances must be positive and finite"));
        }
        if let Some(sw) = &self.sweep {
            if sw.grid.is_empty() {
                return Err(config_err("sweep grid is empty"));
            }
            if sw.grid.iter().any(|x| !x.is_finite()) {
                return Err(config_err("sweep grid has a non-finite value"));
            }
            let base = serde_json::to_value(&self.process).expect("process serializes");
            if !base.pointer(&sw.parameter).is_some_and(Value::is_number) {
                return Err(config_err(format!("sweep parameter {:?} is not a number inside process", sw.parameter)));
            }
        }
        Ok(())
    }

    fn qfi_settings(&self) -> QfiSettings {
        let t = &self.tolerances;
        QfiSettings { sdp: SdpSettings { gap_tol: t.sdp_gap, feas_tol: t.sdp_feasibility, max_iter: t.max_iterations } }
    }

    /// The process with the sweep parameter set to `value`.
    pub fn process_at(&self, value: f64) -> Result<ProcessSpec, CliError> {
        let sw = self.sweep.as_ref().ok_or_else(|| config_err("no sweep configured"))?;
        let mut v = serde_json::to_value(&self.process).expect("process serializes");
        let slot = v.pointer_mut(&sw.parameter).ok_or_else(|| config_err("sweep parameter vanished"))?;
        *slot = json!(value);
        let p: ProcessSpec = serde_json::from_value(v).map_err(config_err)?;
        p.check()?;
        Ok(p)
    }
}

/// Command-line overrides shared by all subcommands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub tol_gap: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(t) = self.tol_gap {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_err("--tol-gap must be positive and finite"));
            }
            cfg.tolerances.oracle_gap = t;
        }
        if self.jobs == Some(0) {
            return Err(config_err("--jobs must be at least 1"));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(|e| config_err(format!("worker pool: {e}")))
    }
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Rounds every float in a JSON tree to 12 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round12(x))) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_json),
        Value::Object(m) => m.values_mut().for_each(round_json),
        _ => {}
    }
}

fn fmt_num(x: f64) -> String {
    format!("{}", round12(x))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Process,
    Solver,
    Synthesis,
    Oracle,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub j_sld: f64,
    pub gap: f64,
    pub measurement_cfi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisSummary {
    pub route: String,
    pub objective: f64,
    pub saddle_residual: f64,
    pub membership_residual: f64,
}

/// Everything computed for one strategy set at one process point.
#[derive(Clone, Debug, Serialize)]
pub struct SetOutcome {
    pub strategy_set: StrategyKind,
    pub lambda: Option<f64>,
    pub solver: Option<SolverStats>,
    pub synthesis: Option<SynthesisSummary>,
    pub oracle: Option<OracleSummary>,
    pub failure: Option<Failure>,
    #[serde(skip)]
    pub strategy: Option<StrategyDoc>,
}

impl SetOutcome {
    fn new(kind: StrategyKind) -> Self {
        Self { strategy_set: kind, lambda: None, solver: None, synthesis: None, oracle: None, failure: None, strategy: None }
    }

    fn fail(mut self, stage: Stage, message: impl std::fmt::Display) -> Self {
        self.failure = Some(Failure { stage, message: message.to_string() });
        self
    }
}

pub fn set_spec(fc: &FactorizedComb, kind: StrategyKind) -> StrategySetSpec {
    let dims = fc.layout().dims();
    StrategySetSpec::new(kind, dims.len() / 2, dims)
}

/// Solves, and optionally synthesizes, verifies and exports, one strategy set.
pub fn evaluate(fc: &FactorizedComb, kind: StrategyKind, cfg: &ExperimentConfig, export: bool) -> SetOutcome {
    let mut out = SetOutcome::new(kind);
    let spec = set_spec(fc, kind);
    let res = match task_qfi::task_qfi_with(fc, &spec, &cfg.qfi_settings()) {
        Ok(r) => r,
        Err(e) => return out.fail(Stage::Solver, e),
    };
    out.lambda = Some(res.value);
    out.solver = Some(res.stats.clone());
    let s = &res.stats;
    if s.status == SdpStatus::Infeasible || (s.status != SdpStatus::Optimal && s.gap > SOLVER_ACCEPT_GAP) {
        return out.fail(Stage::Solver, format!("solver stopped with status {:?} and gap {:.3e}", s.status, s.gap));
    }
    if !(cfg.verify || export) {
        return out;
    }
    let syn = match optimal_strategy(fc, &spec, &res) {
        Ok(x) => x,
        Err(e) => return out.fail(Stage::Synthesis, e),
    };
    let r = &syn.report;
    out.synthesis = Some(SynthesisSummary {
        route: serde_json::to_value(r.route).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        objective: r.objective,
        saddle_residual: r.saddle_residual,
        membership_residual: r.membership_residual,
    });
    if export {
        let isos = strategy_isometries(&syn.strategy).unwrap_or_default();
        out.strategy = Some(StrategyDoc::new(&syn.strategy, Some(res.value), &isos));
    }
    if cfg.verify {
        match qfi_oracle::verify_strategy(&syn.strategy, fc, res.value) {
            Ok(v) => {
                out.oracle = Some(OracleSummary { j_sld: v.j_sld, gap: v.gap, measurement_cfi: v.oracle.measurement_cfi });
                if v.gap > cfg.tolerances.oracle_gap {
                    return out.fail(Stage::Oracle, format!("oracle gap {:.3e} exceeds {:.3e}", v.gap, cfg.tolerances.oracle_gap));
                }
            }
            Err(e) => return out.fail(Stage::Oracle, e),
        }
    }
    out
}

fn export_path(cfg: &ExperimentConfig, kind: StrategyKind, index: Option<usize>) -> Option<PathBuf> {
    let dir = cfg.outputs.strategies.as_ref()?;
    Some(match index {
        None => dir.join(format!("{kind}.json")),
        Some(i) => dir.join(format!("{kind}_{i:04}.json")),
    })
}

fn write_exports(cfg: &ExperimentConfig, outcomes: &[SetOutcome], index: Option<usize>) -> Result<Vec<Option<String>>, CliError> {
    outcomes
        .iter()
        .map(|o| match (&o.strategy, export_path(cfg, o.strategy_set, index)) {
            (Some(doc), Some(path)) => {
                write(&path, &doc.to_json())?;
                Ok(Some(path.display().to_string()))
            }
            _ => Ok(None),
        })
        .collect()
}

/// Output of a subcommand: the document to emit and whether every item succeeded.
#[derive(Debug)]
pub struct Report {
    pub text: String,
    pub ok: bool,
    /// Where the document was written, when not on stdout.
    pub path: Option<PathBuf>,
}

fn emit(text: String, ok: bool, path: Option<&PathBuf>) -> Result<Report, CliError> {
    if let Some(p) = path {
        write(p, &text)?;
    }
    Ok(Report { text, ok, path: path.cloned() })
}

fn pretty(mut v: Value) -> String {
    round_json(&mut v);
    serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
}

/// Evaluates every configured strategy set at the base process point.
pub fn run_task(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<Report, CliError> {
    ov.apply(&mut cfg)?;
    let fc = cfg.process.build().map_err(config_err)?;
    let export = cfg.outputs.strategies.is_some();
    let pool = ov.pool()?;
    let outcomes: Vec<SetOutcome> = pool.install(|| cfg.strategy_sets.par_iter().map(|&k| evaluate(&fc, k, &cfg, export)).collect());
    let files = write_exports(&cfg, &outcomes, None)?;
    let ok = outcomes.iter().all(|o| o.failure.is_none());
    let results: Vec<Value> = outcomes
        .iter()
        .zip(files)
        .map(|(o, f)| {
            let mut v = serde_json::to_value(o).expect("outcome serializes");
            v["strategy_file"] = json!(f);
            v
        })
        .collect();
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "process": cfg.process,
        "n": cfg.process.n(),
        "results": results,
    });
    if let Some(t) = cfg.process.total_time() {
        doc["total_time"] = json!(t?);
    }
    emit(pretty(doc), ok, ov.out.as_ref().or(cfg.outputs.result.as_ref()))
}

/// Evaluates the grid and renders one CSV row per grid value, in grid order.
pub fn sweep(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<Report, CliError> {
    ov.apply(&mut cfg)?;
    let sw = cfg.sweep.clone().ok_or_else(|| config_err("config has no sweep section"))?;
    let combs: Vec<Result<FactorizedComb, String>> = sw
        .grid
        .iter()
        .map(|&x| cfg.process_at(x).map_err(|e| e.to_string()).and_then(|p| p.build()))
        .collect();
    let export = cfg.outputs.strategies.is_some();
    let tasks: Vec<(usize, StrategyKind)> = (0..sw.grid.len()).flat_map(|i| cfg.strategy_sets.iter().map(move |&k| (i, k))).collect();
    let pool = ov.pool()?;
    let outcomes: Vec<SetOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, k)| match &combs[i] {
                Ok(fc) => evaluate(fc, k, &cfg, export),
                Err(e) => SetOutcome::new(k).fail(Stage::Process, e),
            })
            .collect()
    });
    let width = cfg.strategy_sets.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["grid_value".to_owned()];
    header.extend(cfg.strategy_sets.iter().map(|k| k.to_string()));
    header.extend(cfg.strategy_sets.iter().map(|k| format!("{k}_oracle_gap")));
    header.push("flags".to_owned());
    w.write_record(&header).map_err(|e| config_err(e))?;
    let mut ok = true;
    for (i, row) in outcomes.chunks(width).enumerate() {
        write_exports(&cfg, row, Some(i))?;
        let mut rec = vec![fmt_num(sw.grid[i])];
        rec.extend(row.iter().map(|o| o.lambda.map(fmt_num).unwrap_or_default()));
        rec.extend(row.iter().map(|o| o.oracle.as_ref().map(|x| fmt_num(x.gap)).unwrap_or_default()));
        let flags: Vec<String> = row
            .iter()
            .filter_map(|o| o.failure.as_ref().map(|f| format!("{}:{}", o.strategy_set, serde_json::to_value(f.stage).unwrap().as_str().unwrap())))
            .collect();
        ok &= flags.is_empty();
        rec.push(flags.join(";"));
        w.write_record(&rec).map_err(|e| config_err(e))?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| config_err(e.to_string()))?).expect("csv is utf-8");
    emit(text, ok, ov.out.as_ref().or(cfg.outputs.csv.as_ref()))
}

fn relative_frob(a: &combmetro::linalg::CMat, b: &combmetro::linalg::CMat) -> f64 {
    combmetro::linalg::frob(&(a - b)) / combmetro::linalg::frob(b).max(1e-300)
}

/// Largest relative mismatch between stored isometry chains and the operators they should realize.
fn isometry_residual(strategy: &StrategyChoi, chains: &[(Vec<usize>, combmetro::strategy_synthesis::IsometrySequence)]) -> Result<f64, CliError> {
    let labels: Vec<String> = (1..=2 * strategy.spec.n).map(label).collect();
    let mut worst = 0.0f64;
    for (order, seq) in chains {
        let target = match strategy.spec.kind {
            StrategyKind::Par | StrategyKind::Seq => &strategy.marginal,
            _ => match strategy.branches.iter().find(|b| &b.order == order) {
                Some(b) => &b.operator,
                None => return Err(config_err(format!("isometry chain for order {order:?} has no matching branch"))),
            },
        };
        let defect = seq.steps.iter().map(|s| s.isometry_defect()).fold(0.0, f64::max);
        let comb = isometries_to_comb(seq).map_err(config_err)?;
        let kept: Vec<&str> = labels.iter().map(String::as_str).filter(|l| comb.layout().contains(l)).collect();
        let comb = ta::permute(&comb, &kept).map_err(config_err)?;
        if comb.layout() != target.layout() {
            return Err(config_err(format!("isometry chain for order {order:?} acts on the wrong spaces")));
        }
        worst = worst.max(defect).max(relative_frob(comb.matrix(), target.matrix()));
    }
    Ok(worst)
}

/// Checks a stored strategy against the process of `cfg` with the state-level oracle.
pub fn validate(strategy_path: &Path, mut cfg: ExperimentConfig, ov: &Overrides) -> Result<Report, CliError> {
    ov.apply(&mut cfg)?;
    let parsed = parse_strategy(&read(strategy_path)?).map_err(config_err)?;
    let fc = cfg.process.build().map_err(config_err)?;
    let spec = set_spec(&fc, parsed.strategy.spec.kind);
    if spec.dims != parsed.strategy.spec.dims {
        return Err(config_err(format!("strategy dims {:?} do not match process dims {:?}", parsed.strategy.spec.dims, spec.dims)));
    }
    let (lambda, source) = match parsed.lambda {
        Some(l) => (l, "document"),
        None => {
            let r = task_qfi::task_qfi_with(&fc, &parsed.strategy.spec, &cfg.qfi_settings()).map_err(|e| CliError::Solver(e.to_string()))?;
            (r.value, "solver")
        }
    };
    let membership = membership_residual(&parsed.strategy);
    let iso = isometry_residual(&parsed.strategy, &parsed.isometries)?;
    let (oracle, failure) = match qfi_oracle::verify_strategy(&parsed.strategy, &fc, lambda) {
        Ok(v) => (Some(OracleSummary { j_sld: v.j_sld, gap: v.gap, measurement_cfi: v.oracle.measurement_cfi }), None),
        Err(e @ (OracleError::Invalid(_) | OracleError::Tensor(_))) => return Err(config_err(e)),
        Err(e) => (None, Some(e.to_string())),
    };
    let ok = failure.is_none()
        && oracle.as_ref().is_some_and(|o| o.gap <= cfg.tolerances.oracle_gap)
        && membership <= MEMBERSHIP_TOL
        && iso <= ISOMETRY_TOL;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "strategy_set": parsed.strategy.spec.kind,
        "lambda": lambda,
        "lambda_source": source,
        "oracle": oracle,
        "oracle_error": failure,
        "membership_residual": membership,
        "isometry_chains": parsed.isometries.len(),
        "isometry_residual": iso,
        "pass": ok,
    });
    emit(pretty(doc), ok, ov.out.as_ref())
}
