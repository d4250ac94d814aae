//! Declarative experiment runner: configuration, pipelines and result files.

mod depolarizing;
mod qaoa;
mod qpe;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::Observable;
use crate::error::{CdrError, Result};
use crate::regression::{fit_constant, fit_linear, predict, FitResult, TrainingSample};
use crate::sim_exact::SimLimits;
use crate::sim_noisy::{NoiseModel, NoisyBackend, ShotSpec};
use crate::trainingset::{ChainConfig, TrainingSet};
use crate::workloads::OptimizerConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Seed stream labels below the master seed.
pub(crate) mod stream {
    pub const OPTIMIZE: u64 = 11;
    pub const TARGET: u64 = 12;
    pub const CHAIN: u64 = 13;
    pub const ZNE: u64 = 14;
    pub const INPUT: u64 = 15;
    pub const PARAMS: u64 = 16;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    QaoaCdr,
    QpeCdr,
    ZneBaseline,
    McmcDiagnostics,
    DepolarizingValidation,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::QaoaCdr => "qaoa-cdr",
            ExperimentKind::QpeCdr => "qpe-cdr",
            ExperimentKind::ZneBaseline => "zne-baseline",
            ExperimentKind::McmcDiagnostics => "mcmc-diagnostics",
            ExperimentKind::DepolarizingValidation => "depolarizing-validation",
        }
    }
}

/// How the correction is fitted for a multi-term observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// One fit per Pauli term; the corrected value is `Σ c_k·f_k(x_k)` with
    /// error bar `Σ |c_k|·bar_k`.
    #[default]
    PerTerm,
    /// A single fit on the combined observable.
    Observable,
}

/// QAOA on the open transverse-field Ising chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaWorkload {
    pub qubits: usize,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Values of `N` to sweep; empty means the chain's own `N`.
    #[serde(default)]
    pub refinement: Vec<usize>,
    #[serde(default)]
    pub fit: FitMode,
    /// Also report the constant-ansatz correction.
    #[serde(default = "yes")]
    pub constant_ansatz: bool,
}

fn default_g() -> f64 {
    2.0
}

fn default_layers() -> usize {
    2
}

fn default_instances() -> usize {
    10
}

fn yes() -> bool {
    true
}

/// Phase estimation of the default three-qubit Hamiltonian over random inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpeWorkload {
    #[serde(default = "default_inputs")]
    pub inputs: usize,
    #[serde(default = "crate::workloads::qpe::default_hamiltonian")]
    pub hamiltonian: Observable,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub bin_centers: Option<Vec<f64>>,
    #[serde(default)]
    pub bin_halfwidth: Option<f64>,
    #[serde(default)]
    pub bin_subdivisions: Option<usize>,
}

fn default_inputs() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZneConfig {
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
}

impl Default for ZneConfig {
    fn default() -> Self {
        ZneConfig { scales: default_scales() }
    }
}

fn default_scales() -> Vec<f64> {
    vec![1.0, 1.1, 1.25, 1.5]
}

/// Global-depolarizing sweep on random QAOA circuits with exact pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepolarizingWorkload {
    pub qubits: usize,
    pub layers: usize,
    pub circuits: usize,
    pub p_errs: Vec<f64>,
    pub ms: Vec<usize>,
    /// Identity coefficient added to the Ising observable so the offset `a2` is nonzero.
    pub offset: f64,
}

impl Default for DepolarizingWorkload {
    fn default() -> Self {
        DepolarizingWorkload {
            qubits: 4,
            layers: 2,
            circuits: 3,
            p_errs: vec![0.01, 0.05, 0.1],
            ms: vec![1, 5, 20],
            offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub steps: usize,
    pub max_lag: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { steps: 5000, max_lag: 200 }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub chain: ChainConfig,
    /// `null` reads out exact noisy expectation values.
    #[serde(default = "default_shots")]
    pub shots: Option<ShotSpec>,
    #[serde(default)]
    pub noisy_backend: NoisyBackend,
    #[serde(default)]
    pub limits: SimLimits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qaoa: Option<QaoaWorkload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qpe: Option<QpeWorkload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zne: Option<ZneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depolarizing: Option<DepolarizingWorkload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsConfig>,
}

fn default_shots() -> Option<ShotSpec> {
    Some(ShotSpec::default())
}

fn cfg_err<E: std::fmt::Display>(path: &str) -> impl FnOnce(E) -> CdrError + '_ {
    move |e| CdrError::config(path, e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CdrError::config(path, e.into_inner().to_string())
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CdrError::config(
                "schema",
                format!("unsupported schema {}, expected {SCHEMA_VERSION}", cfg.schema),
            ));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub(crate) fn require_qaoa(&self) -> Result<&QaoaWorkload> {
        self.qaoa
            .as_ref()
            .ok_or_else(|| CdrError::config("qaoa", format!("required for kind {}", self.kind.name())))
    }

    /// Checks every nested section and the capacity of the chosen simulators.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(CdrError::config("schema", format!("expected {SCHEMA_VERSION}")));
        }
        self.noise.validate().map_err(cfg_err("noise"))?;
        self.chain.validate().map_err(cfg_err("chain"))?;
        let qubits = match self.kind {
            ExperimentKind::QaoaCdr | ExperimentKind::ZneBaseline | ExperimentKind::McmcDiagnostics => {
                let w = self.require_qaoa()?;
                crate::workloads::IsingSpec::new(w.qubits, w.g).map_err(cfg_err("qaoa.qubits"))?;
                if w.layers == 0 {
                    return Err(CdrError::config("qaoa.layers", "must be at least 1"));
                }
                if w.instances == 0 {
                    return Err(CdrError::config("qaoa.instances", "must be at least 1"));
                }
                let rotations = (2 * w.qubits - 1) * w.layers;
                for (i, n) in qaoa::refinement_values(w, &self.chain).iter().enumerate() {
                    if *n > rotations {
                        let path = if w.refinement.is_empty() {
                            "chain.N".to_string()
                        } else {
                            format!("qaoa.refinement[{i}]")
                        };
                        return Err(CdrError::config(
                            path,
                            format!("N = {n} exceeds the {rotations} rotations of the circuit"),
                        ));
                    }
                }
                if self.kind == ExperimentKind::ZneBaseline {
                    self.zne_scales()?;
                }
                if let Some(z) = &self.zne {
                    check_scales(&z.scales)?;
                }
                w.qubits
            }
            ExperimentKind::QpeCdr => {
                let w = self
                    .qpe
                    .as_ref()
                    .ok_or_else(|| CdrError::config("qpe", "required for kind qpe-cdr"))?;
                if w.inputs == 0 {
                    return Err(CdrError::config("qpe.inputs", "must be at least 1"));
                }
                let spec = qpe::spec_for(w, vec![0.0; 2 * w.hamiltonian.width().unwrap_or(0)]);
                spec.validate().map_err(cfg_err("qpe"))?;
                let rotations = qpe::rotation_count(&spec);
                if self.chain.n_non_clifford > rotations {
                    return Err(CdrError::config(
                        "chain.N",
                        format!("N = {} exceeds the {rotations} rotations of the QPE circuits", self.chain.n_non_clifford),
                    ));
                }
                spec.system_qubits() + 1
            }
            ExperimentKind::DepolarizingValidation => {
                let w = self.depolarizing.clone().unwrap_or_default();
                crate::workloads::IsingSpec::new(w.qubits, 1.0).map_err(cfg_err("depolarizing.qubits"))?;
                if w.circuits == 0 || w.layers == 0 {
                    return Err(CdrError::config("depolarizing", "circuits and layers must be positive"));
                }
                for (i, p) in w.p_errs.iter().enumerate() {
                    if !(0.0..1.0).contains(p) {
                        return Err(CdrError::config(format!("depolarizing.p_errs[{i}]"), "must lie in [0, 1)"));
                    }
                }
                if self.chain.n_non_clifford > (2 * w.qubits - 1) * w.layers {
                    return Err(CdrError::config("chain.N", "exceeds the rotations of the circuit"));
                }
                w.qubits
            }
        };
        if let Some(shots) = self.shots {
            shots.per_term(1).map_err(cfg_err("shots"))?;
        }
        if matches!(self.noisy_backend, NoisyBackend::DensityMatrix) && qubits > self.limits.density_max_qubits {
            return Err(CdrError::Capacity(format!(
                "{qubits} qubits exceed the density-matrix limit of {}; use the trajectory backend or raise limits.density_max_qubits",
                self.limits.density_max_qubits
            )));
        }
        Ok(())
    }

    fn zne_scales(&self) -> Result<Vec<f64>> {
        let scales = self.zne.clone().unwrap_or_default().scales;
        check_scales(&scales)?;
        Ok(scales)
    }
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.len() < 2 || scales.iter().any(|c| !(c.is_finite() && *c >= 1.0)) {
        return Err(CdrError::config("zne.scales", "need at least two factors, each ≥ 1"));
    }
    let distinct: BTreeSet<u64> = scales.iter().map(|c| c.to_bits()).collect();
    if distinct.len() != scales.len() {
        return Err(CdrError::config("zne.scales", "factors must be distinct"));
    }
    Ok(())
}

/// Overrides applied on top of a configuration by the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Value and accuracy of one estimation method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_bar: Option<f64>,
    pub relative_error: f64,
}

impl MethodResult {
    pub(crate) fn scalar(value: f64, error_bar: Option<f64>, exact: f64) -> Self {
        MethodResult {
            value: Some(value),
            error_bar,
            relative_error: relative_error(value, exact),
        }
    }
}

/// `|value − exact| / |exact|`.
pub fn relative_error(value: f64, exact: f64) -> f64 {
    (value - exact).abs() / exact.abs()
}

/// One row of results: an instance, possibly at one refinement value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub key: String,
    pub instance: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n_non_clifford: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<f64>,
    pub methods: BTreeMap<String, MethodResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shots_total: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi_mcmc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acceptance_rate: Option<f64>,
    #[serde(default)]
    pub details: serde_json::Value,
}

/// Mean and maximum relative error of one method, per refinement value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n_non_clifford: Option<usize>,
    pub count: usize,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
}

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub records: Vec<InstanceRecord>,
    pub summary: Vec<SummaryRow>,
    #[serde(default)]
    pub report: serde_json::Value,
}

impl ResultSet {
    pub(crate) fn new(cfg: &ExperimentConfig, records: Vec<InstanceRecord>, report: serde_json::Value) -> Self {
        let mut groups: BTreeMap<(String, Option<usize>), Vec<f64>> = BTreeMap::new();
        for r in &records {
            for (m, res) in &r.methods {
                groups
                    .entry((m.clone(), r.n_non_clifford))
                    .or_default()
                    .push(res.relative_error);
            }
        }
        let summary = groups
            .into_iter()
            .map(|((method, n), errs)| SummaryRow {
                method,
                n_non_clifford: n,
                count: errs.len(),
                mean_relative_error: errs.iter().sum::<f64>() / errs.len() as f64,
                max_relative_error: errs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
            .collect();
        ResultSet {
            schema: SCHEMA_VERSION,
            kind: cfg.kind,
            seed: cfg.seed,
            records,
            summary,
            report,
        }
    }

    /// Mean relative error of `method` over records at refinement `n`.
    pub fn mean_error(&self, method: &str, n: Option<usize>) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.n_non_clifford == n)
            .map(|s| s.mean_relative_error)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CdrError::parse(path, e.into_inner().to_string())
        })
    }

    /// `results.csv`: one row per record with value, error bar and relative
    /// error of every method.
    pub fn to_csv(&self) -> String {
        let methods: BTreeSet<&String> = self.records.iter().flat_map(|r| r.methods.keys()).collect();
        let mut out = String::from("key,instance,N,exact,shots_total,xi_mcmc,acceptance_rate");
        for m in &methods {
            write!(out, ",{m},{m}_error_bar,{m}_relative_error").unwrap();
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.records {
            write!(
                out,
                "{},{},{},{},{},{},{}",
                r.key,
                r.instance,
                r.n_non_clifford.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.exact),
                r.shots_total.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.xi_mcmc),
                opt(r.acceptance_rate),
            )
            .unwrap();
            for m in &methods {
                match r.methods.get(*m) {
                    Some(res) => write!(out, ",{},{},{:?}", opt(res.value), opt(res.error_bar), res.relative_error).unwrap(),
                    None => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Files produced by a run, before they are written.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub results: ResultSet,
    /// Relative path and contents of every extra file.
    pub files: Vec<(String, String)>,
    /// Wall time per record key, in seconds.
    pub timings: Vec<(String, f64)>,
}

/// Executes the pipeline of `cfg.kind` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::QaoaCdr => qaoa::run_cdr(cfg),
        ExperimentKind::ZneBaseline => qaoa::run_zne(cfg),
        ExperimentKind::McmcDiagnostics => qaoa::run_diagnostics(cfg),
        ExperimentKind::QpeCdr => qpe::run(cfg),
        ExperimentKind::DepolarizingValidation => depolarizing::run(cfg),
    }
}

/// Runs `config` with command-line overrides and writes every result file
/// into the output directory. Returns the results and the directory.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<(ResultSet, PathBuf)> {
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let started = std::time::Instant::now();
    let artifacts = with_workers(opts.workers, || execute(&cfg))?;
    let total = started.elapsed().as_secs_f64();

    fs::create_dir_all(&out)?;
    let mut written = cfg.clone();
    written.output = None;
    fs::write(out.join("config.json"), written.to_json() + "\n")?;
    fs::write(out.join("results.json"), artifacts.results.to_json() + "\n")?;
    fs::write(out.join("results.csv"), artifacts.results.to_csv())?;
    for (name, contents) in &artifacts.files {
        let path = out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    let timing = serde_json::json!({
        "total_seconds": total,
        "workers": opts.workers,
        "records": artifacts.timings.iter().map(|(k, t)| serde_json::json!({"key": k, "seconds": t})).collect::<Vec<_>>(),
    });
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timing).expect("json") + "\n")?;
    Ok((artifacts.results, out))
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(0) => Err(CdrError::config("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CdrError::config("workers", e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    if workers == Some(0) {
        return Err(CdrError::config("workers", "must be at least 1"));
    }
    f()
}

/// Result of correcting one measured observable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct Correction {
    pub value: f64,
    pub error_bar: f64,
    pub fits: Vec<TermFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct TermFit {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term: Option<usize>,
    pub fit: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

fn fit_or_fallback(samples: &[TrainingSample], constant: bool) -> Result<(FitResult, Option<String>)> {
    if constant {
        return Ok((fit_constant(samples)?, None));
    }
    match fit_linear(samples) {
        Ok(f) => Ok((f, None)),
        Err(CdrError::Degenerate(msg)) => Ok((fit_constant(samples)?, Some(msg))),
        Err(e) => Err(e),
    }
}

/// Applies the linear (or constant) correction to `noisy` term values.
pub(crate) fn correct(
    obs: &Observable,
    ts: &TrainingSet,
    noisy: &[f64],
    mode: FitMode,
    constant: bool,
) -> Result<Correction> {
    match mode {
        FitMode::Observable => {
            let (fit, fallback) = fit_or_fallback(&ts.observable_samples(obs), constant)?;
            let p = predict(&fit, obs.combine(noisy));
            Ok(Correction {
                value: p.value,
                error_bar: p.error_bar,
                fits: vec![TermFit { term: None, fit, fallback }],
            })
        }
        FitMode::PerTerm => {
            let mut value = 0.0;
            let mut error_bar = 0.0;
            let mut fits = Vec::new();
            for (k, term) in obs.terms().iter().enumerate() {
                if term.paulis.is_identity() {
                    value += term.coeff * noisy[k];
                    continue;
                }
                let (fit, fallback) = fit_or_fallback(&ts.term_samples(k), constant)?;
                let p = predict(&fit, noisy[k]);
                value += term.coeff * p.value;
                error_bar += term.coeff.abs() * p.error_bar;
                fits.push(TermFit { term: Some(k), fit, fallback });
            }
            Ok(Correction { value, error_bar, fits })
        }
    }
}

/// Plain-text data file with a `#` header line.
pub(crate) fn dat_file(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("# {header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Per-instance comparison of several result directories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// `label:method` for every compared column.
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

/// Aligns the relative errors of every method across result directories.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.is_empty() {
        return Err(CdrError::Invalid("compare needs at least one result directory".into()));
    }
    let sets: Vec<ResultSet> = dirs
        .iter()
        .map(|d| ResultSet::from_json(&fs::read_to_string(d.join("results.json"))?))
        .collect::<Result<_>>()?;
    let keys: Vec<String> = sets[0].records.iter().map(|r| r.key.clone()).collect();
    let key_set: BTreeSet<&String> = keys.iter().collect();
    for (d, s) in dirs.iter().zip(&sets).skip(1) {
        let other: BTreeSet<&String> = s.records.iter().map(|r| &r.key).collect();
        if other != key_set {
            return Err(CdrError::Invalid(format!(
                "{} has a different instance set than {}",
                d.display(),
                dirs[0].display()
            )));
        }
    }
    let mut columns = Vec::new();
    let mut sources = Vec::new();
    for (i, (d, s)) in dirs.iter().zip(&sets).enumerate() {
        let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let label = format!("{i}:{name}");
        let methods: BTreeSet<&String> = s.records.iter().flat_map(|r| r.methods.keys()).collect();
        for m in methods {
            columns.push(format!("{label}:{m}"));
            sources.push((i, m.clone()));
        }
    }
    let rows: Vec<(String, Vec<Option<f64>>)> = keys
        .iter()
        .map(|k| {
            let cells = sources
                .iter()
                .map(|(i, m)| {
                    sets[*i]
                        .records
                        .iter()
                        .find(|r| &r.key == k)
                        .and_then(|r| r.methods.get(m))
                        .map(|res| res.relative_error)
                })
                .collect();
            (k.clone(), cells)
        })
        .collect();
    let column = |j: usize| rows.iter().filter_map(move |(_, c)| c[j]);
    let mean = (0..columns.len())
        .map(|j| {
            let v: Vec<f64> = column(j).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        })
        .collect();
    let max = (0..columns.len())
        .map(|j| column(j).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(Comparison { columns, rows, mean, max })
}

impl Comparison {
    /// Tab-separated table of relative errors with mean and max rows.
    pub fn to_table(&self) -> String {
        let mut out = String::from("instance");
        for c in &self.columns {
            write!(out, "\t{c}").unwrap();
        }
        out.push('\n');
        for (k, cells) in &self.rows {
            out.push_str(k);
            for c in cells {
                match c {
                    Some(v) => write!(out, "\t{v:.6e}").unwrap(),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        for (name, vals) in [("mean", &self.mean), ("max", &self.max)] {
            out.push_str(name);
            for v in vals {
                write!(out, "\t{v:.6e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}
