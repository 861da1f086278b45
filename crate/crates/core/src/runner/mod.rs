//! Run configurations, parallel ensemble execution and output files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_naf, estimate_tw_coherence_initial, estimate_tw_pop_coherence, flux_flux_rate,
    momentum_histogram, population, population_difference, EstimateContext, EstimateSeries, Histogram,
    HistogramWeight, NuclearObservable, Reduction, Representation,
};
use crate::model::ModelConfig;
use crate::model::{ElectronicInit, ModelSpec};
use crate::propagation::{
    initialize, propagate_trajectory, InitialDraw, Method, MethodOptions, RecordOptions, TrajectoryRecord,
    TrajectoryStats,
};
use crate::sampling::trajectory_rng;

mod dvr_job;
mod sweep;
mod verify;

pub use dvr_job::{dvr_final_observables, dvr_setup, run_dvr, DvrConfig, DvrReport, GridSpec};
pub use sweep::{set_dotted, sweep, SweepJob, SweepReport};
pub use verify::{dvr_sanity, rabi_case, time_grid, verify, CheckLine, VerifyOptions, VerifyReport, VerifySuite};

/// Version of the manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest tolerated fraction of failed trajectories.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A complete ensemble run. State labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub method: MethodOptions,
    pub ensemble: usize,
    pub dt: f64,
    pub t_max: f64,
    /// Record every `stride`-th step (the final step is always recorded).
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimators: Vec<EstimatorRequest>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub reduction: Reduction,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Start from the coherence `|n⟩⟨m|` instead of the model's initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_coherence: Option<[usize; 2]>,
    /// Directory that relative model-file paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Binning of a momentum histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bins {
    Edges(Vec<f64>),
    Uniform { min: f64, max: f64, n: usize },
}

impl Bins {
    pub fn edges(&self) -> Result<Vec<f64>> {
        match self {
            Bins::Edges(e) => Ok(e.clone()),
            Bins::Uniform { min, max, n } => {
                if *n == 0 || !(max > min) {
                    return Err(Error::Config("histogram bins need n > 0 and max > min".into()));
                }
                Ok((0..=*n).map(|i| min + (max - min) * i as f64 / *n as f64).collect())
            }
        }
    }
}

/// One requested output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorRequest {
    /// Populations of `states` (all when absent).
    Population {
        #[serde(default)]
        representation: Representation,
        #[serde(default)]
        states: Option<Vec<usize>>,
        #[serde(default)]
        observable: NuclearObservable,
    },
    /// `P_1 − P_2` in the diabatic basis.
    PopulationDifference,
    /// `C_{nm,kl}` with `|n⟩⟨m|` the model's initial operator.
    Correlation {
        k: usize,
        l: usize,
        #[serde(default)]
        representation: Representation,
        #[serde(default)]
        observable: NuclearObservable,
    },
    /// Transmission and reflection per state, as time series.
    Scattering {
        #[serde(default = "adiabatic")]
        representation: Representation,
    },
    MomentumHistogram {
        #[serde(default)]
        coordinate: usize,
        bins: Bins,
        /// Sample times; the final time when empty.
        #[serde(default)]
        times: Vec<f64>,
        #[serde(default)]
        weight: HistogramWeight,
        #[serde(default = "adiabatic")]
        representation: Representation,
    },
    /// Flux-flux correlation and its integral for a two-state model started
    /// from the `|1⟩⟨2|` coherence.
    FluxRate { delta: f64 },
}

fn adiabatic() -> Representation {
    Representation::Adiabatic
}

impl EstimatorRequest {
    fn needs_nuclear(&self) -> bool {
        match self {
            EstimatorRequest::Population { observable, .. } | EstimatorRequest::Correlation { observable, .. } => {
                observable.needs_nuclear()
            }
            EstimatorRequest::Scattering { .. } | EstimatorRequest::MomentumHistogram { .. } => true,
            _ => false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; relative model paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble == 0 {
            return Err(Error::Config("ensemble must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(self.t_max >= self.dt) {
            return Err(Error::Config("t_max must be at least dt".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Sample times `k·dt` for every `stride`-th step and the final step.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = (self.t_max / self.dt).round() as usize;
        let mut steps: Vec<usize> = (0..=n).step_by(self.stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps.into_iter().map(|k| k as f64 * self.dt).collect()
    }

    /// SHA-256 of the semantic content (output location and worker count excluded).
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            obj.remove("workers");
        }
        let digest = Sha256::digest(serde_json::to_string(&v)?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let mut model = self.model.build_in(self.base_dir.as_deref())?;
        if let Some([n, m]) = self.initial_coherence {
            let f = model.n_states();
            let (n, m) = (label(n, f)?, label(m, f)?);
            if n == m {
                return Err(Error::Config("initial coherence needs two distinct states".into()));
            }
            model.init.electronic = ElectronicInit::Coherence(n, m);
        }
        model.validate()?;
        Ok(model)
    }

    fn record_options(&self) -> RecordOptions {
        RecordOptions {
            nuclear: self.estimators.iter().any(EstimatorRequest::needs_nuclear),
            gamma: false,
        }
    }
}

/// Trajectories of a run together with what produced them.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: ModelSpec,
    pub times: Vec<f64>,
    pub records: Vec<TrajectoryRecord>,
    pub wall_time: f64,
}

impl Simulation {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }

    pub fn failure_fraction(&self) -> f64 {
        self.failed() as f64 / self.records.len().max(1) as f64
    }

    pub fn stats(&self) -> TrajectoryStats {
        let mut s = TrajectoryStats::default();
        for r in &self.records {
            s.switches += r.stats.switches;
            s.frustrated += r.stats.frustrated;
            s.hops += r.stats.hops;
            s.halvings += r.stats.halvings;
            s.holds += r.stats.holds;
        }
        s
    }
}

fn failed_record(index: usize, f: usize, rep: Representation, e: &Error) -> TrajectoryRecord {
    TrajectoryRecord {
        index,
        init: InitialDraw { g: crate::linalg::CVector::zeros(f), j: 0 },
        init_representation: rep,
        snapshots: Vec::new(),
        failure: Some(format!("initialization: {e}")),
        stats: TrajectoryStats::default(),
    }
}

/// Runs a single trajectory with its own random substream.
pub fn run_trajectory(
    index: usize,
    model: &ModelSpec,
    opts: &MethodOptions,
    times: &[f64],
    dt: f64,
    record: RecordOptions,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_rng(seed, index as u64);
    match initialize(model, opts, &mut rng) {
        Ok((state, draw)) => propagate_trajectory(index, state, draw, model, opts, times, dt, record, &mut rng),
        Err(e @ (Error::Parameter(_) | Error::Config(_) | Error::Shape(_))) => Err(e),
        Err(e) => Ok(failed_record(index, model.n_states(), model.init.representation, &e)),
    }
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Propagates the whole ensemble without estimating anything.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    simulate_model(cfg, model)
}

/// As [`simulate`] with an already built model.
pub fn simulate_model(cfg: &RunConfig, model: ModelSpec) -> Result<Simulation> {
    cfg.validate()?;
    let times = cfg.time_grid();
    let record = cfg.record_options();
    let start = Instant::now();
    let records = with_pool(cfg.workers, || {
        (0..cfg.ensemble)
            .into_par_iter()
            .map(|i| run_trajectory(i, &model, &cfg.method, &times, cfg.dt, record, cfg.seed))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(Simulation {
        model,
        times,
        records,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One written output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    /// `series` or `histogram`.
    pub kind: String,
    pub descriptor: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringEntry {
    pub channel: String,
    /// 1-based.
    pub state: usize,
    pub representation: Representation,
    pub probability: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub delta: f64,
    pub rate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StatsEntry {
    pub switches: usize,
    pub frustrated: usize,
    pub hops: usize,
    pub halvings: usize,
    #[serde(default)]
    pub holds: usize,
}

impl From<TrajectoryStats> for StatsEntry {
    fn from(s: TrajectoryStats) -> Self {
        StatsEntry {
            switches: s.switches,
            frustrated: s.frustrated,
            hops: s.hops,
            halvings: s.halvings,
            holds: s.holds,
        }
    }
}

/// `manifest.json` written next to the CSV outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub n_states: usize,
    pub n_dof: usize,
    pub method: String,
    pub ensemble: usize,
    pub failed: usize,
    pub failure_fraction: f64,
    /// First failures, at most 20.
    pub failures: Vec<FailureNote>,
    pub wall_time_s: f64,
    pub stats: StatsEntry,
    pub outputs: Vec<OutputEntry>,
    #[serde(default)]
    pub scattering: Vec<ScatteringEntry>,
    #[serde(default)]
    pub rates: Vec<RateEntry>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub series: Vec<EstimateSeries>,
    pub histograms: Vec<Vec<Histogram>>,
}

impl RunReport {
    /// Error when more than 0.1% of the trajectories failed.
    pub fn check(&self) -> Result<()> {
        if self.manifest.failure_fraction >= MAX_FAILURE_FRACTION && self.manifest.failed > 0 {
            return Err(Error::TooManyFailures { failed: self.manifest.failed, total: self.manifest.ensemble });
        }
        Ok(())
    }
}

/// Writes momentum histograms: a `# {descriptor}` line then
/// `time,p_low,p_high,density,n_traj`.
pub fn write_histograms(path: &Path, descriptor: &serde_json::Value, hists: &[Histogram]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# {}", serde_json::to_string(descriptor)?)?;
    writeln!(w, "time,p_low,p_high,density,n_traj")?;
    for h in hists {
        for (d, e) in h.density.iter().zip(h.edges.windows(2)) {
            writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{}", h.time, e[0], e[1], d, h.n_traj)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn initial_pair(model: &ModelSpec) -> (usize, usize) {
    model.init.electronic.pair()
}

/// Correlation `C_{nm,kl}` with the estimator that matches the sampling of `ctx.method`.
pub fn correlation(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    (n, m, k, l): (usize, usize, usize, usize),
    a: &NuclearObservable,
) -> Result<EstimateSeries> {
    match ctx.method {
        Method::Naf => estimate_naf(records, ctx, (n, m, k, l), a),
        method if method.uses_tw_sampling() => {
            if n != m {
                estimate_tw_coherence_initial(records, ctx, (n, m, k, l), a)
            } else if k == l {
                let mut s = population(records, ctx, k, a)?;
                s.descriptor = s.descriptor.states(Some(n), Some(n), Some(k), Some(k));
                s.descriptor.quantity = "correlation".into();
                Ok(s)
            } else {
                estimate_tw_pop_coherence(records, ctx, k, l, a)
            }
        }
        _ if n == m && k == l => {
            let mut s = population(records, ctx, k, a)?;
            s.descriptor = s.descriptor.states(Some(n), Some(n), Some(k), Some(k));
            s.descriptor.quantity = "correlation".into();
            Ok(s)
        }
        method => Err(Error::Config(format!("{method} provides populations only"))),
    }
}

fn label(s: usize, f: usize) -> Result<usize> {
    if s == 0 || s > f {
        return Err(Error::Config(format!("state {s} outside 1..={f}")));
    }
    Ok(s - 1)
}

/// Estimates every request of `cfg` on a finished simulation.
pub fn estimate_all(
    cfg: &RunConfig,
    sim: &Simulation,
) -> Result<(Vec<EstimateSeries>, Vec<(serde_json::Value, Vec<Histogram>)>, Vec<ScatteringEntry>, Vec<RateEntry>)> {
    let f = sim.model.n_states();
    let method = cfg.method.method;
    let ctx_for = |rep: Representation| EstimateContext {
        method,
        representation: rep,
        reduction: cfg.reduction,
        gamma: cfg.method.gamma,
    };
    let (n, m) = initial_pair(&sim.model);
    let coherent_init = matches!(sim.model.init.electronic, ElectronicInit::Coherence(..));
    let records = &sim.records;
    let mut series = Vec::new();
    let mut hists = Vec::new();
    let mut scattering = Vec::new();
    let mut rates = Vec::new();
    for req in &cfg.estimators {
        match req {
            EstimatorRequest::Population { representation, states, observable } => {
                if coherent_init {
                    return Err(Error::Config("populations need a population initial condition".into()));
                }
                let ctx = ctx_for(*representation);
                let list: Vec<usize> = match states {
                    Some(s) => s.iter().map(|&s| label(s, f)).collect::<Result<_>>()?,
                    None => (0..f).collect(),
                };
                for k in list {
                    series.push(population(records, &ctx, k, observable)?);
                }
            }
            EstimatorRequest::PopulationDifference => {
                if coherent_init {
                    return Err(Error::Config("populations need a population initial condition".into()));
                }
                series.push(population_difference(records, &ctx_for(Representation::Diabatic))?);
            }
            EstimatorRequest::Correlation { k, l, representation, observable } => {
                let q = (n, m, label(*k, f)?, label(*l, f)?);
                series.push(correlation(records, &ctx_for(*representation), q, observable)?);
            }
            EstimatorRequest::Scattering { representation } => {
                if coherent_init {
                    return Err(Error::Config("scattering needs a population initial condition".into()));
                }
                let ctx = ctx_for(*representation);
                for (channel, sign) in [("transmission", 1.0), ("reflection", -1.0)] {
                    let a = NuclearObservable::IndicatorRegion { coordinate: 0, sign, threshold: 0.0 };
                    for k in 0..f {
                        let mut s = population(records, &ctx, k, &a)?;
                        s.descriptor.quantity = channel.into();
                        let last = s.len() - 1;
                        scattering.push(ScatteringEntry {
                            channel: channel.into(),
                            state: k + 1,
                            representation: *representation,
                            probability: s.values[last].map_or(f64::NAN, |z| z.re),
                            stderr: s.stderr[last],
                        });
                        series.push(s);
                    }
                }
            }
            EstimatorRequest::MomentumHistogram { coordinate, bins, times, weight, representation } => {
                let edges = bins.edges()?;
                let times = if times.is_empty() { vec![*sim.times.last().unwrap()] } else { times.clone() };
                let ctx = ctx_for(*representation);
                let h = momentum_histogram(records, &ctx, *coordinate, &edges, &times, *weight)?;
                let weight_id = match weight {
                    HistogramWeight::Raw => "raw".to_string(),
                    HistogramWeight::State(k) => format!("state{}", k + 1),
                };
                let d = serde_json::json!({
                    "quantity": "momentum-histogram",
                    "method": method.label(),
                    "coordinate": coordinate,
                    "weight": weight_id,
                    "representation": representation,
                });
                hists.push((d, h));
            }
            EstimatorRequest::FluxRate { delta } => {
                if sim.model.init.electronic != ElectronicInit::Coherence(0, 1) {
                    return Err(Error::Config("flux-flux rate needs the |1><2| initial coherence".into()));
                }
                let r = flux_flux_rate(records, &ctx_for(Representation::Diabatic), *delta)?;
                rates.push(RateEntry { delta: *delta, rate: r.rate, converged: r.converged });
                series.push(r.cff);
            }
        }
    }
    Ok((series, hists, scattering, rates))
}

fn histogram_stem(d: &serde_json::Value) -> String {
    let rep = match d["representation"].as_str() {
        Some("adiabatic") => "adia",
        _ => "dia",
    };
    format!(
        "momentum_{}_P{}_{}_{}",
        d["method"].as_str().unwrap_or("x"),
        d["coordinate"],
        d["weight"].as_str().unwrap_or("raw"),
        rep
    )
}

/// Writes series and histograms into `dir`, returning manifest entries.
pub fn write_outputs(
    dir: &Path,
    series: &[EstimateSeries],
    hists: &[(serde_json::Value, Vec<Histogram>)],
) -> Result<Vec<OutputEntry>> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    let mut used = std::collections::HashMap::<String, usize>::new();
    let mut unique = |stem: String| {
        let c = used.entry(stem.clone()).or_insert(0);
        *c += 1;
        if *c == 1 { format!("{stem}.csv") } else { format!("{stem}_{c}.csv") }
    };
    for s in series {
        let file = unique(s.descriptor.file_stem());
        s.save(&dir.join(&file))?;
        entries.push(OutputEntry { file, kind: "series".into(), descriptor: serde_json::to_value(&s.descriptor)? });
    }
    for (d, h) in hists {
        let file = unique(histogram_stem(d));
        write_histograms(&dir.join(&file), d, h)?;
        entries.push(OutputEntry { file, kind: "histogram".into(), descriptor: d.clone() });
    }
    Ok(entries)
}

/// Simulates, estimates and writes everything `cfg` asks for.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let sim = simulate(cfg)?;
    finish_run(cfg, &sim)
}

/// Estimation and output half of [`run`].
pub fn finish_run(cfg: &RunConfig, sim: &Simulation) -> Result<RunReport> {
    let (series, hists, scattering, rates) = with_pool(cfg.workers, || estimate_all(cfg, sim))??;
    let outputs = write_outputs(&cfg.output_dir, &series, &hists)?;
    let failures = sim
        .records
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|m| FailureNote { index: r.index, message: m.clone() }))
        .take(20)
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        model: sim.model.name.clone(),
        n_states: sim.model.n_states(),
        n_dof: sim.model.n_dof(),
        method: cfg.method.method.label().into(),
        ensemble: cfg.ensemble,
        failed: sim.failed(),
        failure_fraction: sim.failure_fraction(),
        failures,
        wall_time_s: sim.wall_time,
        stats: sim.stats().into(),
        outputs,
        scattering,
        rates,
        config: serde_json::to_value(cfg)?,
    };
    manifest.save(&cfg.output_dir.join("manifest.json"))?;
    Ok(RunReport {
        output_dir: cfg.output_dir.clone(),
        manifest,
        series,
        histograms: hists.into_iter().map(|(_, h)| h).collect(),
    })
}

#[cfg(test)]
mod tests;
