//! Grid wavepacket reference runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_histograms, OutputEntry, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::estimators::{Descriptor, EstimateSeries, Histogram, NuclearObservable, Representation};
use crate::exact::dvr::{
    dvr_propagate, initial_wavepacket, momentum_distribution, observables, DvrGrid, DvrHamiltonian, DvrObservables,
};
use crate::linalg::C64;
use crate::model::{ModelConfig, ModelSpec, TullyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A wavepacket run on a one-dimensional model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvrConfig {
    pub model: ModelConfig,
    /// Defaults: `[−40, 40]` with 2048 points for Tully models, `[1, 40]` with 4096 for Morse.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub t_max: f64,
    /// Output interval.
    pub dt_out: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Times of the momentum distributions; the final time when empty.
    #[serde(default)]
    pub momentum_times: Vec<f64>,
    /// Repeat on a grid with twice the points and on one with twice the
    /// domain and compare the final channel probabilities.
    #[serde(default)]
    pub convergence_check: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl DvrConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        if let Some(g) = self.grid {
            return Ok(g);
        }
        match &self.model {
            ModelConfig::Tully(TullyConfig { .. }) => Ok(GridSpec { r_min: -40.0, r_max: 40.0, n: 2048 }),
            ModelConfig::Morse(_) => Ok(GridSpec { r_min: 1.0, r_max: 40.0, n: 4096 }),
            _ => Err(Error::Config("this model has no default grid; set [grid]".into())),
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.dt_out > 0.0) || !(self.t_max >= 0.0) {
            return Err(Error::Config("DVR output needs dt_out > 0 and t_max >= 0".into()));
        }
        let n = (self.t_max / self.dt_out).round() as usize;
        let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * self.dt_out).collect();
        if (t[n] - self.t_max).abs() > 1e-9 * self.t_max.max(1.0) {
            t.push(self.t_max);
        }
        Ok(t)
    }

    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        let digest = Sha256::digest(serde_json::to_string(&v)?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Hamiltonian and initial wavepacket of a model on a grid.
pub fn dvr_setup(model: &ModelSpec, g: GridSpec) -> Result<(DvrHamiltonian, crate::exact::dvr::WavepacketState)> {
    let grid = DvrGrid::new(g.r_min, g.r_max, g.n, model.masses[0])?;
    let h = DvrHamiltonian::new(model, grid)?;
    let psi0 = initial_wavepacket(&h, model)?;
    Ok((h, psi0))
}

/// Channel probabilities at `t` on grid `g`.
pub fn dvr_final_observables(model: &ModelSpec, g: GridSpec, t: f64, tol: f64) -> Result<DvrObservables> {
    let (h, psi0) = dvr_setup(model, g)?;
    let st = dvr_propagate(&h, &psi0, &[t], tol)?;
    Ok(observables(&h, &st[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    /// Largest change of a final transmission or reflection probability.
    pub refined: f64,
    pub enlarged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvrManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub model: String,
    pub method: String,
    pub grid: GridSpec,
    pub dr: f64,
    pub final_time: f64,
    /// Final adiabatic transmission per state.
    pub transmission: Vec<f64>,
    pub reflection: Vec<f64>,
    pub max_norm_error: f64,
    pub convergence: Option<ConvergenceEntry>,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputEntry>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct DvrReport {
    pub manifest: DvrManifest,
    pub observables: Vec<DvrObservables>,
    pub series: Vec<EstimateSeries>,
    pub momentum: Vec<Histogram>,
}

fn channel_diff(a: &DvrObservables, b: &DvrObservables) -> f64 {
    a.transmit
        .iter()
        .zip(&b.transmit)
        .chain(a.reflect.iter().zip(&b.reflect))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn series_of(times: &[f64], vals: Vec<f64>, d: Descriptor) -> EstimateSeries {
    EstimateSeries {
        times: times.to_vec(),
        values: vals.into_iter().map(|v| Some(C64::new(v, 0.0))).collect(),
        stderr: vec![None; times.len()],
        n_traj: 1,
        descriptor: d,
    }
}

/// Propagates the wavepacket, writes populations, channel series and
/// momentum densities, and a `manifest.json`.
pub fn run_dvr(cfg: &DvrConfig) -> Result<DvrReport> {
    let start = std::time::Instant::now();
    let model = cfg.model.build_in(cfg.base_dir.as_deref())?;
    let g = cfg.grid_spec()?;
    let times = cfg.times()?;
    let (h, psi0) = dvr_setup(&model, g)?;
    let states = dvr_propagate(&h, &psi0, &times, cfg.tolerance)?;
    let obs: Vec<DvrObservables> = states.iter().map(|s| observables(&h, s)).collect();
    let f = h.f;
    let id = NuclearObservable::Identity;
    let mut series = Vec::new();
    for (rep, pick) in [
        (Representation::Diabatic, &(|o: &DvrObservables, k: usize| o.diabatic[k]) as &dyn Fn(&DvrObservables, usize) -> f64),
        (Representation::Adiabatic, &|o: &DvrObservables, k: usize| o.adiabatic[k]),
    ] {
        for k in 0..f {
            let d = Descriptor::new("population", "dvr", rep, &id).states(None, None, Some(k), Some(k));
            series.push(series_of(&times, obs.iter().map(|o| pick(o, k)).collect(), d));
        }
    }
    for (channel, sign) in [("transmission", 1.0), ("reflection", -1.0)] {
        let a = NuclearObservable::IndicatorRegion { coordinate: 0, sign, threshold: 0.0 };
        for k in 0..f {
            let mut d = Descriptor::new("population", "dvr", Representation::Adiabatic, &a).states(None, None, Some(k), Some(k));
            d.quantity = channel.into();
            let vals = obs.iter().map(|o| if sign > 0.0 { o.transmit[k] } else { o.reflect[k] }).collect();
            series.push(series_of(&times, vals, d));
        }
    }
    let mtimes = if cfg.momentum_times.is_empty() { vec![*times.last().unwrap()] } else { cfg.momentum_times.clone() };
    let mut momentum = Vec::new();
    for &t in &mtimes {
        let i = times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Config(format!("momentum time {t} is not an output time")))?;
        let (p, dens) = momentum_distribution(&h, &states[i], true);
        let dp = p[1] - p[0];
        let mut edges: Vec<f64> = p.iter().map(|x| x - 0.5 * dp).collect();
        edges.push(p[p.len() - 1] + 0.5 * dp);
        let total: Vec<f64> = (0..p.len()).map(|j| dens.iter().map(|d| d[j]).sum()).collect();
        momentum.push(Histogram { time: times[i], edges: edges.clone(), density: total, n_traj: 1 });
        for d in dens {
            momentum.push(Histogram { time: times[i], edges: edges.clone(), density: d, n_traj: 1 });
        }
    }
    let convergence = if cfg.convergence_check {
        let t = *times.last().unwrap();
        let base = obs.last().unwrap();
        let fine = h.grid.refined()?;
        let wide = h.grid.enlarged(2.0)?;
        let r = dvr_final_observables(&model, GridSpec { r_min: fine.r_min, r_max: fine.r_max, n: fine.n }, t, cfg.tolerance)?;
        let e = dvr_final_observables(&model, GridSpec { r_min: wide.r_min, r_max: wide.r_max, n: wide.n }, t, cfg.tolerance)?;
        Some(ConvergenceEntry { refined: channel_diff(base, &r), enlarged: channel_diff(base, &e) })
    } else {
        None
    };
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut outputs = Vec::new();
    for s in &series {
        let file = format!("{}.csv", s.descriptor.file_stem());
        s.save(&cfg.output_dir.join(&file))?;
        outputs.push(OutputEntry { file, kind: "series".into(), descriptor: serde_json::to_value(&s.descriptor)? });
    }
    let per_time = f + 1;
    for (i, chunk) in momentum.chunks(per_time).enumerate() {
        for (j, hist) in chunk.iter().enumerate() {
            let weight = if j == 0 { "total".to_string() } else { format!("state{j}") };
            let d = serde_json::json!({
                "quantity": "momentum-density",
                "method": "dvr",
                "coordinate": 0,
                "weight": weight,
                "representation": "adiabatic",
            });
            let file = format!("momentum_dvr_P0_{weight}_adia_t{i}.csv");
            write_histograms(&cfg.output_dir.join(&file), &d, std::slice::from_ref(hist))?;
            outputs.push(OutputEntry { file, kind: "histogram".into(), descriptor: d });
        }
    }
    let last = obs.last().unwrap();
    let manifest = DvrManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash()?,
        model: model.name.clone(),
        method: "dvr".into(),
        grid: g,
        dr: h.grid.dr,
        final_time: last.t,
        transmission: last.transmit.clone(),
        reflection: last.reflect.clone(),
        max_norm_error: obs.iter().map(|o| (o.norm - 1.0).abs()).fold(0.0, f64::max),
        convergence,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        config: serde_json::to_value(cfg)?,
    };
    let mut fh = std::fs::File::create(cfg.output_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut fh, &manifest)?;
    Ok(DvrReport { manifest, observables: obs, series, momentum })
}
