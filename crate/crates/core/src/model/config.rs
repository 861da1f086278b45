//! Serializable model descriptions used by run configurations and model files.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    build_cavity, build_et_model, build_fmo, build_lvcm, build_morse3, build_spin_boson,
    build_tully, discretize_debye, discretize_ohmic, ConstantModel, ElectronicInit, EtParams,
    HarmonicModel, InitialCondition, LvcmModel, ModelSpec, MorsePairParams, MorseStateParams,
    NuclearInit, Representation, TullyParams, TullyVariant,
};
use crate::error::{param_err, Error, Result};
use crate::sampling::InverseTemperature;
use crate::units::{beta_from_kelvin, cm_to_hartree, EnergyUnit};

/// A model selected by `kind` plus its parameters. State labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    SpinBoson(SpinBosonConfig),
    Fmo(FmoConfig),
    Cavity(CavityConfig),
    Lvcm(LvcmConfig),
    Morse(MorseConfig),
    Tully(TullyConfig),
    ElectronTransfer(EtConfig),
    Harmonic(HarmonicConfig),
    Constant(ConstantConfig),
    /// Loads a [`ModelFile`]; relative paths resolve against the referring file.
    File(FileConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinBosonConfig {
    pub alpha: f64,
    pub omega_c: f64,
    pub n_modes: usize,
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    pub initial_state: usize,
}

impl Default for SpinBosonConfig {
    fn default() -> Self {
        SpinBosonConfig {
            alpha: 0.1,
            omega_c: 1.0,
            n_modes: 300,
            eps: 0.0,
            delta: 1.0,
            beta: 5.0,
            initial_state: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmoConfig {
    pub lambda_cm: f64,
    pub omega_c_cm: f64,
    pub n_modes: usize,
    pub temperature_k: f64,
    pub initial_site: usize,
}

impl Default for FmoConfig {
    fn default() -> Self {
        FmoConfig {
            lambda_cm: 35.0,
            omega_c_cm: 106.14,
            n_modes: 100,
            temperature_k: 77.0,
            initial_site: 1,
        }
    }
}

/// Symmetric off-diagonal coupling between a pair of (1-based) states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub states: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub levels: Vec<f64>,
    /// Transition dipoles; `values` holds a single entry.
    pub dipoles: Vec<CouplingEntry>,
    /// Keep only the two lowest levels.
    pub two_level: bool,
    pub length: f64,
    /// Atom position; defaults to the cavity centre.
    pub r0: Option<f64>,
    pub n_modes: usize,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            levels: vec![-0.6738, -0.2798, -0.1547],
            dipoles: vec![
                CouplingEntry { states: [1, 2], values: vec![-1.034] },
                CouplingEntry { states: [2, 3], values: vec![-2.536] },
            ],
            two_level: false,
            length: 236200.0,
            r0: None,
            n_modes: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvcmConfig {
    #[serde(default)]
    pub units: EnergyUnit,
    pub energies: Vec<f64>,
    pub omegas: Vec<f64>,
    /// One row per state, one column per mode.
    pub kappa: Vec<Vec<f64>>,
    /// Off-diagonal couplings; `values` has one entry per mode.
    #[serde(default)]
    pub couplings: Vec<CouplingEntry>,
    pub initial_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseState {
    pub d: f64,
    pub beta: f64,
    pub r_e: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorsePair {
    pub states: [usize; 2],
    pub a: f64,
    pub alpha: f64,
    pub r_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseConfig {
    pub states: Vec<MorseState>,
    #[serde(default)]
    pub couplings: Vec<MorsePair>,
    #[serde(default = "default_morse_mass")]
    pub mass: f64,
    #[serde(default = "default_morse_omega")]
    pub omega: f64,
    /// Centre of the initial wavepacket.
    pub r_center: f64,
    #[serde(default = "one")]
    pub initial_state: usize,
}

fn default_morse_mass() -> f64 {
    20000.0
}

fn default_morse_omega() -> f64 {
    0.005
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TullyConfig {
    pub variant: TullyVariant,
    pub p0: f64,
    pub r0: Option<f64>,
    pub alpha: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub e0: Option<f64>,
}

impl Default for TullyConfig {
    fn default() -> Self {
        TullyConfig {
            variant: TullyVariant::Ecr,
            p0: 20.0,
            r0: None,
            alpha: 1.0,
            a: None,
            b: None,
            c: None,
            d: None,
            e0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtConfig {
    pub eps: f64,
    /// Kondo parameter of the solvent's Ohmic spectral density.
    pub alpha: f64,
    /// Reaction-mode frequency; also the bath cutoff.
    pub omega: f64,
    pub lambda: f64,
    pub delta: f64,
    pub n_modes: usize,
    pub temperature_k: f64,
}

impl Default for EtConfig {
    fn default() -> Self {
        let p = EtParams::default();
        EtConfig {
            eps: p.lambda,
            alpha: 9.49e-6,
            omega: p.omega,
            lambda: p.lambda,
            delta: p.delta,
            n_modes: 100,
            temperature_k: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicConfig {
    pub mass: f64,
    pub omega: f64,
    pub center: f64,
    pub r0: f64,
    pub p0: f64,
    /// Wavepacket width; defaults to `mass * omega`.
    pub alpha: Option<f64>,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        HarmonicConfig {
            mass: 1.0,
            omega: 1.0,
            center: 0.0,
            r0: 0.0,
            p0: 0.0,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantConfig {
    /// Real symmetric electronic Hamiltonian, row by row.
    pub h: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub initial_state: usize,
    /// Prepare the coherence `|n⟩⟨m|` instead of a population.
    #[serde(default)]
    pub initial_coherence: Option<[usize; 2]>,
    /// Inert unit-mass oscillators sampled in their ground state.
    #[serde(default)]
    pub omegas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub path: PathBuf,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub model: ModelConfig,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read model file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn state_index(label: usize, f: usize, what: &str) -> Result<usize> {
    if label == 0 || label > f {
        return param_err(format!("{what} {label} outside 1..={f}"));
    }
    Ok(label - 1)
}

fn pair_matrix(entries: &[CouplingEntry], f: usize, k: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(f, f);
    for e in entries {
        let a = state_index(e.states[0], f, "coupling state")?;
        let b = state_index(e.states[1], f, "coupling state")?;
        if a == b {
            return param_err("off-diagonal coupling with identical states");
        }
        let v = *e.values.get(k).ok_or_else(|| {
            Error::Shape(format!("coupling ({}, {}) lacks entry {}", a + 1, b + 1, k + 1))
        })?;
        m[(a, b)] = v;
        m[(b, a)] = v;
    }
    Ok(m)
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        self.build_in(None)
    }

    /// Builds the model, resolving relative file references against `base`.
    pub fn build_in(&self, base: Option<&Path>) -> Result<ModelSpec> {
        match self {
            ModelConfig::SpinBoson(c) => {
                let bath = discretize_ohmic(c.alpha, c.omega_c, c.n_modes)?;
                if !(c.beta > 0.0) {
                    return param_err("beta must be positive");
                }
                let spec = build_spin_boson(c.eps, c.delta, bath, InverseTemperature::Finite(c.beta));
                let s = state_index(c.initial_state, 2, "initial state")?;
                Ok(with_population(spec, s))
            }
            ModelConfig::Fmo(c) => {
                let bath = discretize_debye(
                    cm_to_hartree(c.lambda_cm),
                    cm_to_hartree(c.omega_c_cm),
                    c.n_modes,
                )?;
                let site = state_index(c.initial_site, 7, "initial site")?;
                Ok(build_fmo(bath, temperature(c.temperature_k)?, site))
            }
            ModelConfig::Cavity(c) => {
                let f = if c.two_level { 2 } else { c.levels.len() };
                if c.levels.len() < f {
                    return param_err("two-level cavity needs at least two levels");
                }
                let levels = c.levels[..f].to_vec();
                let keep: Vec<CouplingEntry> = c
                    .dipoles
                    .iter()
                    .filter(|e| e.states.iter().all(|&s| s <= f))
                    .cloned()
                    .collect();
                let mu = pair_matrix(&keep, f, 0)?;
                build_cavity(levels, mu, c.length, c.r0.unwrap_or(c.length / 2.0), c.n_modes)
            }
            ModelConfig::Lvcm(c) => {
                let u = c.units;
                let (f, n) = (c.energies.len(), c.omegas.len());
                if c.kappa.len() != f || c.kappa.iter().any(|row| row.len() != n) {
                    return Err(Error::Shape(format!("kappa must be {f} rows of {n} entries")));
                }
                for e in &c.couplings {
                    if e.values.len() != n {
                        return Err(Error::Shape(format!(
                            "coupling ({}, {}) needs {n} entries",
                            e.states[0], e.states[1]
                        )));
                    }
                }
                let kappa = DMatrix::from_fn(f, n, |a, k| u.to_hartree(c.kappa[a][k]));
                let lambda = (0..n)
                    .map(|k| pair_matrix(&c.couplings, f, k).map(|m| m.map(|x| u.to_hartree(x))))
                    .collect::<Result<Vec<_>>>()?;
                let model = LvcmModel::new(
                    c.energies.iter().map(|&e| u.to_hartree(e)).collect(),
                    c.omegas.iter().map(|&w| u.to_hartree(w)).collect(),
                    kappa,
                    lambda,
                )?;
                let s = state_index(c.initial_state, f, "initial state")?;
                Ok(build_lvcm(model, s, "lvcm", u))
            }
            ModelConfig::Morse(c) => {
                let f = c.states.len();
                let states = c
                    .states
                    .iter()
                    .map(|s| MorseStateParams { d: s.d, beta: s.beta, r_e: s.r_e, c: s.c })
                    .collect();
                let pairs = c
                    .couplings
                    .iter()
                    .map(|p| {
                        Ok(MorsePairParams {
                            i: state_index(p.states[0], f, "coupling state")?,
                            j: state_index(p.states[1], f, "coupling state")?,
                            a: p.a,
                            alpha: p.alpha,
                            r_c: p.r_c,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let s = state_index(c.initial_state, f, "initial state")?;
                build_morse3(states, pairs, c.mass, c.omega, c.r_center, s)
            }
            ModelConfig::Tully(c) => {
                let d = c.variant.default_params();
                let params = TullyParams {
                    a: c.a.unwrap_or(d.a),
                    b: c.b.unwrap_or(d.b),
                    c: c.c.unwrap_or(d.c),
                    d: c.d.unwrap_or(d.d),
                    e0: c.e0.unwrap_or(d.e0),
                };
                if !(c.alpha > 0.0) {
                    return param_err("wavepacket width alpha must be positive");
                }
                Ok(build_tully(c.variant, Some(params), c.p0, c.r0, c.alpha))
            }
            ModelConfig::ElectronTransfer(c) => {
                let bath = discretize_ohmic(c.alpha, c.omega, c.n_modes)?;
                let params = EtParams { omega: c.omega, lambda: c.lambda, delta: c.delta };
                build_et_model(c.eps, bath, params, temperature(c.temperature_k)?)
            }
            ModelConfig::Harmonic(c) => {
                if !(c.mass > 0.0) || c.omega < 0.0 {
                    return param_err("harmonic model needs mass > 0 and omega >= 0");
                }
                let alpha = c.alpha.unwrap_or(c.mass * c.omega);
                if !(alpha > 0.0) {
                    return param_err("wavepacket width alpha must be positive");
                }
                Ok(ModelSpec {
                    name: "harmonic".into(),
                    potential: std::sync::Arc::new(HarmonicModel {
                        mass: c.mass,
                        omega: c.omega,
                        center: c.center,
                    }),
                    masses: nalgebra::DVector::from_element(1, c.mass),
                    init: InitialCondition {
                        electronic: ElectronicInit::Population(0),
                        representation: Representation::Diabatic,
                        nuclear: NuclearInit::GaussianWavepacket {
                            r0: vec![c.r0],
                            p0: vec![c.p0],
                            alpha: vec![alpha],
                        },
                    },
                    params: serde_json::to_value(c)?,
                    units: EnergyUnit::Hartree,
                })
            }
            ModelConfig::Constant(c) => {
                let f = c.h.len();
                if f == 0 || c.h.iter().any(|row| row.len() != f) {
                    return Err(Error::Shape("h must be a square matrix".into()));
                }
                let h = DMatrix::from_fn(f, f, |a, b| c.h[a][b]);
                if (&h - h.transpose()).amax() > 1e-12 * h.amax().max(1e-300) {
                    return param_err("h must be symmetric");
                }
                let electronic = match c.initial_coherence {
                    Some([n, m]) => {
                        let (n, m) = (
                            state_index(n, f, "coherence state")?,
                            state_index(m, f, "coherence state")?,
                        );
                        if n == m {
                            return param_err("coherence needs two distinct states");
                        }
                        ElectronicInit::Coherence(n, m)
                    }
                    None => ElectronicInit::Population(state_index(c.initial_state, f, "initial state")?),
                };
                if c.omegas.iter().any(|&w| !(w > 0.0)) {
                    return param_err("oscillator frequencies must be positive");
                }
                let n = c.omegas.len();
                Ok(ModelSpec {
                    name: "constant".into(),
                    potential: std::sync::Arc::new(ConstantModel { h, omegas: c.omegas.clone() }),
                    masses: nalgebra::DVector::from_element(n, 1.0),
                    init: InitialCondition {
                        electronic,
                        representation: Representation::Diabatic,
                        nuclear: NuclearInit::ThermalHarmonic {
                            omegas: c.omegas.clone(),
                            beta: InverseTemperature::Vacuum,
                        },
                    },
                    params: serde_json::to_value(c)?,
                    units: EnergyUnit::Hartree,
                })
            }
            ModelConfig::File(c) => {
                let path = match base {
                    Some(b) if c.path.is_relative() => b.join(&c.path),
                    _ => c.path.clone(),
                };
                let file = ModelFile::load(&path)?;
                if matches!(file.model, ModelConfig::File(_)) {
                    return Err(Error::Config(format!(
                        "model file {} refers to another model file",
                        path.display()
                    )));
                }
                let mut spec = file.model.build_in(path.parent())?;
                spec.name = file.name;
                Ok(spec)
            }
        }
    }
}

fn with_population(mut spec: ModelSpec, state: usize) -> ModelSpec {
    spec.init.electronic = ElectronicInit::Population(state);
    spec
}

fn temperature(kelvin: f64) -> Result<InverseTemperature> {
    if kelvin == 0.0 {
        Ok(InverseTemperature::Vacuum)
    } else if kelvin > 0.0 {
        Ok(InverseTemperature::Finite(beta_from_kelvin(kelvin)))
    } else {
        param_err("temperature must be non-negative")
    }
}
