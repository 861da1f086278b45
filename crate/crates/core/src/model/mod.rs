//! Diabatic model Hamiltonians.
//!
//! Every model is an `F`-state, `N`-coordinate diabatic potential matrix
//! `V(R)` with analytic gradients, plus the masses and initial condition that
//! define a benchmark run.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::linalg::MatrixFamily;
use crate::sampling::InverseTemperature;
use crate::units::EnergyUnit;

mod bath;
mod cavity;
mod config;
mod et;
mod fmo;
mod lvcm;
mod morse;
mod simple;
mod spin_boson;
mod tully;

pub use bath::{discretize_debye, discretize_ohmic, BathDiscretization};
pub use cavity::{build_cavity, CavityModel};
pub use config::{
    CavityConfig, ConstantConfig, CouplingEntry, EtConfig, FileConfig, FmoConfig, HarmonicConfig,
    LvcmConfig, ModelConfig, ModelFile, MorseConfig, MorsePair, MorseState, SpinBosonConfig,
    TullyConfig,
};
pub use et::{build_et_model, EtModel, EtParams};
pub use fmo::{build_fmo, fmo_system_hamiltonian_cm, FmoModel};
pub use lvcm::{build_lvcm, LvcmModel};
pub use morse::{build_morse3, MorseModel, MorsePairParams, MorseStateParams};
pub use simple::{ConstantModel, HarmonicModel};
pub use spin_boson::{build_spin_boson, SpinBosonModel};
pub use tully::{build_tully, TullyModel, TullyParams, TullyVariant};

/// A diabatic potential energy matrix and its nuclear gradients.
pub trait DiabaticPotential: Send + Sync + Debug {
    fn n_states(&self) -> usize;

    fn n_dof(&self) -> usize;

    /// Real symmetric `F × F` diabatic matrix at `r`.
    fn potential(&self, r: &[f64]) -> DMatrix<f64>;

    /// Writes `∂V/∂R_J` into block `J` of `out` (which has `N` blocks of size `F × F`).
    fn gradient(&self, r: &[f64], out: &mut MatrixFamily);
}

/// Basis in which electronic states are labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    #[default]
    Diabatic,
    Adiabatic,
}

/// Initially prepared electronic operator. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectronicInit {
    /// `|n⟩⟨n|`
    Population(usize),
    /// `|n⟩⟨m|`, `n ≠ m`
    Coherence(usize, usize),
}

impl ElectronicInit {
    pub fn pair(&self) -> (usize, usize) {
        match *self {
            ElectronicInit::Population(n) => (n, n),
            ElectronicInit::Coherence(n, m) => (n, m),
        }
    }
}

/// Wigner distribution the nuclei are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuclearInit {
    /// Independent thermal oscillators (unit mass) centred at the origin.
    ThermalHarmonic {
        omegas: Vec<f64>,
        beta: InverseTemperature,
    },
    /// Minimum-uncertainty Gaussian per coordinate with `Var(R) = 1/(2α)`, `Var(P) = α/2`.
    GaussianWavepacket {
        r0: Vec<f64>,
        p0: Vec<f64>,
        alpha: Vec<f64>,
    },
    /// Reaction mode displaced to `-c_s/Ω²` (coordinate 0) plus a thermal bath.
    ShiftedThermal {
        omega: f64,
        c_s: f64,
        beta: InverseTemperature,
        bath_omegas: Vec<f64>,
    },
    /// Vibronic ground state in dimensionless normal modes.
    LvcmGround { n: usize },
    /// A single deterministic phase-space point.
    Fixed { r: Vec<f64>, p: Vec<f64> },
}

impl NuclearInit {
    pub fn n_dof(&self) -> usize {
        match self {
            NuclearInit::ThermalHarmonic { omegas, .. } => omegas.len(),
            NuclearInit::GaussianWavepacket { r0, .. } => r0.len(),
            NuclearInit::ShiftedThermal { bath_omegas, .. } => bath_omegas.len() + 1,
            NuclearInit::LvcmGround { n } => *n,
            NuclearInit::Fixed { r, .. } => r.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub electronic: ElectronicInit,
    pub representation: Representation,
    pub nuclear: NuclearInit,
}

/// A complete benchmark model: Hamiltonian, masses, initial condition and metadata.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub potential: Arc<dyn DiabaticPotential>,
    pub masses: DVector<f64>,
    pub init: InitialCondition,
    /// Parameter record as supplied (for manifests).
    pub params: serde_json::Value,
    /// Unit system the parameter record is written in; dynamics are always atomic units.
    pub units: EnergyUnit,
}

impl ModelSpec {
    pub fn n_states(&self) -> usize {
        self.potential.n_states()
    }

    pub fn n_dof(&self) -> usize {
        self.potential.n_dof()
    }

    pub fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        self.potential.potential(r)
    }

    pub fn gradient(&self, r: &[f64]) -> MatrixFamily {
        let mut out = MatrixFamily::zeros(self.n_dof(), self.n_states());
        self.potential.gradient(r, &mut out);
        out
    }

    pub fn inverse_masses(&self) -> DVector<f64> {
        self.masses.map(|m| 1.0 / m)
    }

    pub fn with_init(mut self, init: InitialCondition) -> Self {
        self.init = init;
        self
    }

    /// Checks internal consistency of dimensions and initial-condition indices.
    pub fn validate(&self) -> crate::Result<()> {
        let (f, n) = (self.n_states(), self.n_dof());
        if self.masses.len() != n {
            return Err(crate::Error::Shape(format!(
                "{} masses for {} coordinates",
                self.masses.len(),
                n
            )));
        }
        if self.masses.iter().any(|&m| !(m > 0.0)) {
            return crate::error::param_err("masses must be positive");
        }
        let (a, b) = self.init.electronic.pair();
        if a >= f || b >= f {
            return crate::error::param_err(format!(
                "initial state ({}, {}) outside 1..={f}",
                a + 1,
                b + 1
            ));
        }
        if self.init.nuclear.n_dof() != n {
            return Err(crate::Error::Shape(format!(
                "nuclear initial condition has {} coordinates, model has {n}",
                self.init.nuclear.n_dof()
            )));
        }
        Ok(())
    }
}

/// Max relative deviation between analytic gradients and central differences
/// over `points` random coordinates drawn from `[-scale, scale]^N`, relative
/// to the largest potential or gradient element at each point.
pub fn gradient_error(model: &dyn DiabaticPotential, points: usize, scale: f64, seed: u64) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (f, n) = (model.n_states(), model.n_dof());
    let mut worst: f64 = 0.0;
    let mut grad = MatrixFamily::zeros(n, f);
    for _ in 0..points {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        model.gradient(&r, &mut grad);
        let gmax = (0..n)
            .flat_map(|j| grad.block(j).to_vec())
            .fold(0.0f64, |a, x| a.max(x.abs()))
            .max(model.potential(&r).amax())
            .max(1e-300);
        for j in 0..n {
            let h = 1e-5 * r[j].abs().max(1.0);
            let mut rp = r.clone();
            let mut rm = r.clone();
            rp[j] += h;
            rm[j] -= h;
            let fd = (model.potential(&rp) - model.potential(&rm)) / (2.0 * h);
            for a in 0..f {
                for b in 0..f {
                    let err = (fd[(a, b)] - grad.get(j, a, b)).abs() / gmax;
                    worst = worst.max(err);
                }
            }
        }
    }
    worst
}
