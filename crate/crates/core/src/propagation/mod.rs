//! Per-trajectory time stepping.
//!
//! All steppers work in the adiabatic representation: `g` and `Γ` are
//! expressed in the eigenbasis of `V(R)` carried by the cached frame.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{frame_at, to_adiabatic_initial, to_diabatic_vector, AdiabaticFrame};
use crate::linalg::{CMatrix, CVector, C64};
use crate::mapping::{gamma_init, quasi_density_gamma, quasi_density_tw, sample_cps, sample_tw};
use crate::model::{ElectronicInit, ModelSpec, Representation};
use crate::sampling::sample_nuclear;

mod forces;
mod steppers;

pub use forces::{
    dominant_state, meanfield_force, naf_force, nonadiabatic_force,
    perpendicular_nonadiabatic_force,
};
pub use steppers::{hop_probabilities, step, step_fssh, step_meanfield, step_naf, StepInfo};

/// Trajectory method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Nonadiabatic field with CPS sampling.
    Naf,
    /// Nonadiabatic field with triangle windows.
    NafTw,
    /// NaF-TW with a propagated commutator matrix.
    NafTw2,
    Ehrenfest,
    /// Mean-field trajectories with triangle windows and a frozen Γ.
    SqcTw,
    /// SQC-TW with a propagated commutator matrix.
    SqcTw2,
    /// Fewest-switches surface hopping.
    Fssh,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Naf,
        Method::NafTw,
        Method::NafTw2,
        Method::Ehrenfest,
        Method::SqcTw,
        Method::SqcTw2,
        Method::Fssh,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Naf => "naf",
            Method::NafTw => "naf-tw",
            Method::NafTw2 => "naf-tw2",
            Method::Ehrenfest => "ehrenfest",
            Method::SqcTw => "sqc-tw",
            Method::SqcTw2 => "sqc-tw2",
            Method::Fssh => "fssh",
        }
    }

    pub fn is_naf(self) -> bool {
        matches!(self, Method::Naf | Method::NafTw | Method::NafTw2)
    }

    pub fn is_meanfield(self) -> bool {
        matches!(self, Method::Ehrenfest | Method::SqcTw | Method::SqcTw2)
    }

    /// Initial conditions drawn from the triangle-window sampler.
    pub fn uses_tw_sampling(self) -> bool {
        matches!(self, Method::NafTw | Method::NafTw2 | Method::SqcTw | Method::SqcTw2)
    }

    /// Whether `Γ` evolves as `U Γ U†` along the trajectory.
    pub fn propagates_gamma(self) -> bool {
        matches!(self, Method::Naf | Method::NafTw2 | Method::SqcTw2)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Effective potential used for the unitary electronic update over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectronicPropagator {
    /// `V^eff(R_{t+Δt}, P_{t+Δt/2})`; first order in `Δt`.
    #[default]
    Endpoint,
    /// Average of `V^eff` at `R_t` and `R_{t+Δt}` with `P_{t+Δt/2}`; second order.
    Midpoint,
}

/// What a NaF step does when the final rescale stays impossible after all halvings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurningPoint {
    /// Flag the trajectory as failed.
    #[default]
    Fail,
    /// Keep `R` and `P` fixed for the step while the electrons evolve.
    Hold,
}

/// Method plus its numerical options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodOptions {
    pub method: Method,
    /// CPS parameter for NaF sampling and kernels.
    pub gamma: f64,
    /// Project the nonadiabatic force perpendicular to the velocity.
    pub perpendicular_force: bool,
    /// Nuclei do not move; electrons evolve under the initial adiabatic energies.
    pub frozen_nuclei: bool,
    /// Maximum recursive step halvings when the NaF energy rescale fails.
    pub max_halvings: u32,
    pub propagator: ElectronicPropagator,
    pub turning_point: TurningPoint,
}

impl Default for MethodOptions {
    fn default() -> Self {
        MethodOptions {
            method: Method::NafTw,
            gamma: 0.5,
            perpendicular_force: false,
            frozen_nuclei: false,
            max_halvings: 8,
            propagator: ElectronicPropagator::Endpoint,
            turning_point: TurningPoint::Fail,
        }
    }
}

impl MethodOptions {
    pub fn new(method: Method) -> Self {
        MethodOptions {
            method,
            ..Default::default()
        }
    }
}

/// Complete trajectory state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpacePoint {
    pub t: f64,
    pub r: DVector<f64>,
    pub p: DVector<f64>,
    /// Adiabatic mapping vector `g = x + i p`.
    pub g: CVector,
    /// Adiabatic commutator matrix.
    pub gamma: CMatrix,
    pub j_occ: usize,
    pub frame: AdiabaticFrame,
    /// Conserved mapping energy `½PᵀM⁻¹P + E_j` fixed at `t = 0`.
    pub e_ref: f64,
}

pub fn kinetic_energy(p: &DVector<f64>, inv_mass: &DVector<f64>) -> f64 {
    0.5 * p.iter().zip(inv_mass.iter()).map(|(p, m)| p * p * m).sum::<f64>()
}

impl PhaseSpacePoint {
    /// `½PᵀM⁻¹P + E_{j_occ}(R)`
    pub fn h_naf(&self, inv_mass: &DVector<f64>) -> f64 {
        kinetic_energy(&self.p, inv_mass) + self.frame.e[self.j_occ]
    }

    /// Quasi-density matrix used by `method`.
    pub fn quasi_density(&self, method: Method) -> Result<CMatrix> {
        quasi_density_for(method, &self.g, &self.gamma)
    }
}

pub(crate) fn quasi_density_for(method: Method, g: &CVector, gamma: &CMatrix) -> Result<CMatrix> {
    match method {
        Method::NafTw => quasi_density_tw(g),
        Method::Ehrenfest | Method::Fssh => Ok(g * g.adjoint() * C64::new(0.5, 0.0)),
        Method::Naf | Method::NafTw2 | Method::SqcTw | Method::SqcTw2 => Ok(quasi_density_gamma(g, gamma)),
    }
}

/// Electronic state as drawn, before any change of representation.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDraw {
    /// Mapping vector in the model's initial representation.
    pub g: CVector,
    /// Occupied state used by the sampler, in the same representation.
    pub j: usize,
}

/// Draws the electronic initial condition of `method`: mapping vector,
/// commutator matrix and occupied state, all in the sampling representation.
pub fn sample_electronic(
    method: Method,
    f: usize,
    init: ElectronicInit,
    gamma: f64,
    rng: &mut impl Rng,
) -> Result<(CVector, CMatrix, usize)> {
    let (n, m) = init.pair();
    if n >= f || m >= f {
        return Err(Error::Parameter(format!("initial state outside 1..={f}")));
    }
    let j = match init {
        ElectronicInit::Population(s) => s,
        ElectronicInit::Coherence(..) => {
            if rng.random::<bool>() {
                n
            } else {
                m
            }
        }
    };
    let (g, gamma) = match method {
        Method::NafTw => {
            let g = sample_tw(f, j, rng).g;
            (g, CMatrix::identity(f, f) * C64::new(1.0 / 3.0, 0.0))
        }
        Method::NafTw2 | Method::SqcTw | Method::SqcTw2 => {
            let g = sample_tw(f, j, rng).g;
            let gam = gamma_init(&g, j);
            (g, gam)
        }
        Method::Naf => {
            let g = sample_cps(f, gamma, rng)?.g;
            let gam = gamma_init(&g, j);
            (g, gam)
        }
        Method::Ehrenfest | Method::Fssh => {
            if n != m {
                return Err(Error::Parameter(format!(
                    "{method} supports population initial conditions only"
                )));
            }
            let mut g = CVector::zeros(f);
            let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            g[j] = C64::from_polar(2f64.sqrt(), theta);
            (g, CMatrix::zeros(f, f))
        }
    };
    Ok((g, gamma, j))
}

/// Draws nuclear and electronic initial conditions and builds the starting point.
pub fn initialize(
    model: &ModelSpec,
    opts: &MethodOptions,
    rng: &mut impl Rng,
) -> Result<(PhaseSpacePoint, InitialDraw)> {
    let f = model.n_states();
    let method = opts.method;
    let nuc = sample_nuclear(&model.init.nuclear, rng)?;
    let (g, gamma, j) = sample_electronic(method, f, model.init.electronic, opts.gamma, rng)?;
    let frame = frame_at(model, nuc.r.as_slice(), None)?;
    let (g_adia, gamma_adia, j_adia) = match model.init.representation {
        Representation::Adiabatic => (g.clone(), gamma.clone(), j),
        Representation::Diabatic => {
            let (ga, gama) = to_adiabatic_initial(&g, &gamma, &frame.t);
            let j_adia = if method == Method::Fssh {
                let w: Vec<f64> = ga.iter().map(|z| z.norm_sqr()).collect();
                let total: f64 = w.iter().sum();
                let mut xi = rng.random::<f64>() * total;
                let mut pick = f - 1;
                for (k, wk) in w.iter().enumerate() {
                    if xi < *wk {
                        pick = k;
                        break;
                    }
                    xi -= wk;
                }
                pick
            } else {
                let rho = quasi_density_for(method, &ga, &gama)?;
                dominant_state(&rho, 0)
            };
            (ga, gama, j_adia)
        }
    };
    let inv_mass = model.inverse_masses();
    let mut point = PhaseSpacePoint {
        t: 0.0,
        r: nuc.r,
        p: nuc.p,
        g: g_adia,
        gamma: gamma_adia,
        j_occ: j_adia,
        frame,
        e_ref: 0.0,
    };
    point.e_ref = point.h_naf(&inv_mass);
    Ok((point, InitialDraw { g, j }))
}

/// Which parts of the state to store at each sample time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordOptions {
    pub nuclear: bool,
    pub gamma: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub g_adia: CVector,
    pub g_dia: CVector,
    pub j_occ: usize,
    pub h_naf: f64,
    /// Largest nonadiabatic coupling magnitude at `R_t`.
    pub coupling: f64,
    /// Diabatic populations implied by the active state and the adiabatic
    /// coherences of `½gg†`, used for surface-hopping reporting.
    pub active_diabatic: DVector<f64>,
    pub r: Option<DVector<f64>>,
    pub p: Option<DVector<f64>>,
    pub gamma: Option<CMatrix>,
}

impl Snapshot {
    pub fn capture(state: &PhaseSpacePoint, inv_mass: &DVector<f64>, opts: RecordOptions) -> Self {
        let coupling = (0..state.frame.d.len())
            .flat_map(|j| state.frame.d.block(j).iter().copied())
            .fold(0.0f64, |a, x| a.max(x.abs()));
        let t = &state.frame.t;
        let f = state.g.len();
        let active_diabatic = DVector::from_fn(f, |k, _| {
            let mut pk = t[(k, state.j_occ)].powi(2);
            for a in 0..f {
                for b in 0..f {
                    if a != b {
                        pk += t[(k, a)] * t[(k, b)] * (0.5 * state.g[a] * state.g[b].conj()).re;
                    }
                }
            }
            pk
        });
        Snapshot {
            t: state.t,
            g_adia: state.g.clone(),
            g_dia: to_diabatic_vector(&state.g, &state.frame.t),
            j_occ: state.j_occ,
            h_naf: state.h_naf(inv_mass),
            coupling,
            active_diabatic,
            r: opts.nuclear.then(|| state.r.clone()),
            p: opts.nuclear.then(|| state.p.clone()),
            gamma: opts.gamma.then(|| state.gamma.clone()),
        }
    }

    /// Mapping vector in the requested representation.
    pub fn g(&self, rep: Representation) -> &CVector {
        match rep {
            Representation::Adiabatic => &self.g_adia,
            Representation::Diabatic => &self.g_dia,
        }
    }
}

/// Counters accumulated along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrajectoryStats {
    pub switches: usize,
    pub frustrated: usize,
    pub hops: usize,
    pub halvings: usize,
    /// Steps spent held at a turning point.
    pub holds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub init: InitialDraw,
    /// Representation `init` is expressed in.
    pub init_representation: Representation,
    pub snapshots: Vec<Snapshot>,
    pub failure: Option<String>,
    pub stats: TrajectoryStats,
}

impl TrajectoryRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Number of `dt` steps to each sample time. Times must be ascending multiples of `dt`.
pub fn sample_steps(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    if !(dt > 0.0) {
        return Err(Error::Parameter("dt must be positive".into()));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut last = 0usize;
    for (i, &t) in t_grid.iter().enumerate() {
        let k = (t / dt).round();
        if k < 0.0 || (t - k * dt).abs() > 1e-9 * dt.max(t.abs()) {
            return Err(Error::Parameter(format!("sample time {t} is not a multiple of dt = {dt}")));
        }
        let k = k as usize;
        if i > 0 && k < last {
            return Err(Error::Parameter("sample times must be ascending".into()));
        }
        last = k;
        out.push(k);
    }
    Ok(out)
}

/// Propagates `init` and records snapshots at `t_grid`. A failing step
/// truncates the record and stores the error message.
#[allow(clippy::too_many_arguments)]
pub fn propagate_trajectory(
    index: usize,
    mut state: PhaseSpacePoint,
    draw: InitialDraw,
    model: &ModelSpec,
    opts: &MethodOptions,
    t_grid: &[f64],
    dt: f64,
    record: RecordOptions,
    rng: &mut impl Rng,
) -> Result<TrajectoryRecord> {
    let steps = sample_steps(t_grid, dt)?;
    let inv_mass = model.inverse_masses();
    let mut rec = TrajectoryRecord {
        index,
        init: draw,
        init_representation: model.init.representation,
        snapshots: Vec::with_capacity(t_grid.len()),
        failure: None,
        stats: TrajectoryStats::default(),
    };
    let mut done = 0usize;
    for (&target, &t) in steps.iter().zip(t_grid) {
        while done < target {
            match step(&mut state, model, dt, opts, rng) {
                Ok(info) => {
                    rec.stats.switches += info.switched as usize;
                    rec.stats.frustrated += info.frustrated as usize;
                    rec.stats.hops += info.hopped as usize;
                    rec.stats.halvings += info.halvings as usize;
                    rec.stats.holds += info.holds as usize;
                }
                Err(e) => {
                    rec.failure = Some(format!("t = {}: {e}", state.t));
                    return Ok(rec);
                }
            }
            done += 1;
        }
        state.t = t;
        rec.snapshots.push(Snapshot::capture(&state, &inv_mass, record));
    }
    Ok(rec)
}

#[cfg(test)]
mod tests;
