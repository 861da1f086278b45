use nalgebra::DVector;
use rand::Rng;

use super::forces::{dominant_state, meanfield_force, naf_force};
use super::{
    kinetic_energy, quasi_density_for, ElectronicPropagator, Method, MethodOptions, PhaseSpacePoint,
    TurningPoint,
};
use crate::error::{Error, Result};
use crate::frame::{effective_potential, frame_at, short_time_propagator};
use crate::linalg::{CMatrix, C64};
use crate::model::ModelSpec;

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepInfo {
    /// `j_occ` changed.
    pub switched: bool,
    /// A switch or hop was rejected for lack of kinetic energy.
    pub frustrated: bool,
    /// FSSH hop accepted.
    pub hopped: bool,
    /// Step halvings needed to complete the interval.
    pub halvings: u32,
    /// Sub-steps held at a turning point.
    pub holds: u32,
}

impl StepInfo {
    fn merge(self, other: StepInfo) -> StepInfo {
        StepInfo {
            switched: self.switched || other.switched,
            frustrated: self.frustrated || other.frustrated,
            hopped: self.hopped || other.hopped,
            halvings: self.halvings + other.halvings,
            holds: self.holds + other.holds,
        }
    }
}

/// Advances `state` by `dt` with the method in `opts`. On error `state` is left untouched.
pub fn step(
    state: &mut PhaseSpacePoint,
    model: &ModelSpec,
    dt: f64,
    opts: &MethodOptions,
    rng: &mut impl Rng,
) -> Result<StepInfo> {
    if opts.frozen_nuclei {
        return step_frozen(state, opts.method, dt);
    }
    match opts.method {
        Method::Naf | Method::NafTw | Method::NafTw2 => step_naf(state, model, dt, opts),
        Method::Ehrenfest | Method::SqcTw | Method::SqcTw2 => {
            *state = step_meanfield(state, model, dt, opts.method, opts.propagator)?;
            state.t += dt;
            Ok(StepInfo::default())
        }
        Method::Fssh => step_fssh(state, model, dt, opts.propagator, rng),
    }
}

fn update_electrons(state: &mut PhaseSpacePoint, u: &CMatrix, method: Method) {
    state.g = u * &state.g;
    if method.propagates_gamma() {
        state.gamma = u * &state.gamma * u.adjoint();
    }
}

fn step_frozen(state: &mut PhaseSpacePoint, method: Method, dt: f64) -> Result<StepInfo> {
    let f = state.frame.n_states();
    let mut u = CMatrix::zeros(f, f);
    for k in 0..f {
        u[(k, k)] = C64::from_polar(1.0, -state.frame.e[k] * dt);
    }
    update_electrons(state, &u, method);
    let mut info = StepInfo::default();
    if method.is_naf() {
        let rho = quasi_density_for(method, &state.g, &state.gamma)?;
        let j = dominant_state(&rho, state.j_occ);
        info.switched = j != state.j_occ;
        state.j_occ = j;
    }
    state.t += dt;
    Ok(info)
}

/// Moves `R` a full step with the current `P`, refreshes the frame and returns
/// the effective potential used for the electrons with its propagator.
fn drift(
    s: &mut PhaseSpacePoint,
    model: &ModelSpec,
    inv_mass: &DVector<f64>,
    dt: f64,
    propagator: ElectronicPropagator,
) -> Result<(CMatrix, CMatrix)> {
    s.r += s.p.component_mul(inv_mass) * dt;
    let next = frame_at(model, s.r.as_slice(), Some(&s.frame))?;
    let veff = match propagator {
        ElectronicPropagator::Endpoint => effective_potential(&next, &s.p, inv_mass),
        ElectronicPropagator::Midpoint => {
            (effective_potential(&s.frame, &s.p, inv_mass) + effective_potential(&next, &s.p, inv_mass))
                * C64::new(0.5, 0.0)
        }
    };
    s.frame = next;
    let u = short_time_propagator(&veff, dt);
    Ok((veff, u))
}

fn scale_to(p: &mut DVector<f64>, inv_mass: &DVector<f64>, target: f64) -> bool {
    let ke = kinetic_energy(p, inv_mass);
    if target < 0.0 || (ke <= 0.0 && target > 0.0) {
        return false;
    }
    if ke > 0.0 {
        *p *= (target / ke).sqrt();
    }
    true
}

/// One NaF step, recursively halving the interval when the final momentum
/// rescale is impossible.
pub fn step_naf(
    state: &mut PhaseSpacePoint,
    model: &ModelSpec,
    dt: f64,
    opts: &MethodOptions,
) -> Result<StepInfo> {
    naf_interval(state, model, dt, opts, 0)
}

fn naf_interval(
    state: &mut PhaseSpacePoint,
    model: &ModelSpec,
    dt: f64,
    opts: &MethodOptions,
    depth: u32,
) -> Result<StepInfo> {
    match naf_single(state, model, dt, opts) {
        Ok((next, info)) => {
            *state = next;
            Ok(info)
        }
        Err(Error::RescaleImpossible { .. }) if depth < opts.max_halvings => {
            let mut trial = state.clone();
            let a = naf_interval(&mut trial, model, 0.5 * dt, opts, depth + 1)?;
            let b = naf_interval(&mut trial, model, 0.5 * dt, opts, depth + 1)?;
            *state = trial;
            let mut info = a.merge(b);
            info.halvings += 1;
            Ok(info)
        }
        Err(Error::RescaleImpossible { .. }) if opts.turning_point == TurningPoint::Hold => {
            hold(state, &model.inverse_masses(), dt, opts.method)
        }
        Err(e) => Err(e),
    }
}

/// Nuclei stay put for `dt`; the electrons rotate with the adiabatic energies
/// and a dominant-state change is accepted only if the kinetic energy covers it.
fn hold(state: &mut PhaseSpacePoint, inv_mass: &DVector<f64>, dt: f64, method: Method) -> Result<StepInfo> {
    let f = state.frame.n_states();
    let mut u = CMatrix::zeros(f, f);
    for k in 0..f {
        u[(k, k)] = C64::from_polar(1.0, -state.frame.e[k] * dt);
    }
    let mut s = state.clone();
    update_electrons(&mut s, &u, method);
    let mut info = StepInfo { holds: 1, ..Default::default() };
    let rho = quasi_density_for(method, &s.g, &s.gamma)?;
    let j_new = dominant_state(&rho, s.j_occ);
    if j_new != s.j_occ {
        let target = kinetic_energy(&s.p, inv_mass) + s.frame.e[s.j_occ] - s.frame.e[j_new];
        if scale_to(&mut s.p, inv_mass, target) {
            s.j_occ = j_new;
            info.switched = true;
        } else {
            info.frustrated = true;
        }
    }
    s.t += dt;
    *state = s;
    Ok(info)
}

fn naf_single(
    state: &PhaseSpacePoint,
    model: &ModelSpec,
    dt: f64,
    opts: &MethodOptions,
) -> Result<(PhaseSpacePoint, StepInfo)> {
    let method = opts.method;
    let inv_mass = model.inverse_masses();
    let mut s = state.clone();
    let mut info = StepInfo::default();

    let rho = quasi_density_for(method, &s.g, &s.gamma)?;
    let force = naf_force(&s.frame, &rho, s.j_occ, &s.p, &inv_mass, opts.perpendicular_force)?;
    s.p.axpy(0.5 * dt, &force, 1.0);

    let u = drift(&mut s, model, &inv_mass, dt, opts.propagator)?.1;
    update_electrons(&mut s, &u, method);

    let rho = quasi_density_for(method, &s.g, &s.gamma)?;
    let j_new = dominant_state(&rho, s.j_occ);
    if j_new != s.j_occ {
        let target = kinetic_energy(&s.p, &inv_mass) + s.frame.e[s.j_occ] - s.frame.e[j_new];
        if scale_to(&mut s.p, &inv_mass, target) {
            s.j_occ = j_new;
            info.switched = true;
        } else {
            info.frustrated = true;
        }
    }

    let force = naf_force(&s.frame, &rho, s.j_occ, &s.p, &inv_mass, opts.perpendicular_force)?;
    s.p.axpy(0.5 * dt, &force, 1.0);

    let target = s.e_ref - s.frame.e[s.j_occ];
    if !scale_to(&mut s.p, &inv_mass, target) {
        return Err(Error::RescaleImpossible {
            h_ref: s.e_ref,
            e_occ: s.frame.e[s.j_occ],
        });
    }
    s.t += dt;
    Ok((s, info))
}

/// Velocity Verlet on the mean-field force.
pub fn step_meanfield(
    state: &PhaseSpacePoint,
    model: &ModelSpec,
    dt: f64,
    method: Method,
    propagator: ElectronicPropagator,
) -> Result<PhaseSpacePoint> {
    if !method.is_meanfield() {
        return Err(Error::Parameter(format!("{method} is not a mean-field method")));
    }
    let inv_mass = model.inverse_masses();
    let mut s = state.clone();
    let rho = quasi_density_for(method, &s.g, &s.gamma)?;
    s.p.axpy(0.5 * dt, &meanfield_force(&s.frame, &rho)?, 1.0);
    let u = drift(&mut s, model, &inv_mass, dt, propagator)?.1;
    update_electrons(&mut s, &u, method);
    let rho = quasi_density_for(method, &s.g, &s.gamma)?;
    s.p.axpy(0.5 * dt, &meanfield_force(&s.frame, &rho)?, 1.0);
    let j = dominant_state(&rho, s.j_occ);
    s.j_occ = j;
    Ok(s)
}

/// Fewest-switches surface hopping step.
pub fn step_fssh(
    state: &mut PhaseSpacePoint,
    model: &ModelSpec,
    dt: f64,
    propagator: ElectronicPropagator,
    rng: &mut impl Rng,
) -> Result<StepInfo> {
    let inv_mass = model.inverse_masses();
    let mut s = state.clone();
    let mut info = StepInfo::default();
    let j = s.j_occ;

    s.p.axpy(-0.5 * dt, &s.frame.grad_e.column(j), 1.0);
    let (veff, u) = drift(&mut s, model, &inv_mass, dt, propagator)?;
    s.g = u * &s.g;

    let probs = hop_probabilities(&s.g, &veff, j, dt);
    let xi: f64 = rng.random();
    let mut acc = 0.0;
    let target = probs.iter().enumerate().find_map(|(k, &pk)| {
        acc += pk;
        (pk > 0.0 && xi < acc).then_some(k)
    });
    if let Some(k) = target {
        if rescale_along_coupling(&mut s, &inv_mass, j, k) {
            s.j_occ = k;
            info.hopped = true;
            info.switched = true;
        } else {
            info.frustrated = true;
        }
    }

    s.p.axpy(-0.5 * dt, &s.frame.grad_e.column(s.j_occ), 1.0);
    s.t += dt;
    *state = s;
    Ok(info)
}

/// Clamped fewest-switches probabilities from `j` to every state.
pub fn hop_probabilities(g: &crate::linalg::CVector, veff: &CMatrix, j: usize, dt: f64) -> Vec<f64> {
    let f = g.len();
    let rho_jj = 0.5 * g[j].norm_sqr();
    let mut out = vec![0.0; f];
    if rho_jj < 1e-12 {
        return out;
    }
    for k in 0..f {
        if k == j {
            continue;
        }
        let rho_jk = 0.5 * g[j] * g[k].conj();
        let b = 2.0 * (veff[(k, j)] * rho_jk).im;
        out[k] = (dt * b / rho_jj).clamp(0.0, 1.0);
    }
    let total: f64 = out.iter().sum();
    if total > 1.0 {
        out.iter_mut().for_each(|x| *x /= total);
    }
    out
}

/// Adjusts `P` along `d_jk` so that `½PᵀM⁻¹P + E` is unchanged by the hop.
fn rescale_along_coupling(s: &mut PhaseSpacePoint, inv_mass: &DVector<f64>, j: usize, k: usize) -> bool {
    let n = s.frame.n_dof();
    let dir = DVector::from_iterator(n, (0..n).map(|jj| s.frame.d.get(jj, j, k)));
    let a: f64 = 0.5 * dir.iter().zip(inv_mass.iter()).map(|(u, m)| u * u * m).sum::<f64>();
    let b: f64 = s.p.iter().zip(dir.iter()).zip(inv_mass.iter()).map(|((p, u), m)| p * u * m).sum();
    let c = s.frame.e[k] - s.frame.e[j];
    if a <= 0.0 {
        return false;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return false;
    }
    let kappa = if b >= 0.0 {
        (-b + disc.sqrt()) / (2.0 * a)
    } else {
        (-b - disc.sqrt()) / (2.0 * a)
    };
    s.p.axpy(kappa, &dir, 1.0);
    true
}
