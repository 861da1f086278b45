//! Wigner sampling of nuclear initial conditions.
//!
//! Gaussian deviates come from `rand_distr::StandardNormal` (ziggurat), fixed
//! for reproducibility of sample streams.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::model::NuclearInit;

/// Inverse temperature. The zero-temperature limit is explicit rather than a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseTemperature {
    Finite(f64),
    Vacuum,
}

impl InverseTemperature {
    /// Thermal Wigner variances `(Var R, Var P)` of a unit-mass oscillator.
    pub fn variances(self, omega: f64) -> (f64, f64) {
        let var_p = match self {
            InverseTemperature::Vacuum => 0.5 * omega,
            InverseTemperature::Finite(beta) => {
                let x = 0.5 * beta * omega;
                // Q/β with Q = x/tanh(x); tanh saturates to 1 well before overflow.
                if x < 1e-8 {
                    1.0 / beta
                } else {
                    0.5 * omega / x.tanh()
                }
            }
        };
        (var_p / (omega * omega), var_p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuclearSample {
    pub r: DVector<f64>,
    pub p: DVector<f64>,
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Independent thermal Wigner oscillators with unit mass, centred at the origin.
pub fn wigner_thermal_harmonic(
    omegas: &[f64],
    beta: InverseTemperature,
    rng: &mut impl Rng,
) -> Result<NuclearSample> {
    if omegas.iter().any(|&w| !(w > 0.0)) {
        return param_err("oscillator frequencies must be positive");
    }
    if let InverseTemperature::Finite(b) = beta {
        if !(b > 0.0) {
            return param_err("beta must be positive");
        }
    }
    let n = omegas.len();
    let mut r = DVector::zeros(n);
    let mut p = DVector::zeros(n);
    for (j, &w) in omegas.iter().enumerate() {
        let (vr, vp) = beta.variances(w);
        r[j] = vr.sqrt() * normal(rng);
        p[j] = vp.sqrt() * normal(rng);
    }
    Ok(NuclearSample { r, p })
}

/// `R ~ N(R0, 1/(2α))`, `P ~ N(P0, α/2)` per coordinate.
pub fn wigner_gaussian(
    r0: &[f64],
    p0: &[f64],
    alpha: &[f64],
    rng: &mut impl Rng,
) -> Result<NuclearSample> {
    if r0.len() != p0.len() || r0.len() != alpha.len() {
        return Err(crate::Error::Shape("wavepacket centre/width lengths differ".into()));
    }
    if alpha.iter().any(|&a| !(a > 0.0)) {
        return param_err("wavepacket width alpha must be positive");
    }
    let n = r0.len();
    let mut r = DVector::zeros(n);
    let mut p = DVector::zeros(n);
    for j in 0..n {
        r[j] = r0[j] + (0.5 / alpha[j]).sqrt() * normal(rng);
        p[j] = p0[j] + (0.5 * alpha[j]).sqrt() * normal(rng);
    }
    Ok(NuclearSample { r, p })
}

/// Reaction mode thermalized on the surface `½Ω²R² + c_s R`: centre `-c_s/Ω²`.
pub fn wigner_et_reaction_mode(
    omega: f64,
    c_s: f64,
    beta: InverseTemperature,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let s = wigner_thermal_harmonic(&[omega], beta, rng)?;
    Ok((s.r[0] - c_s / (omega * omega), s.p[0]))
}

/// Ground state of unit dimensionless oscillators: `R, P ~ N(0, 1/2)`.
pub fn wigner_lvcm_ground(n: usize, rng: &mut impl Rng) -> NuclearSample {
    let s = 0.5f64.sqrt();
    let mut r = DVector::zeros(n);
    let mut p = DVector::zeros(n);
    for j in 0..n {
        r[j] = s * normal(rng);
        p[j] = s * normal(rng);
    }
    NuclearSample { r, p }
}

/// Draws from any supported nuclear initial condition.
/// Random stream of trajectory `index`: independent of how trajectories are
/// scheduled across workers.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_nuclear(init: &NuclearInit, rng: &mut impl Rng) -> Result<NuclearSample> {
    match init {
        NuclearInit::ThermalHarmonic { omegas, beta } => wigner_thermal_harmonic(omegas, *beta, rng),
        NuclearInit::GaussianWavepacket { r0, p0, alpha } => wigner_gaussian(r0, p0, alpha, rng),
        NuclearInit::ShiftedThermal {
            omega,
            c_s,
            beta,
            bath_omegas,
        } => {
            let (rs, ps) = wigner_et_reaction_mode(*omega, *c_s, *beta, rng)?;
            let bath = wigner_thermal_harmonic(bath_omegas, *beta, rng)?;
            let n = bath_omegas.len() + 1;
            let mut r = DVector::zeros(n);
            let mut p = DVector::zeros(n);
            r[0] = rs;
            p[0] = ps;
            r.rows_mut(1, n - 1).copy_from(&bath.r);
            p.rows_mut(1, n - 1).copy_from(&bath.p);
            Ok(NuclearSample { r, p })
        }
        NuclearInit::LvcmGround { n } => Ok(wigner_lvcm_ground(*n, rng)),
        NuclearInit::Fixed { r, p } => Ok(NuclearSample {
            r: DVector::from_column_slice(r),
            p: DVector::from_column_slice(p),
        }),
    }
}
