use super::correlation::EstimateContext;
use super::{accumulate, series, Descriptor, Ensemble, EstimateSeries, NuclearObservable};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::mapping::{kernel_cmm, kernel_cps_final, kernel_cps_initial};
use crate::propagation::{Method, TrajectoryRecord};

/// Flux-flux correlation function and its time integral.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxRate {
    pub cff: EstimateSeries,
    /// Running trapezoid integral of `Re C_FF`.
    pub running: Vec<f64>,
    pub rate: f64,
    /// The running integral varied by less than 1% over the last tenth of the window.
    pub converged: bool,
}

/// `C_FF(t) = −Δ²[C_{12,12} − C_{12,21} − C_{21,12} + C_{21,21}]` from a
/// two-state ensemble started from the `|1⟩⟨2|` coherence sampler, and
/// `k = ∫ Re C_FF dt`.
pub fn flux_flux_rate(records: &[TrajectoryRecord], ctx: &EstimateContext, delta: f64) -> Result<FluxRate> {
    let ens = Ensemble::new(records)?;
    if ens.n_states() != 2 {
        return Err(Error::Parameter("flux-flux rate needs a two-state model".into()));
    }
    let terms: [(usize, usize, usize, usize, f64); 4] =
        [(0, 1, 0, 1, 1.0), (0, 1, 1, 0, -1.0), (1, 0, 0, 1, -1.0), (1, 0, 1, 0, 1.0)];
    let (scale, naf) = match ctx.method {
        Method::Naf => (2.0, true),
        m if m.uses_tw_sampling() => (12.0 / 5.0, false),
        m => return Err(Error::Parameter(format!("flux-flux rate is not available for {m}"))),
    };
    let gamma = ctx.gamma;
    let sums = accumulate(&ens, ctx.reduction, &|rec, snap| {
        let g = snap.g(ctx.representation);
        let mut c = C64::new(0.0, 0.0);
        for &(n, m, k, l, s) in &terms {
            let term = if naf {
                kernel_cps_initial(&rec.init.g, m, n, gamma) * kernel_cps_final(g, l, k, gamma)
            } else {
                kernel_cmm(&rec.init.g, m, n) * kernel_cmm(g, l, k)
            };
            c += term * s;
        }
        Ok([c, C64::new(0.0, 0.0)])
    })?;
    let d = Descriptor::new("flux-flux", ctx.method, ctx.representation, &NuclearObservable::Identity);
    let cff = series(&ens, sums.mean(-delta * delta * scale), d);
    let re = cff.real();
    let (running, rate, converged) = integrate_with_plateau(&cff.times, &re);
    Ok(FluxRate { cff, running, rate, converged })
}

/// Trapezoid running integral and plateau test over the last 10% of the window.
pub(crate) fn integrate_with_plateau(t: &[f64], y: &[f64]) -> (Vec<f64>, f64, bool) {
    let mut running = vec![0.0; t.len()];
    for i in 1..t.len() {
        running[i] = running[i - 1] + 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
    }
    let total = *running.last().unwrap_or(&0.0);
    let t_end = *t.last().unwrap_or(&0.0);
    let tail: Vec<f64> = t
        .iter()
        .zip(&running)
        .filter(|(ti, _)| **ti >= 0.9 * t_end)
        .map(|(_, r)| *r)
        .collect();
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let converged = tail.len() >= 2 && total.is_finite() && spread < 0.01 * total.abs();
    (running, total, converged)
}

/// High-temperature golden-rule rate `Δ²√(πβ/λ) exp(−β(ε−λ)²/(4λ))`.
pub fn marcus_rate(eps: f64, lambda: f64, delta: f64, beta: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(beta > 0.0) {
        return Err(Error::Parameter("marcus rate needs lambda > 0 and beta > 0".into()));
    }
    Ok(delta * delta * (std::f64::consts::PI * beta / lambda).sqrt()
        * (-beta * (eps - lambda).powi(2) / (4.0 * lambda)).exp())
}
