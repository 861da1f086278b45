use super::{accumulate, series, Descriptor, Ensemble, EstimateSeries, NuclearObservable, Reduction};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::mapping::{actions, bin_index, kernel_cmm, kernel_cps_final, kernel_cps_initial};
use crate::model::Representation;
use crate::propagation::{Method, Snapshot, TrajectoryRecord};

/// Settings shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateContext {
    pub method: Method,
    /// Basis of the final-time operator `|k⟩⟨l|`.
    pub representation: Representation,
    pub reduction: Reduction,
    /// CPS parameter, used by the NaF kernels.
    pub gamma: f64,
}

impl EstimateContext {
    pub fn new(method: Method, representation: Representation) -> Self {
        EstimateContext {
            method,
            representation,
            reduction: Reduction::Bitwise,
            gamma: 0.5,
        }
    }
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn check_state(s: usize, f: usize) -> Result<()> {
    if s >= f {
        return Err(Error::Parameter(format!("state {} outside 1..={f}", s + 1)));
    }
    Ok(())
}

fn check_nuclear(ens: &Ensemble<'_>, a: &NuclearObservable) -> Result<()> {
    a.validate()?;
    if a.needs_nuclear() && ens.records[0].snapshots.first().is_some_and(|s| s.r.is_none()) {
        return Err(Error::Parameter(format!(
            "observable {} needs recorded nuclear variables",
            a.id()
        )));
    }
    Ok(())
}

/// NaF correlation `C_{nm,kl}` from CPS-sampled trajectories.
pub fn estimate_naf(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    (n, m, k, l): (usize, usize, usize, usize),
    a: &NuclearObservable,
) -> Result<EstimateSeries> {
    let ens = Ensemble::new(records)?;
    let f = ens.n_states();
    for s in [n, m, k, l] {
        check_state(s, f)?;
    }
    check_nuclear(&ens, a)?;
    let gamma = ctx.gamma;
    let scale = f as f64;
    let sums = accumulate(&ens, ctx.reduction, &|rec, snap| {
        let k0 = kernel_cps_initial(&rec.init.g, m, n, gamma);
        let kt = kernel_cps_final(snap.g(ctx.representation), l, k, gamma);
        Ok([k0 * kt * a.eval(snap)?, ZERO])
    })?;
    let d = Descriptor::new("correlation", ctx.method, ctx.representation, a).states(Some(n), Some(m), Some(k), Some(l));
    Ok(series(&ens, sums.mean(scale), d))
}

/// Window population of state `k`: ratio of trajectories binned in `k` to all binned trajectories.
pub fn estimate_tw_population(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    k: usize,
    a: &NuclearObservable,
) -> Result<EstimateSeries> {
    let mut coeffs = vec![0.0; Ensemble::new(records)?.n_states()];
    check_state(k, coeffs.len())?;
    coeffs[k] = 1.0;
    let d = Descriptor::new("population", ctx.method, ctx.representation, a).states(None, None, Some(k), Some(k));
    window_combination(records, ctx, &coeffs, a, d)
}

fn window_combination(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    coeffs: &[f64],
    a: &NuclearObservable,
    d: Descriptor,
) -> Result<EstimateSeries> {
    let ens = Ensemble::new(records)?;
    check_nuclear(&ens, a)?;
    let sums = accumulate(&ens, ctx.reduction, &|_, snap| {
        match bin_index(&actions(snap.g(ctx.representation))) {
            Some(b) => Ok([C64::new(coeffs[b] * a.eval(snap)?, 0.0), ONE]),
            None => Ok([ZERO, ZERO]),
        }
    })?;
    Ok(series(&ens, sums.ratio(), d))
}

/// Population-coherence correlation `C_{nn,kl}` (`k ≠ l`) from a TW ensemble.
pub fn estimate_tw_pop_coherence(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    k: usize,
    l: usize,
    a: &NuclearObservable,
) -> Result<EstimateSeries> {
    let ens = Ensemble::new(records)?;
    let f = ens.n_states();
    check_state(k, f)?;
    check_state(l, f)?;
    if k == l {
        return Err(Error::Parameter("coherence estimator needs k != l".into()));
    }
    check_nuclear(&ens, a)?;
    let sums = accumulate(&ens, ctx.reduction, &|_, snap| {
        Ok([kernel_cmm(snap.g(ctx.representation), l, k) * a.eval(snap)?, ZERO])
    })?;
    let n = ens.records[0].init.j;
    let d = Descriptor::new("correlation", ctx.method, ctx.representation, a).states(Some(n), Some(n), Some(k), Some(l));
    Ok(series(&ens, sums.mean(1.0), d))
}

/// Coherence-initiated correlation `C_{nm,kl}` (`n ≠ m`) from a TW ensemble
/// whose occupied state was drawn from `{n, m}`.
pub fn estimate_tw_coherence_initial(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    (n, m, k, l): (usize, usize, usize, usize),
    a: &NuclearObservable,
) -> Result<EstimateSeries> {
    let ens = Ensemble::new(records)?;
    let f = ens.n_states();
    for s in [n, m, k, l] {
        check_state(s, f)?;
    }
    if n == m {
        return Err(Error::Parameter("coherence-initial estimator needs n != m".into()));
    }
    check_nuclear(&ens, a)?;
    let sums = accumulate(&ens, ctx.reduction, &|rec, snap| {
        let k0 = kernel_cmm(&rec.init.g, m, n);
        let kt = kernel_cmm(snap.g(ctx.representation), l, k);
        Ok([k0 * kt * a.eval(snap)?, ZERO])
    })?;
    let d = Descriptor::new("correlation", ctx.method, ctx.representation, a).states(Some(n), Some(m), Some(k), Some(l));
    Ok(series(&ens, sums.mean(12.0 / 5.0), d))
}

/// Per-trajectory value of `Σ_k c_k P_k` for the mean-type population estimators.
pub(crate) fn population_weight(
    rec: &TrajectoryRecord,
    snap: &Snapshot,
    ctx: &EstimateContext,
    coeffs: &[f64],
) -> C64 {
    let g = snap.g(ctx.representation);
    let sum = |w: &dyn Fn(usize) -> C64| -> C64 { (0..coeffs.len()).filter(|&k| coeffs[k] != 0.0).map(|k| w(k) * coeffs[k]).sum() };
    match ctx.method {
        Method::Naf => {
            let j = rec.init.j;
            let k0 = kernel_cps_initial(&rec.init.g, j, j, ctx.gamma);
            k0 * sum(&|k| kernel_cps_final(g, k, k, ctx.gamma)) * coeffs.len() as f64
        }
        Method::Ehrenfest => sum(&|k| kernel_cmm(g, k, k)),
        Method::Fssh => match ctx.representation {
            Representation::Adiabatic => sum(&|k| if k == snap.j_occ { ONE } else { ZERO }),
            Representation::Diabatic => sum(&|k| C64::new(snap.active_diabatic[k], 0.0)),
        },
        _ => unreachable!("window methods use the ratio estimator"),
    }
}

fn combination(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    coeffs: &[f64],
    a: &NuclearObservable,
    d: Descriptor,
) -> Result<EstimateSeries> {
    if ctx.method.uses_tw_sampling() {
        return window_combination(records, ctx, coeffs, a, d);
    }
    let ens = Ensemble::new(records)?;
    check_nuclear(&ens, a)?;
    if ctx.method == Method::Naf {
        let j = ens.records[0].init.j;
        if ens.records.iter().any(|r| r.init.j != j) {
            return Err(Error::Parameter("NaF populations need a population initial condition".into()));
        }
    }
    let sums = accumulate(&ens, ctx.reduction, &|rec, snap| {
        Ok([population_weight(rec, snap, ctx, coeffs) * a.eval(snap)?, ZERO])
    })?;
    Ok(series(&ens, sums.mean(1.0), d))
}

/// Population of state `k` with the estimator appropriate to `ctx.method`.
pub fn population(
    records: &[TrajectoryRecord],
    ctx: &EstimateContext,
    k: usize,
    a: &NuclearObservable,
) -> Result<EstimateSeries> {
    let f = Ensemble::new(records)?.n_states();
    check_state(k, f)?;
    let mut coeffs = vec![0.0; f];
    coeffs[k] = 1.0;
    let d = Descriptor::new("population", ctx.method, ctx.representation, a).states(None, None, Some(k), Some(k));
    combination(records, ctx, &coeffs, a, d)
}

/// Diabatic population difference `P_1 − P_2` of a two-state model.
pub fn population_difference(records: &[TrajectoryRecord], ctx: &EstimateContext) -> Result<EstimateSeries> {
    let f = Ensemble::new(records)?.n_states();
    if f != 2 {
        return Err(Error::Parameter(format!("population difference needs 2 states, model has {f}")));
    }
    let ctx = EstimateContext {
        representation: Representation::Diabatic,
        ..*ctx
    };
    let a = NuclearObservable::Identity;
    let d = Descriptor::new("population-difference", ctx.method, ctx.representation, &a);
    combination(records, &ctx, &[1.0, -1.0], &a, d)
}
