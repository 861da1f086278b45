//! Independent references: matrix-exponential electronic dynamics,
//! Monte-Carlo checks of the window integrals and a grid wavepacket solver.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_naf, estimate_tw_coherence_initial, estimate_tw_pop_coherence, estimate_tw_population,
    EstimateContext, EstimateSeries, NuclearObservable,
};
use crate::linalg::{expm_hermitian, hermiticity_residual, CMatrix, C64};
use crate::mapping::{actions, sample_cps, sample_tw, sqz_weight, weight_sqc, window_point};
use crate::model::{ElectronicInit, Representation};
use crate::propagation::{
    dominant_state, quasi_density_for, sample_electronic, InitialDraw, Method, Snapshot, TrajectoryRecord,
    TrajectoryStats,
};
use crate::sampling::trajectory_rng;

pub mod dvr;

/// `U_ln(t) U*_km(t)` with `U = exp(−iHt)`.
pub fn electronic_exact(h: &CMatrix, t: f64, (n, m, k, l): (usize, usize, usize, usize)) -> Result<C64> {
    if hermiticity_residual(h) > 1e-12 {
        return Err(Error::Parameter("Hamiltonian is not Hermitian".into()));
    }
    let u = expm_hermitian(h, t);
    Ok(u[(l, n)] * u[(k, m)].conj())
}

/// Trajectories of nuclei clamped in place: `g(t) = exp(−iHt) g(0)` for every
/// initial condition drawn by the sampler of `method`.
pub fn frozen_ensemble(
    h: &CMatrix,
    method: Method,
    init: ElectronicInit,
    gamma: f64,
    times: &[f64],
    indices: std::ops::Range<usize>,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let f = h.nrows();
    let props: Vec<CMatrix> = times.iter().map(|&t| expm_hermitian(h, t)).collect();
    indices
        .map(|index| {
            let mut rng = trajectory_rng(seed, index as u64);
            let (g, gam, j) = sample_electronic(method, f, init, gamma, &mut rng)?;
            let snapshots = props
                .iter()
                .zip(times)
                .map(|(u, &t)| {
                    let gt = u * &g;
                    let gamma_t = u * &gam * u.adjoint();
                    let rho = quasi_density_for(method, &gt, &gamma_t)?;
                    Ok(Snapshot {
                        t,
                        g_adia: gt.clone(),
                        active_diabatic: DVector::from_fn(f, |k, _| 0.5 * gt[k].norm_sqr()),
                        g_dia: gt,
                        j_occ: dominant_state(&rho, j),
                        h_naf: 0.0,
                        coupling: 0.0,
                        r: None,
                        p: None,
                        gamma: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrajectoryRecord {
                index,
                init: InitialDraw { g, j },
                init_representation: Representation::Diabatic,
                snapshots,
                failure: None,
                stats: TrajectoryStats::default(),
            })
        })
        .collect()
}

/// Averages independent estimates of the same quantity; the spread of the
/// parts gives the error.
pub fn combine_estimates(parts: &[EstimateSeries]) -> Result<EstimateSeries> {
    let first = parts.first().ok_or_else(|| Error::Domain("no estimates to combine".into()))?;
    let np = parts.len();
    let mut out = first.clone();
    out.n_traj = parts.iter().map(|p| p.n_traj).sum();
    for i in 0..first.len() {
        let vals: Vec<C64> = parts.iter().filter_map(|p| p.values[i]).collect();
        if vals.is_empty() {
            out.values[i] = None;
            out.stderr[i] = None;
            continue;
        }
        let mean = vals.iter().sum::<C64>() / vals.len() as f64;
        out.values[i] = Some(mean);
        out.stderr[i] = (vals.len() > 1).then(|| {
            let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (vals.len() - 1) as f64;
            (var / vals.len() as f64).sqrt()
        });
    }
    if parts.iter().any(|p| p.len() != first.len()) || np == 0 {
        return Err(Error::Shape("estimates have different time grids".into()));
    }
    Ok(out)
}

/// Which correlation function a frozen-nuclei check targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    PopulationPopulation,
    PopulationCoherence,
    CoherencePopulation,
    CoherenceCoherence,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 4] = [
        CorrelationKind::PopulationPopulation,
        CorrelationKind::PopulationCoherence,
        CorrelationKind::CoherencePopulation,
        CorrelationKind::CoherenceCoherence,
    ];

    /// Default `(n, m, k, l)` indices for an `f`-state system.
    pub fn indices(self, f: usize) -> (usize, usize, usize, usize) {
        let last = f - 1;
        match self {
            CorrelationKind::PopulationPopulation => (0, 0, last, last),
            CorrelationKind::PopulationCoherence => (0, 0, 0, last),
            CorrelationKind::CoherencePopulation => (0, last, 0, 0),
            CorrelationKind::CoherenceCoherence => (0, last, last, 0),
        }
    }
}

/// One comparison of an estimate with its exact value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub label: String,
    pub t: f64,
    pub estimate: C64Json,
    pub exact: C64Json,
    pub stderr: f64,
    /// `|estimate − exact| / stderr`
    pub sigmas: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C64Json {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for C64Json {
    fn from(z: C64) -> Self {
        C64Json { re: z.re, im: z.im }
    }
}

impl Comparison {
    fn new(label: String, t: f64, estimate: C64, exact: C64, stderr: f64) -> Self {
        let abs_error = (estimate - exact).norm();
        Comparison {
            label,
            t,
            estimate: estimate.into(),
            exact: exact.into(),
            stderr,
            sigmas: if abs_error < 1e-12 { 0.0 } else if stderr > 0.0 { abs_error / stderr } else { f64::INFINITY },
            abs_error,
        }
    }
}

/// Frozen-nuclei estimate of one correlation kind with the estimator that
/// `method` uses, against `electronic_exact`.
pub fn frozen_check(
    h: &CMatrix,
    method: Method,
    kind: CorrelationKind,
    times: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Comparison>> {
    let f = h.nrows();
    let (n, m, k, l) = kind.indices(f);
    let init = if n == m {
        ElectronicInit::Population(n)
    } else {
        ElectronicInit::Coherence(n, m)
    };
    let ctx = EstimateContext::new(method, Representation::Diabatic);
    let parts_n = 20.min(samples);
    let a = NuclearObservable::Identity;
    let mut parts = Vec::with_capacity(parts_n);
    for b in 0..parts_n {
        let lo = b * samples / parts_n;
        let hi = (b + 1) * samples / parts_n;
        let recs = frozen_ensemble(h, method, init, ctx.gamma, times, lo..hi, seed)?;
        let est = match (method, kind) {
            (Method::Naf, _) => estimate_naf(&recs, &ctx, (n, m, k, l), &a)?,
            (_, CorrelationKind::PopulationPopulation) => estimate_tw_population(&recs, &ctx, k, &a)?,
            (_, CorrelationKind::PopulationCoherence) => estimate_tw_pop_coherence(&recs, &ctx, k, l, &a)?,
            _ => estimate_tw_coherence_initial(&recs, &ctx, (n, m, k, l), &a)?,
        };
        parts.push(est);
    }
    let est = combine_estimates(&parts)?;
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let exact = electronic_exact(h, t, (n, m, k, l))?;
            let v = est.values[i].ok_or_else(|| Error::Consistency(format!("estimate undefined at t = {t}")))?;
            Ok(Comparison::new(
                format!("{}/{:?}/F={f}", method.label(), kind),
                t,
                v,
                exact,
                est.stderr[i].unwrap_or(0.0),
            ))
        })
        .collect()
}

/// Monte-Carlo estimate with its error and a pass flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralCheck {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub expected: f64,
    pub pass: bool,
}

impl IntegralCheck {
    fn new(name: &str, xs: &[f64], w: Option<&[f64]>, expected: f64, nsigma: f64) -> Self {
        let (estimate, stderr) = match w {
            None => mean_err(xs),
            Some(w) => ratio_err(xs, w),
        };
        IntegralCheck {
            name: name.into(),
            estimate,
            stderr,
            expected,
            pass: (estimate - expected).abs() <= nsigma * stderr.max(1e-15),
        }
    }

    pub fn relative_error(&self) -> f64 {
        (self.estimate - self.expected).abs() / self.expected.abs()
    }
}

fn mean_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `Σ x w / Σ w` with the delta-method error.
fn ratio_err(xs: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let r = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let n = xs.len() as f64;
    let wbar = sw / n;
    let var = xs.iter().zip(w).map(|(x, w)| (w * (x - r)).powi(2)).sum::<f64>() / (n - 1.0);
    (r, (var / n).sqrt() / wbar)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowIntegralReport {
    pub f: usize,
    pub samples: usize,
    pub checks: Vec<IntegralCheck>,
}

impl WindowIntegralReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Window moments `⟨e_occ⟩ = 4/3`, `⟨e_other⟩ = 1/3`, `⟨e_occ e_other⟩ = 5/12`
/// from the triangle-window sampler, cross-checked against uniform action-box
/// sampling weighted by `weight_sqc` inside the occupation window.
pub fn mc_verify_window_integrals(f: usize, samples: usize, rng: &mut impl Rng) -> Result<WindowIntegralReport> {
    if f < 2 {
        return Err(Error::Parameter("window integrals need F >= 2".into()));
    }
    let mut e_self = Vec::with_capacity(samples);
    let mut e_cross = Vec::with_capacity(samples);
    let mut e_pair = Vec::with_capacity(samples);
    for _ in 0..samples {
        let e = actions(&sample_tw(f, 0, rng).g);
        e_self.push(e[0]);
        e_cross.push(e[1]);
        e_pair.push(e[0] * e[1]);
    }
    let mut bx = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..samples {
        let e: Vec<f64> = (0..f).map(|_| 2.0 * rng.random::<f64>()).collect();
        let w = if window_point(&e, 0) && e[0] < 2.0 { weight_sqc(e[0], f)? } else { 0.0 };
        bx.0.push(e[0]);
        bx.1.push(e[1]);
        bx.2.push(e[0] * e[1]);
        bx.3.push(w);
    }
    let nsig = 5.0;
    let checks = vec![
        IntegralCheck::new("I_self", &e_self, None, 4.0 / 3.0, nsig),
        IntegralCheck::new("I_cross", &e_cross, None, 1.0 / 3.0, nsig),
        IntegralCheck::new("I_pair", &e_pair, None, 5.0 / 12.0, nsig),
        IntegralCheck::new("I_self (box)", &bx.0, Some(&bx.3), 4.0 / 3.0, nsig),
        IntegralCheck::new("I_cross (box)", &bx.1, Some(&bx.3), 1.0 / 3.0, nsig),
        IntegralCheck::new("I_pair (box)", &bx.2, Some(&bx.3), 5.0 / 12.0, nsig),
    ];
    Ok(WindowIntegralReport { f, samples, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqzReport {
    pub times: Vec<f64>,
    pub sqz: Vec<f64>,
    pub sqz_err: Vec<f64>,
    pub tw: Vec<f64>,
    pub tw_err: Vec<f64>,
    pub exact: Vec<f64>,
    /// Largest `|sqz − tw| / sqrt(err_sqz² + err_tw²)`.
    pub max_sigma_between: f64,
    /// Largest deviation of either estimate from the exact value in units of its error.
    pub max_sigma_exact: f64,
}

/// Two-state population transfer `1 → 2` by the squeezed-window estimator on
/// CPS samples and by the triangle-window estimator, both against the exact result.
pub fn mc_verify_sqz_equivalence(
    gamma: f64,
    h: &CMatrix,
    times: &[f64],
    samples: usize,
    seed: u64,
) -> Result<SqzReport> {
    if h.nrows() != 2 {
        return Err(Error::Parameter("squeezed-window check is for two states".into()));
    }
    let (n, m) = (0usize, 1usize);
    let props: Vec<CMatrix> = times.iter().map(|&t| expm_hermitian(h, t)).collect();
    let nb = 20usize;
    let nt = times.len();
    let mut sqz_b = vec![vec![0.0; nt]; nb];
    for b in 0..nb {
        let mut num = vec![0.0; nt];
        let mut den = vec![0.0; nt];
        for idx in b * samples / nb..(b + 1) * samples / nb {
            let mut rng = trajectory_rng(seed, idx as u64);
            let g0 = sample_cps(2, gamma, &mut rng)?.g;
            let e0 = actions(&g0);
            for (it, u) in props.iter().enumerate() {
                let et = actions(&(u * &g0));
                for kk in 0..2 {
                    let w = sqz_weight(&e0, &et, n, kk, gamma)?;
                    den[it] += w;
                    if kk == m {
                        num[it] += w;
                    }
                }
            }
        }
        for it in 0..nt {
            sqz_b[b][it] = if den[it] > 0.0 { num[it] / den[it] } else { f64::NAN };
        }
    }
    let tw = frozen_check(h, Method::NafTw, CorrelationKind::PopulationPopulation, times, samples, seed ^ 0x5eed)?;
    let mut report = SqzReport {
        times: times.to_vec(),
        sqz: vec![],
        sqz_err: vec![],
        tw: vec![],
        tw_err: vec![],
        exact: vec![],
        max_sigma_between: 0.0,
        max_sigma_exact: 0.0,
    };
    for it in 0..nt {
        let col: Vec<f64> = sqz_b.iter().map(|b| b[it]).collect();
        let (mean, err) = mean_err(&col);
        let exact = electronic_exact(h, times[it], (n, n, m, m))?.re;
        let c = &tw[it];
        let between = (mean - c.estimate.re).abs() / (err.powi(2) + c.stderr.powi(2)).sqrt().max(1e-15);
        let vs_exact = ((mean - exact).abs() / err.max(1e-15)).max(c.sigmas);
        report.sqz.push(mean);
        report.sqz_err.push(err);
        report.tw.push(c.estimate.re);
        report.tw_err.push(c.stderr);
        report.exact.push(exact);
        report.max_sigma_between = report.max_sigma_between.max(between);
        report.max_sigma_exact = report.max_sigma_exact.max(vs_exact);
    }
    Ok(report)
}

/// Random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian(f: usize, scale: f64, rng: &mut impl Rng) -> CMatrix {
    let mut h = CMatrix::zeros(f, f);
    for a in 0..f {
        h[(a, a)] = C64::new(scale * (2.0 * rng.random::<f64>() - 1.0), 0.0);
        for b in a + 1..f {
            let z = C64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0) * scale;
            h[(a, b)] = z;
            h[(b, a)] = z.conj();
        }
    }
    h
}

#[cfg(test)]
mod tests;
