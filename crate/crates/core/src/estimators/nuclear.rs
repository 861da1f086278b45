use serde::{Deserialize, Serialize};

use super::correlation::{population, population_weight, EstimateContext};
use super::{Ensemble, NuclearObservable};
use crate::error::{Error, Result};
use crate::mapping::{actions, bin_index};

/// Largest coupling magnitude regarded as asymptotic for scattering channels.
pub const ASYMPTOTIC_COUPLING: f64 = 1e-3;

/// Trajectory weights of a momentum histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramWeight {
    /// Every trajectory counts once; the density integrates to one.
    #[default]
    Raw,
    /// Weighted by the population estimator of one state (0-based); the
    /// density integrates to that state's population.
    State(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub time: f64,
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub n_traj: usize,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

fn time_index(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| Error::Parameter(format!("time {t} is not a sample time")))
}

/// Momentum distributions of one coordinate at the requested sample times.
pub fn momentum_histogram(
    records: &[crate::propagation::TrajectoryRecord],
    ctx: &EstimateContext,
    coordinate: usize,
    edges: &[f64],
    times: &[f64],
    weight: HistogramWeight,
) -> Result<Vec<Histogram>> {
    NuclearObservable::MomentumHistogram { coordinate, bins: edges.to_vec() }.validate()?;
    let ens = Ensemble::new(records)?;
    let nbins = edges.len() - 1;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let it = time_index(&ens.times, t)?;
        let mut counts = vec![0.0; nbins];
        let mut total = 0.0;
        let mut binned = 0.0;
        for rec in &ens.records {
            let snap = &rec.snapshots[it];
            let p = snap
                .p
                .as_ref()
                .ok_or_else(|| Error::Parameter("nuclear variables were not recorded".into()))?;
            let p = *p
                .get(coordinate)
                .ok_or_else(|| Error::Shape(format!("coordinate {coordinate} out of range")))?;
            let w = match weight {
                HistogramWeight::Raw => 1.0,
                HistogramWeight::State(k) if ctx.method.uses_tw_sampling() => {
                    match bin_index(&actions(snap.g(ctx.representation))) {
                        Some(b) => {
                            binned += 1.0;
                            if b == k { 1.0 } else { 0.0 }
                        }
                        None => 0.0,
                    }
                }
                HistogramWeight::State(k) => {
                    let mut coeffs = vec![0.0; rec.init.g.len()];
                    *coeffs
                        .get_mut(k)
                        .ok_or_else(|| Error::Parameter(format!("state {} out of range", k + 1)))? = 1.0;
                    population_weight(rec, snap, ctx, &coeffs).re
                }
            };
            if let Some(b) = edges.windows(2).position(|e| p >= e[0] && p < e[1]) {
                counts[b] += w;
                total += w;
            }
        }
        let norm = match weight {
            HistogramWeight::Raw => total,
            HistogramWeight::State(_) if ctx.method.uses_tw_sampling() => binned,
            HistogramWeight::State(_) => ens.len() as f64,
        };
        let density = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(c, e)| if norm > 0.0 { c / (norm * (e[1] - e[0])) } else { 0.0 })
            .collect();
        out.push(Histogram {
            time: ens.times[it],
            edges: edges.to_vec(),
            density,
            n_traj: ens.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// `R > 0`
    Transmit,
    /// `R < 0`
    Reflect,
}

/// Final-time probability of leaving through `channel` on state `k`, with its
/// batch-mean error.
pub fn scattering_probabilities(
    records: &[crate::propagation::TrajectoryRecord],
    ctx: &EstimateContext,
    channel: Channel,
    k: usize,
) -> Result<(f64, Option<f64>)> {
    let ens = Ensemble::new(records)?;
    let last = ens.times.len() - 1;
    let strong = ens
        .records
        .iter()
        .filter(|r| r.snapshots[last].coupling > ASYMPTOTIC_COUPLING)
        .count();
    if strong as f64 > 0.01 * ens.len() as f64 {
        log::warn!(
            "{strong} of {} trajectories are still in the coupling region at t = {}",
            ens.len(),
            ens.times[last]
        );
    }
    let sign = match channel {
        Channel::Transmit => 1.0,
        Channel::Reflect => -1.0,
    };
    let a = NuclearObservable::IndicatorRegion { coordinate: 0, sign, threshold: 0.0 };
    let s = population(records, ctx, k, &a)?;
    let v = s.values[last].map_or(f64::NAN, |z| z.re);
    Ok((v, s.stderr[last]))
}
