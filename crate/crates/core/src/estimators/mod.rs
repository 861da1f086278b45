//! Ensemble averages: correlation functions, populations, nuclear
//! distributions, scattering probabilities and flux-flux rates.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::propagation::{Snapshot, TrajectoryRecord};

mod correlation;
mod nuclear;
mod rate;

pub use crate::model::Representation;
pub use correlation::{
    EstimateContext,
    estimate_naf, estimate_tw_coherence_initial, estimate_tw_pop_coherence, estimate_tw_population,
    population, population_difference,
};
pub use nuclear::{momentum_histogram, scattering_probabilities, Channel, Histogram, HistogramWeight};
pub use rate::{flux_flux_rate, marcus_rate, FluxRate};

/// Number of batches used for the batch-mean error estimate.
pub const N_BATCHES: usize = 20;

/// Nuclear phase-space function multiplying the electronic kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NuclearObservable {
    #[default]
    Identity,
    /// `1` when `sign · (R_coordinate − threshold) > 0`.
    IndicatorRegion { coordinate: usize, sign: f64, threshold: f64 },
    /// Histogram of one momentum component over `bins` (edges).
    MomentumHistogram { coordinate: usize, bins: Vec<f64> },
    CoordinateMean { coordinate: usize },
    MomentumMean { coordinate: usize },
}

impl NuclearObservable {
    pub fn validate(&self) -> Result<()> {
        match self {
            NuclearObservable::IndicatorRegion { sign, .. } if *sign != 1.0 && *sign != -1.0 => {
                Err(Error::Parameter("indicator sign must be +1 or -1".into()))
            }
            NuclearObservable::MomentumHistogram { bins, .. } => {
                if bins.len() < 2 || bins.windows(2).any(|w| !(w[1] > w[0])) {
                    Err(Error::Parameter("histogram bins must be strictly increasing".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Short identifier written into output descriptors.
    pub fn id(&self) -> String {
        match self {
            NuclearObservable::Identity => "identity".into(),
            NuclearObservable::IndicatorRegion { coordinate, sign, threshold } => {
                let s = if *sign > 0.0 { '+' } else { '-' };
                format!("indicator(R{coordinate}{s}{threshold})")
            }
            NuclearObservable::MomentumHistogram { coordinate, bins } => {
                format!("momentum-histogram(P{coordinate},{} bins)", bins.len() - 1)
            }
            NuclearObservable::CoordinateMean { coordinate } => format!("R{coordinate}"),
            NuclearObservable::MomentumMean { coordinate } => format!("P{coordinate}"),
        }
    }

    /// Value at one snapshot.
    pub fn eval(&self, snap: &Snapshot) -> Result<f64> {
        let nuclear = |which: &Option<nalgebra::DVector<f64>>, c: usize| -> Result<f64> {
            let v = which
                .as_ref()
                .ok_or_else(|| Error::Parameter("nuclear variables were not recorded".into()))?;
            v.get(c)
                .copied()
                .ok_or_else(|| Error::Shape(format!("coordinate {c} outside 0..{}", v.len())))
        };
        match self {
            NuclearObservable::Identity => Ok(1.0),
            NuclearObservable::IndicatorRegion { coordinate, sign, threshold } => {
                let r = nuclear(&snap.r, *coordinate)?;
                Ok(if sign * (r - threshold) > 0.0 { 1.0 } else { 0.0 })
            }
            NuclearObservable::CoordinateMean { coordinate } => nuclear(&snap.r, *coordinate),
            NuclearObservable::MomentumMean { coordinate } => nuclear(&snap.p, *coordinate),
            NuclearObservable::MomentumHistogram { .. } => Err(Error::Parameter(
                "momentum histograms are vector valued; use momentum_histogram".into(),
            )),
        }
    }

    /// Whether evaluating requires recorded nuclear variables.
    pub fn needs_nuclear(&self) -> bool {
        !matches!(self, NuclearObservable::Identity)
    }
}

/// How per-trajectory contributions are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Fixed trajectory-index order; bitwise reproducible.
    #[default]
    Bitwise,
    /// Parallel tree reduction in arbitrary order.
    FreeOrder,
}

/// What an [`EstimateSeries`] holds. State labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub observable: String,
    /// Method label, or `dvr` for grid results.
    pub method: String,
    pub representation: Representation,
}

impl Descriptor {
    pub fn new(quantity: &str, method: impl std::fmt::Display, representation: Representation, a: &NuclearObservable) -> Self {
        Descriptor {
            quantity: quantity.to_string(),
            n: None,
            m: None,
            k: None,
            l: None,
            observable: a.id(),
            method: method.to_string(),
            representation,
        }
    }

    /// Sets the 0-based indices `(n, m, k, l)`, stored 1-based.
    pub fn states(mut self, n: Option<usize>, m: Option<usize>, k: Option<usize>, l: Option<usize>) -> Self {
        self.n = n.map(|x| x + 1);
        self.m = m.map(|x| x + 1);
        self.k = k.map(|x| x + 1);
        self.l = l.map(|x| x + 1);
        self
    }

    /// File stem built from the descriptor.
    pub fn file_stem(&self) -> String {
        let mut s = format!("{}_{}", self.quantity, self.method);
        for (tag, v) in [("n", self.n), ("m", self.m), ("k", self.k), ("l", self.l)] {
            if let Some(v) = v {
                s.push_str(&format!("_{tag}{v}"));
            }
        }
        if self.observable != "identity" {
            let clean: String = self
                .observable
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                .collect();
            s.push('_');
            s.push_str(clean.trim_matches('_'));
        }
        s.push('_');
        s.push_str(match self.representation {
            Representation::Diabatic => "dia",
            Representation::Adiabatic => "adia",
        });
        s
    }
}

/// Time series of an ensemble estimate with batch-mean errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub times: Vec<f64>,
    /// `None` where the estimator is undefined (zero denominator).
    pub values: Vec<Option<C64>>,
    pub stderr: Vec<Option<f64>>,
    pub n_traj: usize,
    pub descriptor: Descriptor,
}

impl EstimateSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, i: usize) -> Option<C64> {
        self.values[i]
    }

    /// Real parts, `NaN` where missing.
    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.map_or(f64::NAN, |z| z.re)).collect()
    }

    /// Writes the CSV schema: `#`-prefixed JSON descriptor, then
    /// `time,re,im,stderr,n_traj` with empty fields for missing values.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.descriptor)?)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["time", "re", "im", "stderr", "n_traj"])?;
        let n = self.n_traj.to_string();
        for i in 0..self.times.len() {
            let (re, im) = match self.values[i] {
                Some(z) => (fmt(z.re), fmt(z.im)),
                None => (String::new(), String::new()),
            };
            let se = self.stderr[i].map(fmt).unwrap_or_default();
            csv.write_record([fmt(self.times[i]), re, im, se, n.clone()])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Consistency("empty series file".into()))??;
        let json = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::Consistency("missing descriptor line".into()))?;
        let descriptor: Descriptor = serde_json::from_str(json)?;
        let rest: String = lines.collect::<std::io::Result<Vec<_>>>()?.join("\n");
        let mut rdr = csv::Reader::from_reader(rest.as_bytes());
        let mut out = EstimateSeries {
            times: vec![],
            values: vec![],
            stderr: vec![],
            n_traj: 0,
            descriptor,
        };
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<Option<f64>> {
                let s = rec.get(i).unwrap_or("");
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Consistency(format!("bad number {s:?}: {e}")))
                }
            };
            out.times.push(field(0)?.ok_or_else(|| Error::Consistency("missing time".into()))?);
            out.values.push(match (field(1)?, field(2)?) {
                (Some(re), Some(im)) => Some(C64::new(re, im)),
                _ => None,
            });
            out.stderr.push(field(3)?);
            out.n_traj = field(4)?.unwrap_or(0.0) as usize;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else {
        String::new()
    }
}

/// Successful trajectories of an ensemble with a shared time grid.
pub(crate) struct Ensemble<'a> {
    pub records: Vec<&'a TrajectoryRecord>,
    pub times: Vec<f64>,
}

impl<'a> Ensemble<'a> {
    pub fn new(records: &'a [TrajectoryRecord]) -> Result<Self> {
        let mut ok: Vec<&TrajectoryRecord> = records.iter().filter(|r| !r.failed()).collect();
        ok.sort_by_key(|r| r.index);
        let first = ok
            .first()
            .ok_or_else(|| Error::Domain("empty ensemble".into()))?;
        let times: Vec<f64> = first.snapshots.iter().map(|s| s.t).collect();
        if ok.iter().any(|r| r.snapshots.len() != times.len()) {
            return Err(Error::Shape("trajectories have different sample grids".into()));
        }
        Ok(Ensemble { records: ok, times })
    }

    pub fn n_states(&self) -> usize {
        self.records[0].init.g.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

/// Per-batch sums of `[numerator, denominator]` contributions at each time.
pub(crate) struct BatchSums {
    /// `sums[b][t]`
    pub sums: Vec<Vec<[C64; 2]>>,
    pub counts: Vec<usize>,
}

pub(crate) type Contribution<'f> =
    dyn Fn(&TrajectoryRecord, &Snapshot) -> Result<[C64; 2]> + Sync + 'f;

pub(crate) fn accumulate(ens: &Ensemble<'_>, reduction: Reduction, f: &Contribution<'_>) -> Result<BatchSums> {
    let n = ens.len();
    let nt = ens.times.len();
    let nb = N_BATCHES.min(n);
    let batch_of = |i: usize| i * nb / n;
    let traj_sum = |rec: &TrajectoryRecord| -> Result<Vec<[C64; 2]>> {
        rec.snapshots.iter().map(|s| f(rec, s)).collect()
    };
    let zero = || vec![[C64::new(0.0, 0.0); 2]; nt];
    let add = |acc: &mut Vec<[C64; 2]>, x: &[[C64; 2]]| {
        for (a, b) in acc.iter_mut().zip(x) {
            a[0] += b[0];
            a[1] += b[1];
        }
    };
    let mut counts = vec![0usize; nb];
    for i in 0..n {
        counts[batch_of(i)] += 1;
    }
    let sums = match reduction {
        Reduction::Bitwise => {
            let mut sums = vec![zero(); nb];
            for (i, rec) in ens.records.iter().enumerate() {
                add(&mut sums[batch_of(i)], &traj_sum(rec)?);
            }
            sums
        }
        Reduction::FreeOrder => (0..nb)
            .into_par_iter()
            .map(|b| {
                let lo = (b * n).div_ceil(nb);
                let hi = ((b + 1) * n).div_ceil(nb);
                ens.records[lo..hi]
                    .par_iter()
                    .map(|rec| traj_sum(rec))
                    .try_reduce(zero, |mut a, x| {
                        add(&mut a, &x);
                        Ok(a)
                    })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(BatchSums { sums, counts })
}

fn spread(values: &[C64]) -> Option<f64> {
    let nb = values.len();
    if nb < 2 {
        return None;
    }
    let mean: C64 = values.iter().sum::<C64>() / nb as f64;
    let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (nb - 1) as f64;
    Some((var / nb as f64).sqrt())
}

impl BatchSums {
    /// `(1/N) Σ numerator`
    pub fn mean(&self, scale: f64) -> (Vec<Option<C64>>, Vec<Option<f64>>) {
        let n: usize = self.counts.iter().sum();
        let nt = self.sums[0].len();
        let mut vals = Vec::with_capacity(nt);
        let mut errs = Vec::with_capacity(nt);
        for t in 0..nt {
            let total: C64 = self.sums.iter().map(|b| b[t][0]).sum();
            vals.push(Some(total * (scale / n as f64)));
            let means: Vec<C64> = self
                .sums
                .iter()
                .zip(&self.counts)
                .map(|(b, &c)| b[t][0] * (scale / c as f64))
                .collect();
            errs.push(spread(&means));
        }
        (vals, errs)
    }

    /// `Σ numerator / Σ denominator`, missing where the denominator vanishes.
    pub fn ratio(&self) -> (Vec<Option<C64>>, Vec<Option<f64>>) {
        let nt = self.sums[0].len();
        let mut vals = Vec::with_capacity(nt);
        let mut errs = Vec::with_capacity(nt);
        for t in 0..nt {
            let num: C64 = self.sums.iter().map(|b| b[t][0]).sum();
            let den: C64 = self.sums.iter().map(|b| b[t][1]).sum();
            if den.re == 0.0 {
                vals.push(None);
                errs.push(None);
                continue;
            }
            vals.push(Some(num / den.re));
            let ratios: Vec<C64> = self
                .sums
                .iter()
                .filter(|b| b[t][1].re != 0.0)
                .map(|b| b[t][0] / b[t][1].re)
                .collect();
            errs.push(spread(&ratios));
        }
        (vals, errs)
    }
}

pub(crate) fn series(
    ens: &Ensemble<'_>,
    (values, stderr): (Vec<Option<C64>>, Vec<Option<f64>>),
    descriptor: Descriptor,
) -> EstimateSeries {
    EstimateSeries {
        times: ens.times.clone(),
        values,
        stderr,
        n_traj: ens.len(),
        descriptor,
    }
}
