//! Oracle suites behind the `verify` subcommand.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::dvr::{dvr_propagate, gaussian_wavepacket, observables, DvrGrid, DvrHamiltonian};
use crate::exact::{frozen_check, mc_verify_sqz_equivalence, mc_verify_window_integrals, random_hermitian, CorrelationKind};
use crate::linalg::{hermitian_eigenvalues, CMatrix};
use crate::model::Representation;
use crate::propagation::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifySuite {
    Windows,
    Frozen,
    Sqz,
    DvrSanity,
}

impl VerifySuite {
    pub const ALL: [VerifySuite; 4] = [VerifySuite::Windows, VerifySuite::Frozen, VerifySuite::Sqz, VerifySuite::DvrSanity];

    pub fn label(self) -> &'static str {
        match self {
            VerifySuite::Windows => "windows",
            VerifySuite::Frozen => "frozen",
            VerifySuite::Sqz => "sqz",
            VerifySuite::DvrSanity => "dvr-sanity",
        }
    }

    fn default_samples(self) -> usize {
        match self {
            VerifySuite::Windows => 1_000_000,
            VerifySuite::Frozen | VerifySuite::Sqz => 100_000,
            VerifySuite::DvrSanity => 0,
        }
    }
}

impl std::str::FromStr for VerifySuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VerifySuite::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    /// Monte-Carlo samples; the suite default when absent.
    pub samples: Option<usize>,
    pub seed: u64,
}

/// One checked identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckLine {
    fn new(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let error = (value - target).abs();
        CheckLine { name: name.into(), value, target, error, tolerance, pass: error <= tolerance }
    }
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: value {:.6e} target {:.6e} |err| {:.3e} tol {:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target,
            self.error,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: VerifySuite,
    pub samples: usize,
    pub checks: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Random two-state Hamiltonian and its Rabi period.
pub fn rabi_case(seed: u64) -> (CMatrix, f64) {
    let h = random_hermitian(2, 0.5, &mut ChaCha8Rng::seed_from_u64(seed));
    let e = hermitian_eigenvalues(&h);
    (h, 2.0 * std::f64::consts::PI / (e[1] - e[0]))
}

/// `n + 1` equally spaced times on `[0, t_end]`.
pub fn time_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

fn windows(samples: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for f in [2, 3] {
        let rep = mc_verify_window_integrals(f, samples, &mut rng)?;
        for c in rep.checks {
            out.push(CheckLine::new(format!("F={f} {}", c.name), c.estimate, c.expected, 5.0 * c.stderr));
        }
    }
    Ok(out)
}

fn frozen(samples: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    for case in 0..5u64 {
        let (h, period) = rabi_case(seed + case);
        let rows = frozen_check(&h, Method::NafTw, CorrelationKind::PopulationPopulation, &time_grid(period, 10), samples, seed + 100 + case)?;
        let worst = rows.iter().max_by(|a, b| a.abs_error.total_cmp(&b.abs_error)).unwrap();
        let tol = (3.0 * worst.stderr).max(5e-3);
        out.push(CheckLine::new(format!("F=2 H#{case} population-population max |err|"), worst.abs_error, 0.0, tol));
    }
    for f in [2usize, 3] {
        let h = random_hermitian(f, 0.5, &mut ChaCha8Rng::seed_from_u64(seed + 10 + f as u64));
        let times = time_grid(6.0, 6);
        for method in [Method::NafTw, Method::Naf] {
            for kind in CorrelationKind::ALL {
                if method == Method::NafTw && kind == CorrelationKind::PopulationPopulation {
                    continue;
                }
                let rows = frozen_check(&h, method, kind, &times, samples, seed + 200)?;
                let worst = rows.iter().max_by(|a, b| a.sigmas.total_cmp(&b.sigmas)).unwrap();
                out.push(CheckLine::new(
                    format!("F={f} {} {:?} worst sigma (t={:.2})", method.label(), kind, worst.t),
                    worst.sigmas,
                    0.0,
                    3.0,
                ));
            }
        }
    }
    Ok(out)
}

fn sqz(samples: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    for case in 0..5u64 {
        let (h, period) = rabi_case(seed + case);
        let rep = mc_verify_sqz_equivalence(0.5, &h, &time_grid(period, 10), samples, seed + 300 + case)?;
        out.push(CheckLine::new(format!("H#{case} sqz vs TW worst sigma"), rep.max_sigma_between, 0.0, 3.0));
        out.push(CheckLine::new(format!("H#{case} sqz/TW vs exact worst sigma"), rep.max_sigma_exact, 0.0, 3.0));
    }
    Ok(out)
}

/// Harmonic ground energy, free Gaussian dispersion and norm conservation.
pub fn dvr_sanity() -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    let omega = 1.3;
    let grid = DvrGrid::new(-8.0, 8.0, 121, 1.0)?;
    let h = DvrHamiltonian::from_potential(grid, 1, |r| DMatrix::from_element(1, 1, 0.5 * omega * omega * r * r))?;
    let e = hermitian_eigenvalues(&h.dense());
    out.push(CheckLine::new("harmonic ground energy", e[0], 0.5 * omega, 1e-6));

    let (mass, alpha) = (2.0, 1.0);
    let grid = DvrGrid::new(-60.0, 60.0, 1201, mass)?;
    let free = DvrHamiltonian::from_potential(grid, 1, |_| DMatrix::zeros(1, 1))?;
    let psi0 = gaussian_wavepacket(&free, -5.0, 2.0, alpha, 0, Representation::Diabatic)?;
    let times = [0.0, 5.0, 10.0];
    let states = dvr_propagate(&free, &psi0, &times, 1e-12)?;
    let mut worst = 0.0f64;
    let mut norm_err = 0.0f64;
    for st in &states {
        let dr = free.grid.dr;
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, z) in st.psi.iter().enumerate() {
            let r = free.grid.point(i);
            m1 += r * z.norm_sqr() * dr;
            m2 += r * r * z.norm_sqr() * dr;
        }
        let expected = 1.0 / (2.0 * alpha) + st.t * st.t * (alpha / 2.0) / (mass * mass);
        worst = worst.max((m2 - m1 * m1 - expected).abs());
        norm_err = norm_err.max((free.norm(&st.psi) - 1.0).abs());
    }
    out.push(CheckLine::new("free Gaussian width^2 max |err|", worst, 0.0, 1e-6));

    let grid = DvrGrid::new(-10.0, 10.0, 201, 1.0)?;
    let two = DvrHamiltonian::from_potential(grid, 2, |r| {
        DMatrix::from_row_slice(2, 2, &[0.5 * r * r, 0.2, 0.2, 0.5 * (r - 1.0).powi(2)])
    })?;
    let psi0 = gaussian_wavepacket(&two, -1.0, 0.0, 1.0, 0, Representation::Diabatic)?;
    for st in dvr_propagate(&two, &psi0, &[1.0, 3.0, 6.0], 1e-10)? {
        norm_err = norm_err.max((observables(&two, &st).norm - 1.0).abs());
    }
    out.push(CheckLine::new("norm conservation max |err|", norm_err, 0.0, 1e-8));
    Ok(out)
}

/// Runs one oracle suite.
pub fn verify(suite: VerifySuite, opts: VerifyOptions) -> Result<VerifyReport> {
    let samples = opts.samples.unwrap_or(suite.default_samples());
    let checks = match suite {
        VerifySuite::Windows => windows(samples, opts.seed)?,
        VerifySuite::Frozen => frozen(samples, opts.seed)?,
        VerifySuite::Sqz => sqz(samples, opts.seed)?,
        VerifySuite::DvrSanity => dvr_sanity()?,
    };
    Ok(VerifyReport { suite, samples, checks })
}
