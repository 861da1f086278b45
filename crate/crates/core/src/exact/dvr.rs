//! Sinc-DVR wavepacket dynamics for one-dimensional multi-state models.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_sorted, CMatrix, C64};
use crate::model::{ModelSpec, NuclearInit, Representation};

/// Uniform grid for one nuclear coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DvrGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
    pub dr: f64,
    pub mass: f64,
}

impl DvrGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize, mass: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::Parameter("DVR grid needs at least 16 points".into()));
        }
        if !(r_max > r_min) || !(mass > 0.0) {
            return Err(Error::Parameter("DVR grid needs r_max > r_min and a positive mass".into()));
        }
        Ok(DvrGrid { r_min, r_max, n, dr: (r_max - r_min) / (n - 1) as f64, mass })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Same domain scaled by `factor` about its centre with the spacing kept.
    pub fn enlarged(&self, factor: f64) -> Result<Self> {
        let c = 0.5 * (self.r_min + self.r_max);
        let half = 0.5 * (self.r_max - self.r_min) * factor;
        let n = ((2.0 * half / self.dr).round() as usize) + 1;
        DvrGrid::new(c - half, c + half, n, self.mass)
    }

    /// Same domain with the spacing halved.
    pub fn refined(&self) -> Result<Self> {
        DvrGrid::new(self.r_min, self.r_max, 2 * self.n - 1, self.mass)
    }
}

/// Diabatic components on the grid, stored point-major: `psi[i * F + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketState {
    pub psi: Vec<C64>,
    pub t: f64,
}

/// Matrix-free grid Hamiltonian: Colbert–Miller kinetic energy applied by FFT
/// convolution plus the pointwise diabatic potential.
pub struct DvrHamiltonian {
    pub grid: DvrGrid,
    pub f: usize,
    /// `V(R_i)` blocks, `v[(i * F + a) * F + b]`.
    v: Vec<f64>,
    /// Adiabatic eigenvectors at each point, same layout; columns are states.
    t: Vec<f64>,
    kernel_hat: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub e_min: f64,
    pub e_max: f64,
}

impl std::fmt::Debug for DvrHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DvrHamiltonian")
            .field("grid", &self.grid)
            .field("f", &self.f)
            .field("e_min", &self.e_min)
            .field("e_max", &self.e_max)
            .finish()
    }
}

/// Colbert–Miller kinetic matrix element `T_{i,i+k}`.
pub fn kinetic_element(k: usize, mass: f64, dr: f64) -> f64 {
    let pre = 1.0 / (2.0 * mass * dr * dr);
    if k == 0 {
        pre * std::f64::consts::PI.powi(2) / 3.0
    } else {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        pre * 2.0 * s / (k * k) as f64
    }
}

impl DvrHamiltonian {
    pub fn new(model: &ModelSpec, grid: DvrGrid) -> Result<Self> {
        if model.n_dof() != 1 {
            return Err(Error::Parameter(format!(
                "grid dynamics needs a one-dimensional model, {} has {} coordinates",
                model.name,
                model.n_dof()
            )));
        }
        let grid = DvrGrid { mass: model.masses[0], ..grid };
        Self::from_potential(grid, model.n_states(), |r| model.potential(&[r]))
    }

    pub fn from_potential(
        grid: DvrGrid,
        f: usize,
        potential: impl Fn(f64) -> nalgebra::DMatrix<f64>,
    ) -> Result<Self> {
        let n = grid.n;
        let mut v = vec![0.0; n * f * f];
        let mut t = vec![0.0; n * f * f];
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let vi = potential(grid.point(i));
            let (e, mut ti) = sym_eigen_sorted(&vi);
            if i > 0 {
                for k in 0..f {
                    let overlap: f64 = (0..f).map(|a| ti[(a, k)] * t[((i - 1) * f + a) * f + k]).sum();
                    if overlap < 0.0 {
                        ti.column_mut(k).neg_mut();
                    }
                }
            }
            vmin = vmin.min(e[0]);
            vmax = vmax.max(e[f - 1]);
            for a in 0..f {
                for b in 0..f {
                    v[(i * f + a) * f + b] = vi[(a, b)];
                    t[(i * f + a) * f + b] = ti[(a, b)];
                }
            }
        }
        let m = 2 * n;
        let mut c = vec![C64::new(0.0, 0.0); m];
        for k in 0..n {
            let tk = kinetic_element(k, grid.mass, grid.dr);
            c[k] = C64::new(tk, 0.0);
            if k > 0 {
                c[m - k] = C64::new(tk, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        fwd.process(&mut c);
        let tmax = std::f64::consts::PI.powi(2) / (2.0 * grid.mass * grid.dr * grid.dr);
        Ok(DvrHamiltonian {
            grid,
            f,
            v,
            t,
            kernel_hat: c,
            fwd,
            inv,
            e_min: vmin,
            e_max: vmax + tmax,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.n * self.f
    }

    /// `out = H psi`
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        let (n, f) = (self.grid.n, self.f);
        let m = 2 * n;
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let scale = 1.0 / m as f64;
        for a in 0..f {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for i in 0..n {
                buf[i] = psi[i * f + a];
            }
            self.fwd.process(&mut buf);
            for (z, k) in buf.iter_mut().zip(&self.kernel_hat) {
                *z *= k;
            }
            self.inv.process(&mut buf);
            for i in 0..n {
                out[i * f + a] = buf[i] * scale;
            }
        }
        for i in 0..n {
            for a in 0..f {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..f {
                    acc += psi[i * f + b] * self.v[(i * f + a) * f + b];
                }
                out[i * f + a] += acc;
            }
        }
    }

    /// Dense matrix in the same basis ordering; for small grids and tests.
    pub fn dense(&self) -> CMatrix {
        let (n, f) = (self.grid.n, self.f);
        let mut h = CMatrix::zeros(n * f, n * f);
        for i in 0..n {
            for j in 0..n {
                let tk = kinetic_element(i.abs_diff(j), self.grid.mass, self.grid.dr);
                for a in 0..f {
                    h[(i * f + a, j * f + a)] += tk;
                }
            }
            for a in 0..f {
                for b in 0..f {
                    h[(i * f + a, i * f + b)] += self.v[(i * f + a) * f + b];
                }
            }
        }
        h
    }

    /// Adiabatic components `T(R_i)ᵀ ψ_i`.
    pub fn to_adiabatic(&self, psi: &[C64]) -> Vec<C64> {
        let (n, f) = (self.grid.n, self.f);
        let mut out = vec![C64::new(0.0, 0.0); n * f];
        for i in 0..n {
            for k in 0..f {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..f {
                    acc += psi[i * f + a] * self.t[(i * f + a) * f + k];
                }
                out[i * f + k] = acc;
            }
        }
        out
    }

    /// Inverse of [`to_adiabatic`](Self::to_adiabatic).
    pub fn to_diabatic(&self, phi: &[C64]) -> Vec<C64> {
        let (n, f) = (self.grid.n, self.f);
        let mut out = vec![C64::new(0.0, 0.0); n * f];
        for i in 0..n {
            for a in 0..f {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..f {
                    acc += phi[i * f + k] * self.t[(i * f + a) * f + k];
                }
                out[i * f + a] = acc;
            }
        }
        out
    }

    pub fn norm(&self, psi: &[C64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dr
    }
}

/// Gaussian `exp(−α(R−R0)²/2 + iP0(R−R0))` on the model's initial electronic
/// state, normalised on the grid.
pub fn initial_wavepacket(h: &DvrHamiltonian, model: &ModelSpec) -> Result<WavepacketState> {
    let (r0, p0, alpha) = match &model.init.nuclear {
        NuclearInit::GaussianWavepacket { r0, p0, alpha } => (r0[0], p0[0], alpha[0]),
        _ => {
            return Err(Error::Parameter(
                "grid dynamics needs a Gaussian wavepacket initial condition".into(),
            ))
        }
    };
    let (j, jj) = model.init.electronic.pair();
    if j != jj {
        return Err(Error::Parameter("grid dynamics starts from a single electronic state".into()));
    }
    gaussian_wavepacket(h, r0, p0, alpha, j, model.init.representation)
}

pub fn gaussian_wavepacket(
    h: &DvrHamiltonian,
    r0: f64,
    p0: f64,
    alpha: f64,
    state: usize,
    representation: Representation,
) -> Result<WavepacketState> {
    let (n, f) = (h.grid.n, h.f);
    if state >= f {
        return Err(Error::Parameter(format!("state {} outside 1..={f}", state + 1)));
    }
    let mut phi = vec![C64::new(0.0, 0.0); n * f];
    for i in 0..n {
        let x = h.grid.point(i) - r0;
        phi[i * f + state] = C64::from_polar((-0.5 * alpha * x * x).exp(), p0 * x);
    }
    let mut psi = match representation {
        Representation::Diabatic => phi,
        Representation::Adiabatic => h.to_diabatic(&phi),
    };
    let norm = h.norm(&psi).sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    let p_max = p0.abs() + 5.0 * (alpha / 2.0).sqrt();
    let p_max = (p_max * p_max + 2.0 * h.grid.mass * (h.e_max_potential() - h.e_min)).sqrt();
    if p_max * h.grid.dr >= 0.8 * std::f64::consts::PI {
        return Err(Error::Parameter(format!(
            "grid spacing {} does not resolve momenta up to {p_max:.3}",
            h.grid.dr
        )));
    }
    Ok(WavepacketState { psi, t: 0.0 })
}

impl DvrHamiltonian {
    fn e_max_potential(&self) -> f64 {
        self.e_max - std::f64::consts::PI.powi(2) / (2.0 * self.grid.mass * self.grid.dr * self.grid.dr)
    }
}

/// `J_k(x)` for `k = 0..=kmax` by downward recurrence normalised with
/// `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max(x.abs().ceil() as usize) + 40 + (x.abs().sqrt() * 10.0) as usize;
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    vals.truncate(kmax + 1);
    vals.iter_mut().for_each(|v| *v /= norm);
    vals
}

/// Chebyshev propagator `exp(−iHτ)` applied to `psi` with truncation tolerance `tol`.
pub fn chebyshev_step(h: &DvrHamiltonian, psi: &[C64], tau: f64, tol: f64) -> Vec<C64> {
    let half = 0.55 * (h.e_max - h.e_min);
    let center = 0.5 * (h.e_max + h.e_min);
    let x = half * tau;
    let kmax = (x.abs() * 1.5) as usize + 60;
    let jk = bessel_j_sequence(x, kmax);
    let mut nterms = kmax;
    for k in ((x.abs() as usize)..=kmax).rev() {
        if jk[k].abs() > tol {
            nterms = (k + 2).min(kmax);
            break;
        }
    }
    let dim = psi.len();
    let apply_norm = |src: &[C64], out: &mut [C64]| {
        h.apply(src, out);
        for (o, s) in out.iter_mut().zip(src) {
            *o = (*o - s * center) / half;
        }
    };
    let mut prev = psi.to_vec();
    let mut cur = vec![C64::new(0.0, 0.0); dim];
    apply_norm(&prev, &mut cur);
    let mut acc: Vec<C64> = prev.iter().map(|z| z * jk[0]).collect();
    let mi = C64::new(0.0, -1.0);
    let c1 = mi * 2.0 * jk[1];
    for (a, z) in acc.iter_mut().zip(&cur) {
        *a += z * c1;
    }
    let mut next = vec![C64::new(0.0, 0.0); dim];
    let mut phase = mi;
    for k in 2..=nterms {
        apply_norm(&cur, &mut next);
        for i in 0..dim {
            next[i] = next[i] * 2.0 - prev[i];
        }
        phase *= mi;
        let ck = phase * 2.0 * jk[k];
        for (a, z) in acc.iter_mut().zip(&next) {
            *a += z * ck;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let global = C64::from_polar(1.0, -center * tau);
    acc.iter_mut().for_each(|z| *z *= global);
    acc
}

/// Integrated density within the outer 5% of the grid on either side.
pub fn edge_density(h: &DvrHamiltonian, psi: &[C64]) -> f64 {
    let (n, f) = (h.grid.n, h.f);
    let w = (n / 20).max(1);
    let sum = |range: std::ops::Range<usize>| -> f64 {
        range.map(|i| (0..f).map(|a| psi[i * f + a].norm_sqr()).sum::<f64>()).sum::<f64>() * h.grid.dr
    };
    sum(0..w).max(sum(n - w..n))
}

/// Propagates to each of `times` (ascending, from `psi0.t`). Fails when the
/// wavepacket reaches the grid edges.
pub fn dvr_propagate(
    h: &DvrHamiltonian,
    psi0: &WavepacketState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<WavepacketState>> {
    let tau_max = 100.0 / (0.55 * (h.e_max - h.e_min));
    let mut cur = psi0.clone();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < cur.t {
            return Err(Error::Parameter("DVR sample times must be ascending".into()));
        }
        let span = t - cur.t;
        let nsteps = (span / tau_max).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
        for _ in 0..nsteps {
            cur.psi = chebyshev_step(h, &cur.psi, span / nsteps as f64, tol);
        }
        cur.t = t;
        let edge = edge_density(h, &cur.psi);
        if edge > 1e-8 {
            return Err(Error::DomainTooSmall { t, edge_density: edge });
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Populations and channel probabilities of one wavepacket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DvrObservables {
    pub t: f64,
    pub norm: f64,
    pub diabatic: Vec<f64>,
    pub adiabatic: Vec<f64>,
    /// Adiabatic population at `R > 0`.
    pub transmit: Vec<f64>,
    /// Adiabatic population at `R < 0`.
    pub reflect: Vec<f64>,
}

pub fn observables(h: &DvrHamiltonian, state: &WavepacketState) -> DvrObservables {
    let (n, f) = (h.grid.n, h.f);
    let dr = h.grid.dr;
    let phi = h.to_adiabatic(&state.psi);
    let mut o = DvrObservables {
        t: state.t,
        norm: h.norm(&state.psi),
        diabatic: vec![0.0; f],
        adiabatic: vec![0.0; f],
        transmit: vec![0.0; f],
        reflect: vec![0.0; f],
    };
    for i in 0..n {
        let r = h.grid.point(i);
        for a in 0..f {
            o.diabatic[a] += state.psi[i * f + a].norm_sqr() * dr;
            let pa = phi[i * f + a].norm_sqr() * dr;
            o.adiabatic[a] += pa;
            if r > 0.0 {
                o.transmit[a] += pa;
            } else if r < 0.0 {
                o.reflect[a] += pa;
            } else {
                o.transmit[a] += 0.5 * pa;
                o.reflect[a] += 0.5 * pa;
            }
        }
    }
    o
}

/// Momentum density on the discrete Fourier grid, ascending in `p`, per state
/// (adiabatic when requested). The densities summed over states integrate to the norm.
pub fn momentum_distribution(h: &DvrHamiltonian, state: &WavepacketState, adiabatic: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, f) = (h.grid.n, h.f);
    let dr = h.grid.dr;
    let comps = if adiabatic { h.to_adiabatic(&state.psi) } else { state.psi.clone() };
    let fft = FftPlanner::new().plan_fft_forward(n);
    let dp = 2.0 * std::f64::consts::PI / (n as f64 * dr);
    let order: Vec<usize> = (0..n).map(|j| (j + n.div_ceil(2)) % n).collect();
    let p: Vec<f64> = order
        .iter()
        .map(|&j| if j < n.div_ceil(2) { j as f64 * dp } else { (j as f64 - n as f64) * dp })
        .collect();
    let mut dens = Vec::with_capacity(f);
    for a in 0..f {
        let mut buf: Vec<C64> = (0..n).map(|i| comps[i * f + a]).collect();
        fft.process(&mut buf);
        dens.push(order.iter().map(|&j| buf[j].norm_sqr() * dr * dr / (2.0 * std::f64::consts::PI)).collect());
    }
    (p, dens)
}

#[cfg(test)]
mod tests;
