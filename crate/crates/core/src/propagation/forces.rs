use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::frame::AdiabaticFrame;
use crate::linalg::CMatrix;

/// `f_J = −Σ_{k≠l} (E_k − E_l) d^J_lk ρ_kl`
pub fn nonadiabatic_force(frame: &AdiabaticFrame, rho: &CMatrix) -> Result<DVector<f64>> {
    let f = frame.n_states();
    let n = frame.n_dof();
    let mut out = DVector::zeros(n);
    let mut worst = 0.0f64;
    for j in 0..n {
        let blk = frame.d.block(j);
        let (mut re, mut im) = (0.0, 0.0);
        for l in 0..f {
            for k in 0..f {
                if k == l {
                    continue;
                }
                let c = (frame.e[k] - frame.e[l]) * blk[l * f + k];
                re -= c * rho[(k, l)].re;
                im -= c * rho[(k, l)].im;
            }
        }
        out[j] = re;
        worst = worst.max(im.abs() / re.abs().max(1.0));
    }
    if worst > 1e-10 {
        return Err(Error::Consistency(format!(
            "nonadiabatic force has imaginary residual {worst:.3e}"
        )));
    }
    Ok(out)
}

/// `f − (f·Ṙ / Ṙ·Ṙ) Ṙ` with `Ṙ = M⁻¹P`.
pub fn perpendicular_nonadiabatic_force(
    f: &DVector<f64>,
    p: &DVector<f64>,
    inv_mass: &DVector<f64>,
) -> DVector<f64> {
    let v = p.component_mul(inv_mass);
    let vv = v.dot(&v);
    if vv.sqrt() < 1e-14 {
        log::warn!("velocity vanishes; nonadiabatic force left unprojected");
        return f.clone();
    }
    f - &v * (f.dot(&v) / vv)
}

/// Adiabatic force on `j` plus the nonadiabatic force.
pub fn naf_force(
    frame: &AdiabaticFrame,
    rho: &CMatrix,
    j: usize,
    p: &DVector<f64>,
    inv_mass: &DVector<f64>,
    perpendicular: bool,
) -> Result<DVector<f64>> {
    let mut fnad = nonadiabatic_force(frame, rho)?;
    if perpendicular {
        fnad = perpendicular_nonadiabatic_force(&fnad, p, inv_mass);
    }
    Ok(fnad - frame.grad_e.column(j))
}

/// Population-weighted adiabatic force plus the nonadiabatic force.
pub fn meanfield_force(frame: &AdiabaticFrame, rho: &CMatrix) -> Result<DVector<f64>> {
    let mut out = nonadiabatic_force(frame, rho)?;
    for k in 0..frame.n_states() {
        out.axpy(-rho[(k, k)].re, &frame.grad_e.column(k), 1.0);
    }
    Ok(out)
}

/// Index of the largest diagonal of `rho`. Ties keep `current` when it is
/// among the maxima and otherwise resolve to the lowest index.
pub fn dominant_state(rho: &CMatrix, current: usize) -> usize {
    let f = rho.nrows();
    let max = (0..f).map(|k| rho[(k, k)].re).fold(f64::NEG_INFINITY, f64::max);
    if current < f && rho[(current, current)].re == max {
        return current;
    }
    (0..f).find(|&k| rho[(k, k)].re == max).unwrap_or(0)
}
