use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{param_err, Result};

/// Discrete harmonic bath: frequencies `omegas[j]` with bilinear couplings `couplings[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathDiscretization {
    pub omegas: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl BathDiscretization {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Reorganization energy `Σ c_j² / (2ω_j²)` of the discretized bath.
    pub fn reorganization(&self) -> f64 {
        self.omegas
            .iter()
            .zip(&self.couplings)
            .map(|(w, c)| 0.5 * c * c / (w * w))
            .sum()
    }
}

/// Ohmic spectral density `J(ω) = (π/2) α ω e^{-ω/ω_c}` discretized with
/// equal-reorganization bins.
pub fn discretize_ohmic(alpha: f64, omega_c: f64, nb: usize) -> Result<BathDiscretization> {
    if !(alpha > 0.0) || !(omega_c > 0.0) || nb == 0 {
        return param_err(format!(
            "ohmic bath needs alpha > 0, omega_c > 0, nb >= 1 (got {alpha}, {omega_c}, {nb})"
        ));
    }
    let n1 = (nb + 1) as f64;
    let scale = (alpha * omega_c / n1).sqrt();
    let omegas: Vec<f64> = (1..=nb)
        .map(|j| -omega_c * (1.0 - j as f64 / n1).ln())
        .collect();
    let couplings = omegas.iter().map(|w| w * scale).collect();
    Ok(BathDiscretization { omegas, couplings })
}

/// Debye spectral density `J(ω) = 2λ ω ω_c / (ω² + ω_c²)` discretized with
/// equal-reorganization bins. Frequencies come out in decreasing order.
pub fn discretize_debye(lambda: f64, omega_c: f64, nb: usize) -> Result<BathDiscretization> {
    if !(lambda > 0.0) || !(omega_c > 0.0) || nb == 0 {
        return param_err(format!(
            "debye bath needs lambda > 0, omega_c > 0, nb >= 1 (got {lambda}, {omega_c}, {nb})"
        ));
    }
    let n1 = (nb + 1) as f64;
    let scale = (2.0 * lambda / n1).sqrt();
    let omegas: Vec<f64> = (1..=nb)
        .map(|j| omega_c * (PI / 2.0 - PI * j as f64 / (2.0 * n1)).tan())
        .collect();
    let couplings = omegas.iter().map(|w| w * scale).collect();
    Ok(BathDiscretization { omegas, couplings })
}
