use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec, NuclearInit, Representation,
};
use crate::error::{param_err, Result};
use crate::linalg::MatrixFamily;
use crate::units::EnergyUnit;

/// `V_ii(R) = D [1 - e^{-β(R - R_e)}]² + C`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseStateParams {
    pub d: f64,
    pub beta: f64,
    pub r_e: f64,
    pub c: f64,
}

/// `V_ij(R) = A e^{-α(R - R_c)²}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorsePairParams {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    pub alpha: f64,
    pub r_c: f64,
}

/// One-dimensional photodissociation model: Morse diagonals, Gaussian couplings.
#[derive(Debug, Clone)]
pub struct MorseModel {
    pub states: Vec<MorseStateParams>,
    pub pairs: Vec<MorsePairParams>,
}

impl DiabaticPotential for MorseModel {
    fn n_states(&self) -> usize {
        self.states.len()
    }

    fn n_dof(&self) -> usize {
        1
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let x = r[0];
        let f = self.n_states();
        let mut v = DMatrix::zeros(f, f);
        for (i, s) in self.states.iter().enumerate() {
            let u = 1.0 - (-s.beta * (x - s.r_e)).exp();
            v[(i, i)] = s.d * u * u + s.c;
        }
        for p in &self.pairs {
            let g = p.a * (-p.alpha * (x - p.r_c).powi(2)).exp();
            v[(p.i, p.j)] = g;
            v[(p.j, p.i)] = g;
        }
        v
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        let x = r[0];
        out.fill(0.0);
        for (i, s) in self.states.iter().enumerate() {
            let e = (-s.beta * (x - s.r_e)).exp();
            out.set(0, i, i, 2.0 * s.d * s.beta * (1.0 - e) * e);
        }
        for p in &self.pairs {
            let dx = x - p.r_c;
            let g = -2.0 * p.alpha * dx * p.a * (-p.alpha * dx * dx).exp();
            out.set(0, p.i, p.j, g);
            out.set(0, p.j, p.i, g);
        }
    }
}

/// Photodissociation model with a Gaussian wavepacket `ρ ∝ exp(-mω(R-R_e)² - P²/(mω))`
/// on diabatic state `initial`.
pub fn build_morse3(
    states: Vec<MorseStateParams>,
    pairs: Vec<MorsePairParams>,
    mass: f64,
    omega: f64,
    r_center: f64,
    initial: usize,
) -> Result<ModelSpec> {
    if states.is_empty() {
        return param_err("Morse model needs at least one state");
    }
    for s in &states {
        if !(s.d > 0.0) || !(s.beta > 0.0) {
            return param_err("Morse D and beta must be positive");
        }
    }
    let f = states.len();
    for p in &pairs {
        if p.i >= f || p.j >= f || p.i == p.j {
            return param_err(format!("invalid coupling pair ({}, {})", p.i + 1, p.j + 1));
        }
    }
    if !(mass > 0.0) || !(omega > 0.0) {
        return param_err("mass and omega must be positive");
    }
    let params = serde_json::json!({ "mass": mass, "omega": omega, "r_center": r_center });
    Ok(ModelSpec {
        name: "morse".into(),
        potential: Arc::new(MorseModel { states, pairs }),
        masses: DVector::from_element(1, mass),
        init: InitialCondition {
            electronic: ElectronicInit::Population(initial),
            representation: Representation::Diabatic,
            nuclear: NuclearInit::GaussianWavepacket {
                r0: vec![r_center],
                p0: vec![0.0],
                alpha: vec![mass * omega],
            },
        },
        params,
        units: EnergyUnit::Hartree,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testing::{gradient_error, symmetry_error};
    use super::*;

    fn example() -> MorseModel {
        let st = |d, beta, r_e, c| MorseStateParams { d, beta, r_e, c };
        MorseModel {
            states: vec![
                st(0.02, 0.4, 4.0, 0.02),
                st(0.01, 0.65, 4.5, 0.0),
                st(0.003, 0.65, 6.0, 0.02),
            ],
            pairs: vec![
                MorsePairParams { i: 0, j: 1, a: 0.005, alpha: 32.0, r_c: 3.34 },
                MorsePairParams { i: 0, j: 2, a: 0.005, alpha: 32.0, r_c: 4.97 },
            ],
        }
    }

    #[test]
    fn minimum_and_peak_values() {
        let m = example();
        let v = m.potential(&[4.0]);
        assert!((v[(0, 0)] - 0.02).abs() < 1e-15);
        let v = m.potential(&[3.34]);
        assert!((v[(0, 1)] - 0.005).abs() < 1e-15);
        assert_eq!(v[(1, 2)], 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = example();
        assert!(gradient_error(&m, 100, 8.0, 9) < 1e-6);
        assert!(symmetry_error(&m, 8.0, 10) < 1e-12);
    }

    #[test]
    fn wigner_width_from_mass_and_frequency() {
        let m = example();
        let spec = build_morse3(m.states, m.pairs, 20000.0, 0.005, 2.9, 0).unwrap();
        match spec.init.nuclear {
            NuclearInit::GaussianWavepacket { ref alpha, .. } => assert_eq!(alpha[0], 100.0),
            _ => panic!("expected a Gaussian wavepacket"),
        }
    }
}
