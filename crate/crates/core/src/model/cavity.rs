use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec, NuclearInit, Representation,
};
use crate::error::{param_err, Result};
use crate::linalg::MatrixFamily;
use crate::sampling::InverseTemperature;
use crate::units::{EnergyUnit, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Multi-level atom coupled to the standing-wave modes of a 1-D cavity.
#[derive(Debug, Clone)]
pub struct CavityModel {
    pub levels: Vec<f64>,
    pub dipoles: DMatrix<f64>,
    pub omegas: Vec<f64>,
    /// `ω_j λ_j(r0)`
    pub couplings: Vec<f64>,
}

impl DiabaticPotential for CavityModel {
    fn n_states(&self) -> usize {
        self.levels.len()
    }

    fn n_dof(&self) -> usize {
        self.omegas.len()
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let mut field = 0.0;
        let mut harm = 0.0;
        for ((&w, &g), &x) in self.omegas.iter().zip(&self.couplings).zip(r) {
            field += g * x;
            harm += 0.5 * w * w * x * x;
        }
        let mut v = &self.dipoles * field;
        for (n, &e) in self.levels.iter().enumerate() {
            v[(n, n)] += e + harm;
        }
        v
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        let f = self.n_states();
        for (j, ((&w, &g), &x)) in self.omegas.iter().zip(&self.couplings).zip(r).enumerate() {
            let blk = out.block_mut(j);
            for a in 0..f {
                for b in 0..f {
                    blk[a * f + b] = g * self.dipoles[(a, b)];
                }
                blk[a * f + a] += w * w * x;
            }
        }
    }
}

impl CavityModel {
    /// Mode `j` (1-based) has `ω_j = jπc/L` and `λ_j = √(2/(ε0 L)) sin(jπ r0/L)`.
    /// `dipoles` must be symmetric with zero diagonal.
    pub fn new(
        levels: Vec<f64>,
        dipoles: DMatrix<f64>,
        length: f64,
        r0: f64,
        n_modes: usize,
    ) -> Result<Self> {
        let f = levels.len();
        if f < 2 || dipoles.nrows() != f || dipoles.ncols() != f {
            return param_err("cavity needs at least two levels and an F x F dipole matrix");
        }
        if (&dipoles - dipoles.transpose()).amax() > 0.0 || (0..f).any(|n| dipoles[(n, n)] != 0.0)
        {
            return param_err("dipole matrix must be symmetric with zero diagonal");
        }
        if !(length > 0.0) || !(r0 > 0.0 && r0 < length) || n_modes == 0 {
            return param_err("cavity needs L > 0, 0 < r0 < L and at least one mode");
        }
        let omegas: Vec<f64> = (1..=n_modes)
            .map(|j| j as f64 * PI * SPEED_OF_LIGHT / length)
            .collect();
        let amp = (2.0 / (VACUUM_PERMITTIVITY * length)).sqrt();
        let couplings = omegas
            .iter()
            .enumerate()
            .map(|(i, w)| w * amp * ((i + 1) as f64 * PI * r0 / length).sin())
            .collect();
        Ok(CavityModel {
            levels,
            dipoles,
            omegas,
            couplings,
        })
    }
}

/// Atom-in-cavity model with the highest level occupied and the field in the vacuum.
pub fn build_cavity(
    levels: Vec<f64>,
    dipoles: DMatrix<f64>,
    length: f64,
    r0: f64,
    n_modes: usize,
) -> Result<ModelSpec> {
    let params = serde_json::json!({
        "levels": levels, "length": length, "r0": r0, "n_modes": n_modes,
        "dipoles": dipoles.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    let model = CavityModel::new(levels, dipoles, length, r0, n_modes)?;
    let f = model.levels.len();
    Ok(ModelSpec {
        name: if f == 2 { "cavity-2level" } else { "cavity" }.into(),
        masses: DVector::from_element(n_modes, 1.0),
        init: InitialCondition {
            electronic: ElectronicInit::Population(f - 1),
            representation: Representation::Diabatic,
            nuclear: NuclearInit::ThermalHarmonic {
                omegas: model.omegas.clone(),
                beta: InverseTemperature::Vacuum,
            },
        },
        potential: Arc::new(model),
        params,
        units: EnergyUnit::Hartree,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testing::{gradient_error, symmetry_error};
    use super::*;

    fn three_level_dipoles() -> DMatrix<f64> {
        let mut mu = DMatrix::zeros(3, 3);
        mu[(0, 1)] = -1.034;
        mu[(1, 0)] = -1.034;
        mu[(1, 2)] = -2.536;
        mu[(2, 1)] = -2.536;
        mu
    }

    fn three_level_reference(n_modes: usize) -> CavityModel {
        let levels = vec![-0.6738, -0.2798, -0.1547];
        CavityModel::new(levels, three_level_dipoles(), 236200.0, 118100.0, n_modes).unwrap()
    }

    #[test]
    fn even_modes_decouple_at_centre() {
        let model = three_level_reference(400);
        for (i, g) in model.couplings.iter().enumerate() {
            if (i + 1) % 2 == 0 {
                assert!(g.abs() < 1e-12 * model.omegas[i]);
            } else {
                assert!(g.abs() > 0.0);
            }
        }
    }

    #[test]
    fn highest_level_starts_occupied() {
        let levels = vec![-0.6738, -0.2798, -0.1547];
        let spec = build_cavity(levels, three_level_dipoles(), 236200.0, 118100.0, 10).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.init.electronic, ElectronicInit::Population(2));
    }

    #[test]
    fn first_mode_frequency() {
        let model = three_level_reference(4);
        assert!((model.omegas[0] - PI * 137.036 / 236200.0).abs() < 1e-18);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = three_level_reference(6);
        assert!(gradient_error(&model, 100, 50.0, 5) < 1e-6);
        assert!(symmetry_error(&model, 50.0, 6) < 1e-12);
    }

    #[test]
    fn rejects_atom_outside_cavity() {
        let mu = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(build_cavity(vec![0.0, 1.0], mu, 10.0, 11.0, 3).is_err());
    }
}
