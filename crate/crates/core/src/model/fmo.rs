use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    BathDiscretization, DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec,
    NuclearInit, Representation,
};
use crate::linalg::MatrixFamily;
use crate::sampling::InverseTemperature;
use crate::units::{cm_to_hartree, EnergyUnit};

const FMO_CM: [[f64; 7]; 7] = [
    [12410.0, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9],
    [-87.7, 12530.0, 30.8, 8.2, 0.7, 11.8, 4.3],
    [5.5, 30.8, 12210.0, -53.5, -2.2, -9.6, 6.0],
    [-5.9, 8.2, -53.5, 12320.0, -70.7, -17.0, -63.3],
    [6.7, 0.7, -2.2, -70.7, 12480.0, 81.1, -1.3],
    [-13.7, 11.8, -9.6, -17.0, 81.1, 12630.0, 39.7],
    [-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 12440.0],
];

/// Seven-site FMO system Hamiltonian in cm⁻¹.
pub fn fmo_system_hamiltonian_cm() -> DMatrix<f64> {
    DMatrix::from_fn(7, 7, |i, j| FMO_CM[i][j])
}

/// Site-exciton model: each site couples to its own copy of the bath.
///
/// Coordinate `n * Nb + j` is mode `j` of the bath on site `n`.
#[derive(Debug, Clone)]
pub struct FmoModel {
    pub system: DMatrix<f64>,
    pub bath: BathDiscretization,
}

impl DiabaticPotential for FmoModel {
    fn n_states(&self) -> usize {
        self.system.nrows()
    }

    fn n_dof(&self) -> usize {
        self.system.nrows() * self.bath.len()
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let f = self.n_states();
        let nb = self.bath.len();
        let mut v = self.system.clone();
        let mut harm = 0.0;
        for n in 0..f {
            let mut s = 0.0;
            for j in 0..nb {
                let x = r[n * nb + j];
                let w = self.bath.omegas[j];
                s += self.bath.couplings[j] * x;
                harm += 0.5 * w * w * x * x;
            }
            v[(n, n)] += s;
        }
        for n in 0..f {
            v[(n, n)] += harm;
        }
        v
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        let f = self.n_states();
        let nb = self.bath.len();
        out.fill(0.0);
        for n in 0..f {
            for j in 0..nb {
                let idx = n * nb + j;
                let harm = self.bath.omegas[j].powi(2) * r[idx];
                for a in 0..f {
                    out.set(idx, a, a, harm);
                }
                out.add(idx, n, n, self.bath.couplings[j]);
            }
        }
    }
}

/// FMO monomer with the given per-site bath (atomic units) and initially excited `site`.
pub fn build_fmo(bath: BathDiscretization, beta: InverseTemperature, site: usize) -> ModelSpec {
    let system = fmo_system_hamiltonian_cm().map(cm_to_hartree);
    let nb = bath.len();
    let omegas: Vec<f64> = (0..7).flat_map(|_| bath.omegas.iter().copied()).collect();
    let params = serde_json::json!({
        "system_cm": FMO_CM, "n_modes_per_site": nb, "beta": beta,
    });
    ModelSpec {
        name: "fmo".into(),
        potential: Arc::new(FmoModel { system, bath }),
        masses: DVector::from_element(7 * nb, 1.0),
        init: InitialCondition {
            electronic: ElectronicInit::Population(site),
            representation: Representation::Diabatic,
            nuclear: NuclearInit::ThermalHarmonic { omegas, beta },
        },
        params,
        units: EnergyUnit::Wavenumber,
    }
}
