use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    BathDiscretization, DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec,
    NuclearInit, Representation,
};
use crate::linalg::MatrixFamily;
use crate::sampling::InverseTemperature;
use crate::units::EnergyUnit;

/// Two-level system bilinearly coupled to a harmonic bath (unit masses).
#[derive(Debug, Clone)]
pub struct SpinBosonModel {
    pub eps: f64,
    pub delta: f64,
    pub bath: BathDiscretization,
}

impl DiabaticPotential for SpinBosonModel {
    fn n_states(&self) -> usize {
        2
    }

    fn n_dof(&self) -> usize {
        self.bath.len()
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let mut s = 0.0;
        let mut h = 0.0;
        for ((&w, &c), &x) in self.bath.omegas.iter().zip(&self.bath.couplings).zip(r) {
            s += c * x;
            h += 0.5 * w * w * x * x;
        }
        DMatrix::from_row_slice(
            2,
            2,
            &[self.eps + s + h, self.delta, self.delta, -self.eps - s + h],
        )
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        for (j, ((&w, &c), &x)) in self
            .bath
            .omegas
            .iter()
            .zip(&self.bath.couplings)
            .zip(r)
            .enumerate()
        {
            let blk = out.block_mut(j);
            let harm = w * w * x;
            blk[0] = c + harm;
            blk[1] = 0.0;
            blk[2] = 0.0;
            blk[3] = -c + harm;
        }
    }
}

/// Spin-boson model with state 1 initially occupied and a thermal bath.
pub fn build_spin_boson(
    eps: f64,
    delta: f64,
    bath: BathDiscretization,
    beta: InverseTemperature,
) -> ModelSpec {
    let n = bath.len();
    let params = serde_json::json!({
        "eps": eps, "delta": delta, "n_modes": n, "beta": beta,
    });
    let init = InitialCondition {
        electronic: ElectronicInit::Population(0),
        representation: Representation::Diabatic,
        nuclear: NuclearInit::ThermalHarmonic {
            omegas: bath.omegas.clone(),
            beta,
        },
    };
    ModelSpec {
        name: "spin-boson".into(),
        potential: Arc::new(SpinBosonModel { eps, delta, bath }),
        masses: DVector::from_element(n, 1.0),
        init,
        params,
        units: EnergyUnit::Hartree,
    }
}
