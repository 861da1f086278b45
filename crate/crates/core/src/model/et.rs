use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    BathDiscretization, DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec,
    NuclearInit, Representation,
};
use crate::error::{param_err, Result};
use crate::linalg::MatrixFamily;
use crate::sampling::InverseTemperature;
use crate::units::EnergyUnit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtParams {
    /// Reaction-mode frequency Ω.
    pub omega: f64,
    /// Reorganization energy λ.
    pub lambda: f64,
    /// Diabatic coupling Δ.
    pub delta: f64,
}

impl Default for EtParams {
    fn default() -> Self {
        EtParams {
            omega: 3.5e-4,
            lambda: 2.39e-2,
            delta: 5e-5,
        }
    }
}

impl EtParams {
    /// `c_s = Ω √(λ/2)`
    pub fn c_s(&self) -> f64 {
        self.omega * (self.lambda / 2.0).sqrt()
    }
}

/// Donor/acceptor pair with a reaction coordinate (coordinate 0) that is
/// bilinearly coupled to a harmonic solvent (coordinates 1..=Nb).
#[derive(Debug, Clone)]
pub struct EtModel {
    pub eps: f64,
    pub params: EtParams,
    pub bath: BathDiscretization,
}

impl DiabaticPotential for EtModel {
    fn n_states(&self) -> usize {
        2
    }

    fn n_dof(&self) -> usize {
        1 + self.bath.len()
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let rs = r[0];
        let cs = self.params.c_s();
        let w = self.params.omega;
        let mut common = 0.5 * w * w * rs * rs;
        for (n, (&wn, &cn)) in self.bath.omegas.iter().zip(&self.bath.couplings).enumerate() {
            let y = r[n + 1] + cn * rs / (wn * wn);
            common += 0.5 * wn * wn * y * y;
        }
        let d = self.params.delta;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                0.5 * self.eps + common + cs * rs,
                d,
                d,
                -0.5 * self.eps + common - cs * rs,
            ],
        )
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        let rs = r[0];
        let cs = self.params.c_s();
        let w = self.params.omega;
        let mut gs = w * w * rs;
        for (n, (&wn, &cn)) in self.bath.omegas.iter().zip(&self.bath.couplings).enumerate() {
            let y = r[n + 1] + cn * rs / (wn * wn);
            gs += cn * y;
            let gn = wn * wn * y;
            out.block_mut(n + 1).copy_from_slice(&[gn, 0.0, 0.0, gn]);
        }
        out.block_mut(0).copy_from_slice(&[gs + cs, 0.0, 0.0, gs - cs]);
    }
}

/// Electron-transfer model prepared with the flux operator's coherence `|1⟩⟨2|`
/// and the reaction mode thermalized on the donor surface.
pub fn build_et_model(
    eps: f64,
    bath: BathDiscretization,
    params: EtParams,
    beta: InverseTemperature,
) -> Result<ModelSpec> {
    if !(params.omega > 0.0) || !(params.lambda > 0.0) {
        return param_err("ET model needs Omega > 0 and lambda > 0");
    }
    let record = serde_json::json!({
        "eps": eps, "omega": params.omega, "lambda": params.lambda, "delta": params.delta,
        "n_modes": bath.len(), "beta": beta,
    });
    let n = 1 + bath.len();
    Ok(ModelSpec {
        name: "electron-transfer".into(),
        masses: DVector::from_element(n, 1.0),
        init: InitialCondition {
            electronic: ElectronicInit::Coherence(0, 1),
            representation: Representation::Diabatic,
            nuclear: NuclearInit::ShiftedThermal {
                omega: params.omega,
                c_s: params.c_s(),
                beta,
                bath_omegas: bath.omegas.clone(),
            },
        },
        potential: Arc::new(EtModel { eps, params, bath }),
        params: record,
        units: EnergyUnit::Hartree,
    })
}
