use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec, NuclearInit, Representation,
};
use crate::linalg::MatrixFamily;
use crate::units::EnergyUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TullyVariant {
    /// Single avoided crossing.
    Sac,
    /// Dual avoided crossing.
    Dac,
    /// Extended coupling with reflection.
    Ecr,
}

impl std::str::FromStr for TullyVariant {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sac" => Ok(TullyVariant::Sac),
            "dac" => Ok(TullyVariant::Dac),
            "ecr" => Ok(TullyVariant::Ecr),
            other => Err(crate::Error::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TullyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e0: f64,
}

impl TullyVariant {
    pub fn default_params(self) -> TullyParams {
        match self {
            TullyVariant::Sac => TullyParams { a: 0.01, b: 1.6, c: 0.005, d: 1.0, e0: 0.0 },
            TullyVariant::Dac => TullyParams { a: 0.1, b: 0.28, c: 0.015, d: 0.06, e0: 0.05 },
            TullyVariant::Ecr => TullyParams { a: 0.0, b: 0.9, c: 0.1, d: 0.0, e0: -0.0006 },
        }
    }

    /// Default starting position of the incoming wavepacket.
    pub fn default_r0(self) -> f64 {
        match self {
            TullyVariant::Sac => -3.8,
            TullyVariant::Dac => -10.0,
            TullyVariant::Ecr => -13.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TullyModel {
    pub variant: TullyVariant,
    pub params: TullyParams,
}

impl TullyModel {
    /// `(V11, V22, V12)` and their derivatives.
    fn elements(&self, x: f64) -> ([f64; 3], [f64; 3]) {
        let TullyParams { a, b, c, d, e0 } = self.params;
        match self.variant {
            TullyVariant::Sac => {
                let e = (-b * x.abs()).exp();
                let v11 = a * (1.0 - e) * x.signum();
                let g11 = a * b * e;
                let v12 = c * (-d * x * x).exp();
                ([v11, -v11, v12], [g11, -g11, -2.0 * d * x * v12])
            }
            TullyVariant::Dac => {
                let w = a * (-b * x * x).exp();
                let v12 = c * (-d * x * x).exp();
                ([0.0, -w + e0, v12], [0.0, 2.0 * b * x * w, -2.0 * d * x * v12])
            }
            TullyVariant::Ecr => {
                let (v12, g12) = if x < 0.0 {
                    let e = (b * x).exp();
                    (c * e, b * c * e)
                } else {
                    let e = (-b * x).exp();
                    (c * (2.0 - e), b * c * e)
                };
                ([e0, -e0, v12], [0.0, 0.0, g12])
            }
        }
    }
}

impl DiabaticPotential for TullyModel {
    fn n_states(&self) -> usize {
        2
    }

    fn n_dof(&self) -> usize {
        1
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let ([v11, v22, v12], _) = self.elements(r[0]);
        DMatrix::from_row_slice(2, 2, &[v11, v12, v12, v22])
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        let (_, [g11, g22, g12]) = self.elements(r[0]);
        out.block_mut(0).copy_from_slice(&[g11, g12, g12, g22]);
    }
}

/// Tully scattering model: mass 2000, Gaussian wavepacket (`α`, `R0`, `P0`) on the
/// adiabatic ground state.
pub fn build_tully(
    variant: TullyVariant,
    params: Option<TullyParams>,
    p0: f64,
    r0: Option<f64>,
    alpha: f64,
) -> ModelSpec {
    let params = params.unwrap_or_else(|| variant.default_params());
    let r0 = r0.unwrap_or_else(|| variant.default_r0());
    let record = serde_json::json!({
        "variant": variant, "params": params, "p0": p0, "r0": r0, "alpha": alpha, "mass": 2000.0,
    });
    ModelSpec {
        name: format!("tully-{}", serde_json::to_value(variant).unwrap().as_str().unwrap()),
        potential: Arc::new(TullyModel { variant, params }),
        masses: DVector::from_element(1, 2000.0),
        init: InitialCondition {
            electronic: ElectronicInit::Population(0),
            representation: Representation::Adiabatic,
            nuclear: NuclearInit::GaussianWavepacket {
                r0: vec![r0],
                p0: vec![p0],
                alpha: vec![alpha],
            },
        },
        params: record,
        units: EnergyUnit::Hartree,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{gradient_error, symmetry_error};
    use super::*;

    fn model(v: TullyVariant) -> TullyModel {
        TullyModel { variant: v, params: v.default_params() }
    }

    #[test]
    fn sac_limits() {
        let m = model(TullyVariant::Sac);
        assert_eq!(m.potential(&[0.0])[(0, 0)], 0.0);
        assert!((m.potential(&[50.0])[(0, 0)] - 0.01).abs() < 1e-15);
        assert!((m.potential(&[-50.0])[(0, 0)] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn ecr_coupling_continuous_at_origin() {
        let m = model(TullyVariant::Ecr);
        assert_eq!(m.potential(&[0.0])[(0, 1)], 0.1);
        assert!((m.potential(&[-1e-12])[(0, 1)] - 0.1).abs() < 1e-12);
        assert!((m.potential(&[60.0])[(0, 1)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dac_upper_diagonal_at_origin() {
        let m = model(TullyVariant::Dac);
        assert!((m.potential(&[0.0])[(1, 1)] + 0.05).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for v in [TullyVariant::Sac, TullyVariant::Dac, TullyVariant::Ecr] {
            let m = model(v);
            assert!(gradient_error(&m, 100, 10.0, 11) < 1e-6, "{v:?}");
            assert!(symmetry_error(&m, 10.0, 12) < 1e-12);
        }
    }

    #[test]
    fn unknown_variant() {
        assert!("xyz".parse::<TullyVariant>().is_err());
        assert_eq!("ECR".parse::<TullyVariant>().unwrap(), TullyVariant::Ecr);
    }
}
