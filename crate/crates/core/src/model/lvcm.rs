use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    DiabaticPotential, ElectronicInit, InitialCondition, ModelSpec, NuclearInit, Representation,
};
use crate::error::{Error, Result};
use crate::linalg::MatrixFamily;
use crate::units::EnergyUnit;

/// Linear vibronic coupling model in dimensionless normal modes.
///
/// `kappa[(n, k)]` couples mode `k` to the diagonal of state `n`;
/// `lambda[k]` is the symmetric off-diagonal coupling matrix of mode `k`.
#[derive(Debug, Clone)]
pub struct LvcmModel {
    pub energies: Vec<f64>,
    pub omegas: Vec<f64>,
    pub kappa: DMatrix<f64>,
    pub lambda: Vec<DMatrix<f64>>,
}

impl LvcmModel {
    pub fn new(
        energies: Vec<f64>,
        omegas: Vec<f64>,
        kappa: DMatrix<f64>,
        lambda: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let (f, n) = (energies.len(), omegas.len());
        if f == 0 || n == 0 {
            return Err(Error::Shape("LVCM needs at least one state and one mode".into()));
        }
        if kappa.nrows() != f || kappa.ncols() != n {
            return Err(Error::Shape(format!(
                "kappa is {}x{}, expected {f}x{n}",
                kappa.nrows(),
                kappa.ncols()
            )));
        }
        if lambda.len() != n {
            return Err(Error::Shape(format!(
                "{} off-diagonal coupling blocks for {n} modes",
                lambda.len()
            )));
        }
        for (k, l) in lambda.iter().enumerate() {
            if l.nrows() != f || l.ncols() != f {
                return Err(Error::Shape(format!("lambda block {k} is not {f}x{f}")));
            }
            if (l - l.transpose()).amax() > 0.0 {
                return Err(Error::Shape(format!("lambda block {k} is not symmetric")));
            }
            if (0..f).any(|a| l[(a, a)] != 0.0) {
                return Err(Error::Shape(format!("lambda block {k} has a nonzero diagonal")));
            }
        }
        if omegas.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Parameter("LVCM frequencies must be positive".into()));
        }
        Ok(LvcmModel {
            energies,
            omegas,
            kappa,
            lambda,
        })
    }
}

impl DiabaticPotential for LvcmModel {
    fn n_states(&self) -> usize {
        self.energies.len()
    }

    fn n_dof(&self) -> usize {
        self.omegas.len()
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let f = self.n_states();
        let mut v = DMatrix::zeros(f, f);
        let harm: f64 = self
            .omegas
            .iter()
            .zip(r)
            .map(|(w, x)| 0.5 * w * x * x)
            .sum();
        for (k, &x) in r.iter().enumerate() {
            v += &self.lambda[k] * x;
        }
        for n in 0..f {
            let lin: f64 = (0..r.len()).map(|k| self.kappa[(n, k)] * r[k]).sum();
            v[(n, n)] += harm + self.energies[n] + lin;
        }
        v
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        let f = self.n_states();
        for (k, &x) in r.iter().enumerate() {
            out.set_matrix(k, &self.lambda[k]);
            for n in 0..f {
                out.add(k, n, n, self.omegas[k] * x + self.kappa[(n, k)]);
            }
        }
    }
}

/// LVCM with the vibronic ground state and diabatic state `initial` occupied.
///
/// Masses are `1/ω_k` so that the kinetic energy is `Σ ω_k P_k²/2`.
pub fn build_lvcm(model: LvcmModel, initial: usize, name: &str, units: EnergyUnit) -> ModelSpec {
    let n = model.n_dof();
    let masses = DVector::from_iterator(n, model.omegas.iter().map(|w| 1.0 / w));
    let params = serde_json::json!({
        "energies": model.energies, "omegas": model.omegas,
    });
    ModelSpec {
        name: name.to_string(),
        potential: Arc::new(model),
        masses,
        init: InitialCondition {
            electronic: ElectronicInit::Population(initial),
            representation: Representation::Diabatic,
            nuclear: NuclearInit::LvcmGround { n },
        },
        params,
        units,
    }
}
