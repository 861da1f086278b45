use nalgebra::DMatrix;

use super::DiabaticPotential;
use crate::linalg::MatrixFamily;

/// Single-state harmonic (or, with `omega = 0`, free) particle in one dimension.
#[derive(Debug, Clone)]
pub struct HarmonicModel {
    pub mass: f64,
    pub omega: f64,
    pub center: f64,
}

impl DiabaticPotential for HarmonicModel {
    fn n_states(&self) -> usize {
        1
    }

    fn n_dof(&self) -> usize {
        1
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let x = r[0] - self.center;
        DMatrix::from_element(1, 1, 0.5 * self.mass * self.omega * self.omega * x * x)
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        out.set(0, 0, 0, self.mass * self.omega * self.omega * (r[0] - self.center));
    }
}

/// Coordinate-independent electronic Hamiltonian, optionally with inert harmonic nuclei.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    pub h: DMatrix<f64>,
    pub omegas: Vec<f64>,
}

impl DiabaticPotential for ConstantModel {
    fn n_states(&self) -> usize {
        self.h.nrows()
    }

    fn n_dof(&self) -> usize {
        self.omegas.len()
    }

    fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let harm: f64 = self.omegas.iter().zip(r).map(|(w, x)| 0.5 * w * w * x * x).sum();
        &self.h + DMatrix::identity(self.h.nrows(), self.h.nrows()) * harm
    }

    fn gradient(&self, r: &[f64], out: &mut MatrixFamily) {
        out.fill(0.0);
        for (j, (w, x)) in self.omegas.iter().zip(r).enumerate() {
            for a in 0..self.h.nrows() {
                out.set(j, a, a, w * w * x);
            }
        }
    }
}
