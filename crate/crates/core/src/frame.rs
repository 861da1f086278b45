//! Adiabatic frames: eigen-decomposition of the diabatic potential with
//! sign-continuous eigenvectors, Hellmann–Feynman couplings and short-time
//! electronic propagators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, sym_eigen_sorted, to_complex, CMatrix, CVector, MatrixFamily, C64};
use crate::model::ModelSpec;

/// Default minimum adiabatic gap (hartree) before couplings are declared singular.
pub const DEFAULT_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticFrame {
    /// Ascending adiabatic energies.
    pub e: DVector<f64>,
    /// Columns are the adiabatic states in the diabatic basis.
    pub t: DMatrix<f64>,
    /// `d^J_mn = ⟨φ_m|∂_J φ_n⟩`, antisymmetric in `(m, n)`.
    pub d: MatrixFamily,
    /// `grad_e[(J, k)] = ∂E_k/∂R_J`
    pub grad_e: DMatrix<f64>,
}

impl AdiabaticFrame {
    pub fn n_states(&self) -> usize {
        self.e.len()
    }

    pub fn n_dof(&self) -> usize {
        self.d.len()
    }
}

/// Diagonalizes `v` and projects its gradients onto the adiabatic basis.
///
/// Eigenvector signs follow `prev` (or the identity when absent) so that
/// overlaps between corresponding columns are non-negative.
pub fn adiabatize(
    v: &DMatrix<f64>,
    grad: &MatrixFamily,
    prev: Option<&AdiabaticFrame>,
    gap_tol: f64,
) -> Result<AdiabaticFrame> {
    let f = v.nrows();
    let n = grad.len();
    let (e, mut t) = sym_eigen_sorted(v);
    for k in 0..f {
        let overlap = match prev {
            Some(p) => t.column(k).dot(&p.t.column(k)),
            None => t[(k, k)],
        };
        if overlap < 0.0 {
            t.column_mut(k).neg_mut();
        }
    }
    if n > 0 {
        for k in 1..f {
            let gap = e[k] - e[k - 1];
            if gap < gap_tol {
                return Err(Error::Degeneracy {
                    lower: k - 1,
                    upper: k,
                    gap,
                    r: Vec::new(),
                });
            }
        }
    }
    let gt = grad.congruence(&t);
    let mut d = MatrixFamily::zeros(n, f);
    let mut grad_e = DMatrix::zeros(n, f);
    for j in 0..n {
        for a in 0..f {
            grad_e[(j, a)] = gt.get(j, a, a);
            for b in 0..f {
                if a != b {
                    d.set(j, a, b, gt.get(j, a, b) / (e[b] - e[a]));
                }
            }
        }
    }
    Ok(AdiabaticFrame { e, t, d, grad_e })
}

/// Frame of `model` at `r`; degeneracy errors carry the offending coordinates.
pub fn frame_at(model: &ModelSpec, r: &[f64], prev: Option<&AdiabaticFrame>) -> Result<AdiabaticFrame> {
    let v = model.potential(r);
    let grad = model.gradient(r);
    adiabatize(&v, &grad, prev, DEFAULT_GAP_TOL).map_err(|err| match err {
        Error::Degeneracy { lower, upper, gap, .. } => Error::Degeneracy {
            lower,
            upper,
            gap,
            r: r.to_vec(),
        },
        other => other,
    })
}

/// `V^eff_nk = E_n δ_nk − i Σ_J (P_J/M_J) d^J_nk`
pub fn effective_potential(frame: &AdiabaticFrame, p: &DVector<f64>, inv_mass: &DVector<f64>) -> CMatrix {
    let f = frame.n_states();
    let mut coupling = DMatrix::<f64>::zeros(f, f);
    for j in 0..frame.n_dof() {
        let v = p[j] * inv_mass[j];
        if v == 0.0 {
            continue;
        }
        let blk = frame.d.block(j);
        for a in 0..f {
            for b in 0..f {
                coupling[(a, b)] += v * blk[a * f + b];
            }
        }
    }
    let mut veff = CMatrix::zeros(f, f);
    for a in 0..f {
        for b in 0..f {
            veff[(a, b)] = C64::new(0.0, -coupling[(a, b)]);
        }
        veff[(a, a)] += frame.e[a];
    }
    veff
}

/// `exp(−i dt V^eff)`
pub fn short_time_propagator(veff: &CMatrix, dt: f64) -> CMatrix {
    expm_hermitian(veff, dt)
}

/// `T_next† exp(−i dt V_next) T_cur`, an alternative adiabatic propagator built
/// from the diabatic potential at the end of the step.
pub fn diabatic_leg_propagator(
    t_next: &DMatrix<f64>,
    v_next: &DMatrix<f64>,
    t_cur: &DMatrix<f64>,
    dt: f64,
) -> CMatrix {
    let u = expm_hermitian(&to_complex(v_next), dt);
    to_complex(&t_next.transpose()) * u * to_complex(t_cur)
}

/// `g̃ = T† g`, `Γ̃ = T† Γ T`
pub fn to_adiabatic_initial(g: &CVector, gamma: &CMatrix, t: &DMatrix<f64>) -> (CVector, CMatrix) {
    let tc = to_complex(t);
    let tt = tc.transpose();
    (&tt * g, &tt * gamma * &tc)
}

/// Inverse of [`to_adiabatic_initial`] for the mapping vector: `g = T g̃`.
pub fn to_diabatic_vector(g: &CVector, t: &DMatrix<f64>) -> CVector {
    to_complex(t) * g
}

/// `Γ = T Γ̃ T†`
pub fn to_diabatic_matrix(a: &CMatrix, t: &DMatrix<f64>) -> CMatrix {
    let tc = to_complex(t);
    &tc * a * tc.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tests::random_hermitian;
    use crate::linalg::unitarity_residual;
    use crate::model::{build_tully, ModelConfig, TullyVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sac() -> ModelSpec {
        build_tully(TullyVariant::Sac, None, 10.0, None, 1.0)
    }

    #[test]
    fn off_diagonal_two_state() {
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2, 0.0]);
        let fr = adiabatize(&v, &MatrixFamily::zeros(0, 2), None, DEFAULT_GAP_TOL).unwrap();
        assert!((fr.e[0] + 0.2).abs() < 1e-15 && (fr.e[1] - 0.2).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((fr.t[(0, 0)] - s).abs() < 1e-14 && (fr.t[(1, 0)] + s).abs() < 1e-14);
        assert!((fr.t[(0, 1)] - s).abs() < 1e-14 && (fr.t[(1, 1)] - s).abs() < 1e-14);
    }

    #[test]
    fn frame_invariants_and_hellmann_feynman() {
        let model = ModelConfig::Lvcm(crate::model::LvcmConfig {
            units: crate::units::EnergyUnit::Hartree,
            energies: vec![-0.1, 0.0, 0.15],
            omegas: vec![0.05, 0.08],
            kappa: vec![vec![0.01, -0.02], vec![0.03, 0.0], vec![-0.02, 0.04]],
            couplings: vec![
                crate::model::CouplingEntry { states: [1, 2], values: vec![0.0, 0.02] },
                crate::model::CouplingEntry { states: [2, 3], values: vec![0.03, 0.01] },
            ],
            initial_state: 2,
        })
        .build()
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fr = frame_at(&model, &r, None).unwrap();
            let v = model.potential(&r);
            let f = 3;
            assert!((fr.t.transpose() * &fr.t - DMatrix::identity(f, f)).amax() < 1e-10);
            assert!((&fr.t * DMatrix::from_diagonal(&fr.e) * fr.t.transpose() - &v).amax() < 1e-10);
            let gt = model.gradient(&r).congruence(&fr.t);
            for j in 0..2 {
                for a in 0..f {
                    for b in 0..f {
                        assert!((fr.d.get(j, a, b) + fr.d.get(j, b, a)).abs() < 1e-10);
                        if a != b {
                            let hf = (fr.e[b] - fr.e[a]) * fr.d.get(j, a, b);
                            assert!((hf - gt.get(j, a, b)).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn decoupled_model_has_no_coupling() {
        let model = ModelConfig::Lvcm(crate::model::LvcmConfig {
            units: crate::units::EnergyUnit::Hartree,
            energies: vec![0.0, 0.3],
            omegas: vec![0.1],
            kappa: vec![vec![0.01], vec![-0.01]],
            couplings: vec![],
            initial_state: 1,
        })
        .build()
        .unwrap();
        let fr = frame_at(&model, &[0.7], None).unwrap();
        assert!(fr.d.block(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sac_coupling_matches_finite_difference() {
        let model = sac();
        let r0 = 0.3;
        let fr = frame_at(&model, &[r0], None).unwrap();
        let h = 1e-4;
        let plus = frame_at(&model, &[r0 + h], Some(&fr)).unwrap();
        let minus = frame_at(&model, &[r0 - h], Some(&fr)).unwrap();
        let dphi2 = (plus.t.column(1) - minus.t.column(1)) / (2.0 * h);
        let fd = fr.t.column(0).dot(&dphi2);
        assert!((fd - fr.d.get(0, 0, 1)).abs() < 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn degeneracy_reports_location() {
        let model = ModelConfig::Constant(crate::model::ConstantConfig {
            h: vec![vec![0.1, 0.0], vec![0.0, 0.1]],
            initial_state: 1,
            initial_coherence: None,
            omegas: vec![1.0],
        })
        .build()
        .unwrap();
        match frame_at(&model, &[0.3], None) {
            Err(Error::Degeneracy { r, .. }) => assert_eq!(r, vec![0.3]),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn sign_continuity_along_path() {
        let model = build_tully(TullyVariant::Ecr, None, 10.0, None, 1.0);
        let mut prev = frame_at(&model, &[-8.0], None).unwrap();
        let mut x = -8.0;
        while x < 8.0 {
            x += 0.05;
            let fr = frame_at(&model, &[x], Some(&prev)).unwrap();
            let overlap = prev.t.transpose() * &fr.t;
            for k in 0..2 {
                assert!(overlap[(k, k)] >= 0.0);
            }
            prev = fr;
        }
    }

    #[test]
    fn effective_potential_properties() {
        let model = sac();
        let fr = frame_at(&model, &[0.2], None).unwrap();
        let m = model.inverse_masses();
        let zero = effective_potential(&fr, &DVector::zeros(1), &m);
        assert!((zero - to_complex(&DMatrix::from_diagonal(&fr.e))).iter().all(|z| z.norm() == 0.0));
        let p = DVector::from_element(1, 15.0);
        let veff = effective_potential(&fr, &p, &m);
        assert!(crate::linalg::hermiticity_residual(&veff) < 1e-16);
        let expect = C64::new(0.0, -(15.0 / 2000.0) * fr.d.get(0, 0, 1));
        assert!((veff[(0, 1)] - expect).norm() < 1e-16);
    }

    #[test]
    fn propagators() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(3, &mut rng);
        assert!(unitarity_residual(&short_time_propagator(&h, 0.37)) < 1e-12);
        let id = short_time_propagator(&h, 0.0);
        assert!((id - CMatrix::identity(3, 3)).iter().all(|z| z.norm() < 1e-15));
        let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(0.3, 0.0), C64::new(-1.0, 0.0)]));
        let u = short_time_propagator(&diag, 2.0);
        assert!((u[(0, 0)] - C64::from_polar(1.0, -0.6)).norm() < 1e-15);
        assert!((u[(1, 1)] - C64::from_polar(1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn diabatic_leg_for_constant_potential() {
        let v = DMatrix::from_row_slice(2, 2, &[0.1, 0.05, 0.05, -0.2]);
        let fr = adiabatize(&v, &MatrixFamily::zeros(0, 2), None, DEFAULT_GAP_TOL).unwrap();
        let dt = 0.8;
        let leg = diabatic_leg_propagator(&fr.t, &v, &fr.t, dt);
        assert!(unitarity_residual(&leg) < 1e-12);
        let adia = short_time_propagator(&effective_potential(&fr, &DVector::zeros(0), &DVector::zeros(0)), dt);
        assert!((leg - adia).iter().all(|z| z.norm() < 1e-12));
        let id = DMatrix::identity(2, 2);
        let direct = expm_hermitian(&to_complex(&v), dt);
        assert!((diabatic_leg_propagator(&id, &v, &id, dt) - direct).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn adiabatic_initial_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = crate::mapping::sample_cps(3, 0.4, &mut rng).unwrap().g;
        let gam = crate::mapping::gamma_init(&g, 1);
        let (ga, gama) = to_adiabatic_initial(&g, &gam, &DMatrix::identity(3, 3));
        assert_eq!((ga.clone(), gama.clone()), (g.clone(), gam.clone()));
        let h = DMatrix::from_fn(3, 3, |a, b| ((a + 1) * (b + 1)) as f64 * 0.1 + if a == b { a as f64 } else { 0.0 });
        let (_, t) = sym_eigen_sorted(&h);
        let (ga, gama) = to_adiabatic_initial(&g, &gam, &t);
        assert!((ga.norm() - g.norm()).abs() < 1e-13);
        assert!((gama.trace() - gam.trace()).norm() < 1e-13);
        assert!((to_diabatic_vector(&ga, &t) - &g).norm() < 1e-13);
        assert!((to_diabatic_matrix(&gama, &t) - &gam).iter().all(|z| z.norm() < 1e-13));
    }
}
