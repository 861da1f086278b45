use super::*;
use crate::linalg::hermitian_eigenvalues;
use nalgebra::DMatrix;

fn free(grid: DvrGrid) -> DvrHamiltonian {
    DvrHamiltonian::from_potential(grid, 1, |_| DMatrix::zeros(1, 1)).unwrap()
}

fn width(h: &DvrHamiltonian, psi: &[C64]) -> f64 {
    let dr = h.grid.dr;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, z) in psi.iter().enumerate() {
        let r = h.grid.point(i);
        m1 += r * z.norm_sqr() * dr;
        m2 += r * r * z.norm_sqr() * dr;
    }
    m2 - m1 * m1
}

#[test]
fn bessel_sequence_matches_known_values() {
    let j = bessel_j_sequence(1.0, 3);
    assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
    assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
    assert!((j[2] - 0.114_903_484_931_900_5).abs() < 1e-14);
    let j = bessel_j_sequence(50.0, 80);
    assert!((j[0] - 0.055_812_327_669_251_86).abs() < 1e-12);
    assert!(j[80].abs() < 1e-8);
}

#[test]
fn fft_application_matches_dense_matrix() {
    let grid = DvrGrid::new(-4.0, 4.0, 40, 1.0).unwrap();
    let h = DvrHamiltonian::from_potential(grid, 2, |r| {
        DMatrix::from_row_slice(2, 2, &[0.5 * r * r, 0.1, 0.1, 0.5 * r * r + 0.3])
    })
    .unwrap();
    let psi: Vec<C64> = (0..h.dim()).map(|i| C64::new((i as f64).sin(), (0.3 * i as f64).cos())).collect();
    let mut out = vec![C64::new(0.0, 0.0); h.dim()];
    h.apply(&psi, &mut out);
    let dense = h.dense() * CVectorLike::from_vec(psi.clone());
    for i in 0..h.dim() {
        assert!((out[i] - dense[i]).norm() < 1e-10);
    }
}

type CVectorLike = nalgebra::DVector<C64>;

#[test]
fn harmonic_ground_state_energy() {
    let omega = 1.3;
    let grid = DvrGrid::new(-8.0, 8.0, 121, 1.0).unwrap();
    let h = DvrHamiltonian::from_potential(grid, 1, |r| DMatrix::from_element(1, 1, 0.5 * omega * omega * r * r)).unwrap();
    let e = hermitian_eigenvalues(&h.dense());
    assert!((e[0] - 0.5 * omega).abs() < 1e-6, "{}", e[0]);
    assert!((e[1] - 1.5 * omega).abs() < 1e-6, "{}", e[1]);
    assert!(h.e_min <= e[0] && e[e.len() - 1] <= h.e_max + 1e-9);
}

#[test]
fn free_gaussian_spreads_analytically() {
    let mass = 2.0;
    let grid = DvrGrid::new(-60.0, 60.0, 1201, mass).unwrap();
    let h = free(grid);
    let alpha = 1.0;
    let psi0 = gaussian_wavepacket(&h, -5.0, 2.0, alpha, 0, Representation::Diabatic).unwrap();
    let times = [0.0, 5.0, 12.0];
    let out = dvr_propagate(&h, &psi0, &times, 1e-12).unwrap();
    let s0 = 1.0 / (2.0 * alpha);
    for st in &out {
        let expected = s0 + st.t * st.t * (alpha / 2.0) / (mass * mass);
        assert!((width(&h, &st.psi) - expected).abs() < 1e-8, "t={}", st.t);
        assert!((h.norm(&st.psi) - 1.0).abs() < 1e-10);
        let mean: f64 = st.psi.iter().enumerate().map(|(i, z)| h.grid.point(i) * z.norm_sqr() * h.grid.dr).sum();
        assert!((mean - (-5.0 + 2.0 * st.t / mass)).abs() < 1e-8);
    }
}

#[test]
fn momentum_density_is_normalised_and_centred() {
    let grid = DvrGrid::new(-20.0, 20.0, 401, 1.0).unwrap();
    let h = free(grid);
    let st = gaussian_wavepacket(&h, 0.0, 3.0, 2.0, 0, Representation::Diabatic).unwrap();
    let (p, d) = momentum_distribution(&h, &st, false);
    let dp = p[1] - p[0];
    let total: f64 = d[0].iter().sum::<f64>() * dp;
    let mean: f64 = p.iter().zip(&d[0]).map(|(p, d)| p * d).sum::<f64>() * dp;
    assert!((total - 1.0).abs() < 1e-10);
    assert!((mean - 3.0).abs() < 1e-8);
    assert!(p.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn edge_density_triggers_domain_error() {
    let grid = DvrGrid::new(-10.0, 10.0, 201, 1.0).unwrap();
    let h = free(grid);
    let psi0 = gaussian_wavepacket(&h, 0.0, 2.0, 1.0, 0, Representation::Diabatic).unwrap();
    let err = dvr_propagate(&h, &psi0, &[1.0, 10.0], 1e-10).unwrap_err();
    assert!(matches!(err, Error::DomainTooSmall { .. }));
}

#[test]
fn coupled_states_conserve_norm_and_populations_sum() {
    let grid = DvrGrid::new(-10.0, 10.0, 201, 1.0).unwrap();
    let h = DvrHamiltonian::from_potential(grid, 2, |r| {
        DMatrix::from_row_slice(2, 2, &[0.5 * r * r, 0.2, 0.2, 0.5 * (r - 1.0).powi(2)])
    })
    .unwrap();
    let adia = gaussian_wavepacket(&h, -1.0, 0.0, 1.0, 0, Representation::Adiabatic).unwrap();
    assert!((observables(&h, &adia).adiabatic[0] - 1.0).abs() < 1e-12);
    let psi0 = gaussian_wavepacket(&h, -1.0, 0.0, 1.0, 0, Representation::Diabatic).unwrap();
    assert!((observables(&h, &psi0).diabatic[0] - 1.0).abs() < 1e-12);
    for st in dvr_propagate(&h, &psi0, &[2.0, 7.0], 1e-10).unwrap() {
        let o = observables(&h, &st);
        assert!((o.norm - 1.0).abs() < 1e-9);
        assert!((o.diabatic.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((o.adiabatic.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let tr: f64 = o.transmit.iter().chain(&o.reflect).sum();
        assert!((tr - 1.0).abs() < 1e-9);
    }
}

#[test]
fn grid_constructors_validate() {
    assert!(DvrGrid::new(0.0, 1.0, 8, 1.0).is_err());
    assert!(DvrGrid::new(1.0, 0.0, 64, 1.0).is_err());
    let g = DvrGrid::new(-1.0, 1.0, 65, 1.0).unwrap();
    assert!((g.refined().unwrap().dr - g.dr / 2.0).abs() < 1e-15);
    let e = g.enlarged(2.0).unwrap();
    assert!((e.dr - g.dr).abs() < 1e-12 && (e.r_max - 2.0).abs() < 1e-12);
}

