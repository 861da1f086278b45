use super::*;
use crate::linalg::hermiticity_residual;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_state() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.1, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(-0.1, 0.0)],
    )
}

#[test]
fn exact_correlations_conserve_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_hermitian(4, 0.7, &mut rng);
    assert!(hermiticity_residual(&h) < 1e-15);
    for &t in &[0.0, 0.4, 3.0] {
        for n in 0..4 {
            let total: C64 = (0..4).map(|k| electronic_exact(&h, t, (n, n, k, k)).unwrap()).sum();
            assert!((total - 1.0).norm() < 1e-12);
        }
    }
    for n in 0..4 {
        for k in 0..4 {
            let c = electronic_exact(&h, 0.0, (n, n, k, k)).unwrap();
            assert!((c.re - if n == k { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
    }
}

#[test]
fn exact_rejects_non_hermitian() {
    let mut h = two_state();
    h[(0, 1)] = C64::new(0.0, 1.0);
    assert!(electronic_exact(&h, 1.0, (0, 0, 1, 1)).is_err());
}

#[test]
fn frozen_estimators_match_exact_two_states() {
    let h = two_state();
    let times = [0.0, 1.0, 2.5, 4.0];
    for method in [Method::NafTw, Method::Naf] {
        for kind in CorrelationKind::ALL {
            let rows = frozen_check(&h, method, kind, &times, 20_000, 11).unwrap();
            for c in rows {
                assert!(c.sigmas < 4.0, "{} t={} {:?}", c.label, c.t, c);
            }
        }
    }
}

#[test]
fn frozen_estimators_match_exact_three_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_hermitian(3, 0.5, &mut rng);
    let times = [0.0, 1.5, 3.0];
    for method in [Method::NafTw, Method::Naf] {
        for kind in CorrelationKind::ALL {
            if method == Method::NafTw && kind == CorrelationKind::PopulationPopulation {
                continue;
            }
            for c in frozen_check(&h, method, kind, &times, 20_000, 12).unwrap() {
                assert!(c.sigmas < 4.0, "{} t={} {:?}", c.label, c.t, c);
            }
        }
    }
}

#[test]
fn population_estimator_is_exact_at_time_zero() {
    let h = two_state();
    let rows = frozen_check(&h, Method::NafTw, CorrelationKind::PopulationPopulation, &[0.0], 2_000, 1).unwrap();
    assert!(rows[0].abs_error < 1e-14);
}

#[test]
fn window_integrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for f in [2, 3] {
        let rep = mc_verify_window_integrals(f, 200_000, &mut rng).unwrap();
        for c in &rep.checks {
            assert!(c.pass, "{c:?}");
        }
    }
    assert!(mc_verify_window_integrals(1, 10, &mut rng).is_err());
}

#[test]
fn squeezed_window_agrees_with_triangle_window() {
    let h = two_state();
    let rep = mc_verify_sqz_equivalence(0.5, &h, &[0.0, 1.0, 3.0], 40_000, 21).unwrap();
    assert!(rep.max_sigma_between < 4.0, "{rep:?}");
    assert!(rep.max_sigma_exact < 4.0, "{rep:?}");
}

#[test]
fn combine_requires_parts() {
    assert!(combine_estimates(&[]).is_err());
}
