use super::*;
use crate::frame::to_diabatic_vector;
use crate::linalg::{expm_hermitian, hermitian_eigenvalues, to_complex};
use crate::model::{build_tully, ConstantConfig, ModelConfig, TullyVariant};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn constant(h: &[f64], f: usize, omegas: Vec<f64>) -> ModelSpec {
    ModelConfig::Constant(ConstantConfig {
        h: h.chunks(f).map(|r| r.to_vec()).collect(),
        initial_state: 1,
        initial_coherence: None,
        omegas,
    })
    .build()
    .unwrap()
}

fn sac() -> ModelSpec {
    build_tully(TullyVariant::Sac, None, 15.0, None, 1.0)
}

fn run(model: &ModelSpec, opts: &MethodOptions, steps: usize, dt: f64, seed: u64) -> Vec<PhaseSpacePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, _) = initialize(model, opts, &mut rng).unwrap();
    let mut out = vec![s.clone()];
    for _ in 0..steps {
        step(&mut s, model, dt, opts, &mut rng).unwrap();
        out.push(s.clone());
    }
    out
}

#[test]
fn method_labels_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.label().parse::<Method>().unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, format!("\"{}\"", m.label()));
    }
    assert!("nope".parse::<Method>().is_err());
}

#[test]
fn dominant_state_examples() {
    let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(4.0 / 3.0, 0.0), C64::new(-1.0 / 3.0, 0.0)]));
    assert_eq!(dominant_state(&rho, 1), 0);
    let tie = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(0.5, 0.0); 3]));
    assert_eq!(dominant_state(&tie, 2), 2);
    let tie2 = CMatrix::from_diagonal(&CVector::from_vec(vec![
        C64::new(0.5, 0.0),
        C64::new(0.1, 0.0),
        C64::new(0.5, 0.0),
    ]));
    assert_eq!(dominant_state(&tie2, 1), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let h = crate::linalg::tests::random_hermitian(3, &mut rng);
        let brute = (0..3)
            .max_by(|&a, &b| h[(a, a)].re.partial_cmp(&h[(b, b)].re).unwrap())
            .unwrap();
        assert_eq!(dominant_state(&h, 0), brute);
    }
}

proptest! {
    #[test]
    fn perpendicular_force_is_orthogonal(
        f in proptest::collection::vec(-5.0..5.0f64, 3),
        p in proptest::collection::vec(-5.0..5.0f64, 3),
        m in proptest::collection::vec(0.1..10.0f64, 3),
    ) {
        let (f, p, m) = (DVector::from_vec(f), DVector::from_vec(p), DVector::from_vec(m));
        prop_assume!(p.norm() > 1e-3);
        let v = p.component_mul(&m);
        let out = perpendicular_nonadiabatic_force(&f, &p, &m);
        prop_assert!(out.dot(&v).abs() <= 1e-12 * (1.0 + f.norm() * v.norm()));
    }
}

#[test]
fn perpendicular_force_limits() {
    let m = DVector::from_vec(vec![1.0, 2.0]);
    let p = DVector::from_vec(vec![1.0, 0.5]);
    let v = p.component_mul(&m);
    assert!(perpendicular_nonadiabatic_force(&(v.clone() * 3.0), &p, &m).norm() < 1e-14);
    let perp = DVector::from_vec(vec![-v[1], v[0]]);
    assert!((perpendicular_nonadiabatic_force(&perp, &p, &m) - &perp).norm() < 1e-14);
    let zero = DVector::zeros(2);
    assert_eq!(perpendicular_nonadiabatic_force(&perp, &zero, &m), perp);
}

#[test]
fn zero_coupling_conserves_naf_energy() {
    let model = constant(&[0.0, 0.0, 0.0, 0.02], 2, vec![0.3]);
    for method in [Method::Naf, Method::NafTw, Method::NafTw2] {
        let traj = run(&model, &MethodOptions::new(method), 10_000, 0.05, 7);
        let inv = model.inverse_masses();
        let e0 = traj[0].h_naf(&inv);
        for s in &traj {
            assert!((s.h_naf(&inv) - e0).abs() <= 1e-8 * e0.abs().max(1.0));
        }
    }
}

#[test]
fn frozen_nuclei_follow_adiabatic_phases() {
    let h = [0.01, 0.004, -0.002, 0.004, -0.01, 0.003, -0.002, 0.003, 0.02];
    let model = constant(&h, 3, vec![]);
    let mut opts = MethodOptions::new(Method::NafTw2);
    opts.frozen_nuclei = true;
    let dt = 0.5;
    let traj = run(&model, &opts, 400, dt, 11);
    let g0 = traj[0].g.clone();
    let v = to_complex(&DMatrix::from_row_slice(3, 3, &h));
    let g0_dia = to_diabatic_vector(&g0, &traj[0].frame.t);
    for (i, s) in traj.iter().enumerate().step_by(50) {
        let t = i as f64 * dt;
        let expect = CVector::from_fn(3, |k, _| C64::from_polar(1.0, -s.frame.e[k] * t) * g0[k]);
        assert!((&s.g - expect).norm() < 1e-10);
        let dia = to_diabatic_vector(&s.g, &s.frame.t);
        assert!((dia - expm_hermitian(&v, t) * &g0_dia).norm() < 1e-10);
    }
}

#[test]
fn unitary_invariants_along_sac_trajectory() {
    let model = sac();
    for method in [Method::Naf, Method::NafTw2, Method::SqcTw2, Method::NafTw] {
        let traj = run(&model, &MethodOptions::new(method), 1000, 1.0, 3);
        let n0 = traj[0].g.norm_squared();
        let tr0 = traj[0].gamma.trace();
        let mut ev0 = hermitian_eigenvalues(&traj[0].gamma);
        ev0.sort_by(f64::total_cmp);
        let last = traj.last().unwrap();
        assert!((last.g.norm_squared() - n0).abs() < 1e-10, "{method}");
        assert!((last.gamma.trace() - tr0).norm() < 1e-10, "{method}");
        let mut ev = hermitian_eigenvalues(&last.gamma);
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&ev0) {
            assert!((a - b).abs() < 1e-10, "{method}");
        }
        if method == Method::NafTw {
            for s in &traj {
                assert!((s.quasi_density(method).unwrap().trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
            }
        }
        if method.is_naf() {
            let inv = model.inverse_masses();
            for s in &traj {
                assert!((s.h_naf(&inv) - s.e_ref).abs() < 1e-8);
            }
        }
    }
}

fn final_populations(model: &ModelSpec, opts: &MethodOptions, t: f64, dt: f64) -> (usize, Vec<f64>, f64) {
    let traj = run(model, opts, (t / dt).round() as usize, dt, 21);
    let s = traj.last().unwrap();
    (s.j_occ, s.g.iter().map(|z| z.norm_sqr()).collect(), s.r[0])
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn sac_time_step_convergence() {
    // Force switches land on step boundaries, so the scheme converges at first
    // order and needs a small step for this tolerance.
    let model = sac();
    let opts = MethodOptions::new(Method::NafTw);
    let (ja, pa, ra) = final_populations(&model, &opts, 1000.0, 0.005);
    let (jb, pb, rb) = final_populations(&model, &opts, 1000.0, 0.0025);
    assert_eq!(ja, jb);
    assert!(max_diff(&pa, &pb) < 1e-4, "{pa:?} {pb:?}");
    assert!((ra - rb).abs() < 1e-4 * ra.abs());
}

#[test]
fn ehrenfest_energy_drift_is_small() {
    let model = sac();
    let mut opts = MethodOptions::new(Method::Ehrenfest);
    opts.propagator = ElectronicPropagator::Midpoint;
    let traj = run(&model, &opts, 10_000, 0.1, 5);
    let inv = model.inverse_masses();
    let energy = |s: &PhaseSpacePoint| {
        let rho = s.quasi_density(Method::Ehrenfest).unwrap();
        kinetic_energy(&s.p, &inv) + (0..2).map(|k| rho[(k, k)].re * s.frame.e[k]).sum::<f64>()
    };
    let e0 = energy(&traj[0]);
    let drift = traj.iter().map(|s| (energy(s) - e0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-6 * e0.abs(), "drift {drift}");
}

#[test]
fn fssh_without_coupling_never_hops() {
    let model = constant(&[0.0, 0.0, 0.0, 0.01], 2, vec![0.3]);
    let opts = MethodOptions::new(Method::Fssh);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut s, _) = initialize(&model, &opts, &mut rng).unwrap();
    for _ in 0..2000 {
        let info = step(&mut s, &model, 0.1, &opts, &mut rng).unwrap();
        assert!(!info.hopped);
    }
}

#[test]
fn hop_probabilities_are_clamped() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let veff = crate::linalg::tests::random_hermitian(4, &mut rng) * C64::new(50.0, 0.0);
        let g = CVector::from_fn(4, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let p = hop_probabilities(&g, &veff, 1, 1.0);
        assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(p[1], 0.0);
    }
    let g = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let veff = CMatrix::identity(2, 2);
    assert_eq!(hop_probabilities(&g, &veff, 1, 1.0), vec![0.0, 0.0]);
}

#[test]
fn fssh_hop_rate_matches_population_flux() {
    // With a constant Hermitian coupling the net flux out of j equals
    // the decrease of ρ_jj over a short interval.
    let veff = CMatrix::from_row_slice(2, 2, &[
        C64::new(0.0, 0.0), C64::new(0.0, -0.2),
        C64::new(0.0, 0.2), C64::new(0.1, 0.0),
    ]);
    let g = CVector::from_vec(vec![C64::new(1.2, 0.3), C64::new(0.4, -0.5)]);
    let dt = 1e-5;
    let p = hop_probabilities(&g, &veff, 0, dt);
    let g2 = expm_hermitian(&veff, dt) * &g;
    let loss = 0.5 * (g[0].norm_sqr() - g2[0].norm_sqr()) / (0.5 * g[0].norm_sqr());
    assert!(loss > 0.0);
    assert!((p[1] - loss).abs() < 1e-3 * loss);
}

#[test]
fn trajectories_are_deterministic() {
    let model = sac();
    let opts = MethodOptions::new(Method::Fssh);
    let t_grid: Vec<f64> = (0..=20).map(|k| k as f64 * 50.0).collect();
    let go = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (s, d) = initialize(&model, &opts, &mut rng).unwrap();
        let rec = RecordOptions { nuclear: true, gamma: true };
        propagate_trajectory(0, s, d, &model, &opts, &t_grid, 1.0, rec, &mut rng).unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a, b);
    assert_eq!(a.snapshots.len(), t_grid.len());
}

#[test]
fn initial_snapshot_only() {
    let model = sac();
    let opts = MethodOptions::new(Method::NafTw);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (s, d) = initialize(&model, &opts, &mut rng).unwrap();
    let g0 = s.g.clone();
    let rec = propagate_trajectory(0, s, d, &model, &opts, &[0.0], 1.0, RecordOptions::default(), &mut rng).unwrap();
    assert_eq!(rec.snapshots.len(), 1);
    assert_eq!(rec.snapshots[0].g_adia, g0);
    assert!(rec.snapshots[0].r.is_none());
}

#[test]
fn sample_grid_validation() {
    assert_eq!(sample_steps(&[0.0, 1.0, 2.5], 0.5).unwrap(), vec![0, 2, 5]);
    assert!(sample_steps(&[0.0, 0.3], 0.5).is_err());
    assert!(sample_steps(&[1.0, 0.5], 0.5).is_err());
    assert!(sample_steps(&[0.0], 0.0).is_err());
}

#[test]
fn pure_state_methods_reject_coherences() {
    let model = constant(&[0.0, 0.1, 0.1, 0.0], 2, vec![]).with_init(crate::model::InitialCondition {
        electronic: crate::model::ElectronicInit::Coherence(0, 1),
        representation: Representation::Diabatic,
        nuclear: crate::model::NuclearInit::Fixed { r: vec![], p: vec![] },
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(initialize(&model, &MethodOptions::new(Method::Ehrenfest), &mut rng).is_err());
    assert!(initialize(&model, &MethodOptions::new(Method::NafTw), &mut rng).is_ok());
}

#[test]
fn impossible_rescale_halves_then_fails() {
    // A reference energy below the occupied surface cannot be restored.
    let model = constant(&[0.0, 0.0, 0.0, 0.02], 2, vec![0.3]);
    let opts = MethodOptions::new(Method::NafTw);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut s, _) = initialize(&model, &opts, &mut rng).unwrap();
    s.e_ref = s.frame.e[s.j_occ] - 1.0;
    let before = s.clone();
    let err = step(&mut s, &model, 0.1, &opts, &mut rng).unwrap_err();
    assert!(matches!(err, Error::RescaleImpossible { .. }));
    assert_eq!(s, before);
}



#[test]
fn turning_point_hold_keeps_nuclei_and_energy() {
    let model = constant(&[0.0, 0.01, 0.01, 0.02], 2, vec![0.3]);
    let opts = MethodOptions { turning_point: TurningPoint::Hold, ..MethodOptions::new(Method::NafTw) };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut s, _) = initialize(&model, &opts, &mut rng).unwrap();
    s.e_ref = s.frame.e[s.j_occ] - 1.0;
    let before = s.clone();
    let info = step(&mut s, &model, 0.1, &opts, &mut rng).unwrap();
    assert_eq!(info.holds, 1 << opts.max_halvings);
    assert_eq!(s.r, before.r);
    assert_eq!(s.p, before.p);
    assert!((s.t - before.t - 0.1).abs() < 1e-15);
    assert!((s.g.norm() - before.g.norm()).abs() < 1e-12);
    assert_ne!(s.g, before.g);
}
