//! Electronic mapping variables on constraint phase space.
//!
//! A mapping state is stored as the complex vector `g = x + i p`; the actions
//! are `e_n = |g_n|²/2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

/// Commutator matrix `Γ` offsetting the mapping density, `ρ̃ = ½ g g† − Γ`.
pub type CommutatorMatrix = CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MappingState {
    pub g: CVector,
}

impl MappingState {
    pub fn new(g: CVector) -> Self {
        MappingState { g }
    }

    pub fn from_xp(x: &[f64], p: &[f64]) -> Self {
        MappingState {
            g: CVector::from_iterator(x.len(), x.iter().zip(p).map(|(&a, &b)| C64::new(a, b))),
        }
    }

    pub fn n_states(&self) -> usize {
        self.g.len()
    }

    pub fn x(&self) -> Vec<f64> {
        self.g.iter().map(|z| z.re).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.g.iter().map(|z| z.im).collect()
    }

    pub fn actions(&self) -> Vec<f64> {
        actions(&self.g)
    }
}

/// `e_n = |g_n|²/2`
pub fn actions(g: &CVector) -> Vec<f64> {
    g.iter().map(|z| 0.5 * z.norm_sqr()).collect()
}

/// Uniform point on the constraint sphere `Σ e_n = 1 + Fγ`.
pub fn sample_cps(f: usize, gamma: f64, rng: &mut impl Rng) -> Result<MappingState> {
    if f == 0 {
        return Err(Error::Parameter("need at least one state".into()));
    }
    let radius2 = 2.0 * (1.0 + f as f64 * gamma);
    if !(radius2 > 0.0) {
        return Err(Error::Parameter(format!(
            "gamma = {gamma} must exceed -1/F = {}",
            -1.0 / f as f64
        )));
    }
    loop {
        let raw: Vec<f64> = (0..2 * f).map(|_| rng.sample(StandardNormal)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-150 {
            continue;
        }
        let s = radius2.sqrt() / norm;
        let g = CVector::from_iterator(f, (0..f).map(|k| C64::new(raw[2 * k] * s, raw[2 * k + 1] * s)));
        debug_assert!(
            (actions(&g).iter().sum::<f64>() - 0.5 * radius2).abs() <= 1e-12 * radius2.max(1.0)
        );
        return Ok(MappingState { g });
    }
}

/// Triangle-window sample with state `j` occupied.
///
/// `ζ` has density `∝ 1 − ζ` (drawn by accepting pairs with `ζ + ζ₂ < 1`),
/// `e_j = 1 + ζ`, the other actions are uniform on `[0, 1 − ζ]`, angles uniform.
pub fn sample_tw(f: usize, j: usize, rng: &mut impl Rng) -> MappingState {
    assert!(j < f, "occupied state {j} out of range for F = {f}");
    let zeta = loop {
        let z: f64 = rng.random();
        let z2: f64 = rng.random();
        if z + z2 < 1.0 {
            break z;
        }
    };
    let mut g = CVector::zeros(f);
    for k in 0..f {
        let e = if k == j {
            1.0 + zeta
        } else {
            rng.random::<f64>() * (1.0 - zeta)
        };
        let theta = 2.0 * PI * rng.random::<f64>();
        g[k] = C64::from_polar((2.0 * e).sqrt(), theta);
    }
    MappingState { g }
}

/// Initial occupation window: `1 ≤ e_n ≤ 2` and `e_k + e_n ≤ 2` for `k ≠ n`.
pub fn window_point(e: &[f64], n: usize) -> bool {
    let en = e[n];
    (1.0..=2.0).contains(&en) && e.iter().enumerate().all(|(k, &ek)| k == n || ek + en <= 2.0)
}

fn bin_raw(e: &[f64], m: usize) -> bool {
    e[m] >= 1.0 && e.iter().enumerate().all(|(k, &ek)| k == m || ek <= 1.0)
}

/// Population bin at time `t`: `e_m ≥ 1` and `e_k ≤ 1` otherwise.
/// Boundary ties are attributed to the lowest index.
pub fn window_bin(e: &[f64], m: usize) -> bool {
    bin_raw(e, m) && !(0..m).any(|k| bin_raw(e, k))
}

/// The state whose bin contains `e`, if any.
pub fn bin_index(e: &[f64]) -> Option<usize> {
    (0..e.len()).find(|&m| bin_raw(e, m))
}

/// `K_lk = ½ (x_l + i p_l)(x_k − i p_k)`
pub fn kernel_cmm(g: &CVector, l: usize, k: usize) -> C64 {
    0.5 * g[l] * g[k].conj()
}

/// `Γ = diag(e_n − δ_{n j})`
pub fn gamma_init(g: &CVector, j: usize) -> CommutatorMatrix {
    let f = g.len();
    let e = actions(g);
    CMatrix::from_fn(f, f, |a, b| {
        if a == b {
            C64::new(e[a] - if a == j { 1.0 } else { 0.0 }, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `ρ̃ = (1 + F/3) g g†/tr(g g†) − I/3`
pub fn quasi_density_tw(g: &CVector) -> Result<CMatrix> {
    let f = g.len();
    let tr: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    if tr < 1e-300 {
        return Err(Error::DegenerateState(tr));
    }
    let scale = (1.0 + f as f64 / 3.0) / tr;
    let mut rho = g * g.adjoint() * C64::new(scale, 0.0);
    for a in 0..f {
        rho[(a, a)] -= C64::new(1.0 / 3.0, 0.0);
    }
    Ok(rho)
}

/// `ρ̃ = ½ g g† − Γ`
pub fn quasi_density_gamma(g: &CVector, gamma: &CommutatorMatrix) -> CMatrix {
    g * g.adjoint() * C64::new(0.5, 0.0) - gamma
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Window weight `2(F^F − 1)/(F·F!) · (2 − e_n)^{2−F}` that the triangle-window
/// sampler embeds implicitly.
pub fn weight_sqc(e_n: f64, f: usize) -> Result<f64> {
    if e_n >= 2.0 {
        return Err(Error::SingularWeight(e_n));
    }
    let ff = f as f64;
    let pre = 2.0 * (ff.powi(f as i32) - 1.0) / (ff * factorial(f));
    Ok(pre * (2.0 - e_n).powi(2 - f as i32))
}

/// Phase-space volume `(2π)^F (1+Fγ)^{F−1}/(F−1)!` of the constraint sphere.
pub fn cps_normalization(f: usize, gamma: f64) -> Result<f64> {
    let s = 1.0 + f as f64 * gamma;
    if f == 0 || !(s > 0.0) {
        return Err(Error::Parameter(format!("gamma = {gamma} out of range for F = {f}")));
    }
    Ok((2.0 * PI).powi(f as i32) * s.powi(f as i32 - 1) / factorial(f - 1))
}

/// `w(γ) = F²/(F^F − 1) (1+Fγ)^{F−1}` on `0 ≤ γ ≤ 1 − 1/F`.
pub fn gamma_weight(f: usize, gamma: f64) -> Result<f64> {
    let ff = f as f64;
    if f < 2 || !(0.0..=1.0 - 1.0 / ff).contains(&gamma) {
        return Err(Error::Domain(format!("gamma = {gamma} outside [0, 1 - 1/F] for F = {f}")));
    }
    Ok(ff * ff / (ff.powi(f as i32) - 1.0) * (1.0 + ff * gamma).powi(f as i32 - 1))
}

/// Initial CPS kernel `½ g_m g_n* − γ δ_mn`.
pub fn kernel_cps_initial(g: &CVector, m: usize, n: usize, gamma: f64) -> C64 {
    let mut k = kernel_cmm(g, m, n);
    if m == n {
        k -= gamma;
    }
    k
}

/// Time-`t` CPS kernel `(1+F)/(2(1+Fγ)²) g_l g_k* − (1−γ)/(1+Fγ) δ_lk`.
pub fn kernel_cps_final(g: &CVector, l: usize, k: usize, gamma: f64) -> C64 {
    let f = g.len() as f64;
    let s = 1.0 + f * gamma;
    let mut v = (1.0 + f) / (2.0 * s * s) * g[l] * g[k].conj();
    if l == k {
        v -= (1.0 - gamma) / s;
    }
    v
}

/// `₂F₁(1, 1; c; z) = Σ_k k!/(c)_k z^k` for `0 ≤ z < 1`.
pub fn hyp2f1_11(c: f64, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain(format!("hypergeometric series needs 0 <= z < 1, got {z}")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..10_000 {
        let kf = k as f64;
        term *= (kf + 1.0) / (c + kf) * z;
        sum += term;
        if term.abs() < 1e-14 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Domain(format!("hypergeometric series did not converge at z = {z}")))
}

/// Antiderivative `φ(λ; e)` of `2λ^{F−1}/((F−1)!(2 − λe)^{F−2})` with `φ(0) = 0`.
pub fn phi_sqz(lambda: f64, e: f64, f: usize) -> Result<f64> {
    let ff = f as f64;
    if f == 2 {
        return Ok(lambda * lambda);
    }
    let z = lambda * e / 2.0;
    let hyp = hyp2f1_11(ff + 1.0, z)? / factorial(f);
    let bracket = 2.0 * (ff - 2.0) * (ff - 1.0) * hyp + (6.0 - 2.0 * ff - lambda * e) / factorial(f - 1);
    Ok(lambda.powi(f as i32) * (2.0 - lambda * e).powf(1.0 - ff) * bracket)
}

/// Squeezed-window weight linking initial state `n` (actions `e0`) to final
/// state `m` (actions `et`) on a CPS with parameter `gamma`.
pub fn sqz_weight(e0: &[f64], et: &[f64], n: usize, m: usize, gamma: f64) -> Result<f64> {
    let f = e0.len();
    if et.len() != f {
        return Err(Error::Shape("action vectors differ in length".into()));
    }
    let dominant = |e: &[f64], i: usize| e.iter().enumerate().all(|(k, &v)| k == i || e[i] > v);
    if !dominant(e0, n) || !dominant(et, m) {
        return Ok(0.0);
    }
    let mut h2 = f64::INFINITY;
    for k in 0..f {
        if k != n {
            h2 = h2.min(2.0 / (e0[k] + e0[n]));
        }
        if k != m {
            h2 = h2.min(1.0 / et[k]);
        }
    }
    let h1 = (1.0 / e0[n]).max(1.0 / et[m]);
    if !(h1 < h2) {
        return Ok(0.0);
    }
    let z = phi_sqz(h2, e0[n], f)? - phi_sqz(h1, e0[n], f)?;
    let s = 1.0 + f as f64 * gamma;
    Ok(s.powi(f as i32) / f as f64 * z.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_residual;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cps_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in 1..6 {
            for &gamma in &[0.0, 0.5, 1.3] {
                let s = sample_cps(f, gamma, &mut rng).unwrap();
                let total: f64 = s.actions().iter().sum();
                assert!((total - (1.0 + f as f64 * gamma)).abs() < 1e-12);
            }
        }
        assert!(sample_cps(2, -0.5, &mut rng).is_err());
    }

    #[test]
    fn cps_mean_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (f, gamma, n) = (3, 0.5, 1_000_000);
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let e = sample_cps(f, gamma, &mut rng).unwrap().actions();
            for k in 0..f {
                mean[k] += e[k] / n as f64;
            }
        }
        for m in mean {
            assert!((m / (2.5 / 3.0) - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn tw_samples_lie_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in 2..6 {
            for _ in 0..10_000 {
                let j = rng.random_range(0..f);
                let s = sample_tw(f, j, &mut rng);
                assert!(window_point(&s.actions(), j));
                assert_eq!(bin_index(&s.actions()), Some(j));
            }
        }
    }

    #[test]
    fn window_examples() {
        assert!(window_point(&[1.5, 0.3], 0));
        assert!(!window_point(&[1.5, 0.6], 0));
        assert!(!window_point(&[0.9, 0.1], 0));
        assert!(window_bin(&[1.2, 0.8], 0));
        assert!(!window_bin(&[1.2, 1.1], 0));
        // tie: both actions exactly one
        assert!(window_bin(&[1.0, 1.0], 0));
        assert!(!window_bin(&[1.0, 1.0], 1));
        assert_eq!(bin_index(&[0.5, 0.5, 0.5]), None);
    }

    #[test]
    fn kernel_examples() {
        let s = MappingState::from_xp(&[2f64.sqrt(), 0.0], &[0.0, 0.0]);
        assert!((kernel_cmm(&s.g, 0, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let s = MappingState::from_xp(&[1.0, 1.0], &[0.0, 0.0]);
        assert!((kernel_cmm(&s.g, 0, 1) - C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gamma_init_examples() {
        let e = [1.4f64, 0.2];
        let g = CVector::from_iterator(2, e.iter().map(|&v| C64::new((2.0 * v).sqrt(), 0.0)));
        let gam = gamma_init(&g, 0);
        assert!((gam[(0, 0)].re - 0.4).abs() < 1e-14 && (gam[(1, 1)].re - 0.2).abs() < 1e-14);
        let rho = quasi_density_gamma(&g, &gam);
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-14 && rho[(1, 1)].re.abs() < 1e-14);
        assert!((rho[(0, 1)] - 0.5 * g[0] * g[1].conj()).norm() < 1e-15);
    }

    #[test]
    fn tw_density_example() {
        let g = CVector::from_vec(vec![C64::new(2f64.sqrt(), 0.0), C64::new(0.0, 0.0)]);
        let rho = quasi_density_tw(&g).unwrap();
        assert!((rho[(0, 0)].re - 4.0 / 3.0).abs() < 1e-15);
        assert!((rho[(1, 1)].re + 1.0 / 3.0).abs() < 1e-15);
        assert!(quasi_density_tw(&CVector::zeros(2)).is_err());
    }

    proptest! {
        #[test]
        fn tw_density_properties(seed in 0u64..10_000, f in 1usize..7, phase in 0.0f64..6.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_cps(f, 0.3, &mut rng).unwrap().g;
            let rho = quasi_density_tw(&g).unwrap();
            prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-14);
            prop_assert!(hermiticity_residual(&rho) < 1e-14);
            let rotated = quasi_density_tw(&(&g * C64::from_polar(1.0, phase))).unwrap();
            prop_assert!((rotated - rho).iter().all(|z| z.norm() < 1e-13));
        }

        #[test]
        fn kernel_hermiticity(seed in 0u64..10_000, f in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_cps(f, 0.5, &mut rng).unwrap().g;
            let e = actions(&g);
            for l in 0..f {
                prop_assert!((kernel_cmm(&g, l, l).re - e[l]).abs() < 1e-14);
                for k in 0..f {
                    prop_assert!((kernel_cmm(&g, l, k) - kernel_cmm(&g, k, l).conj()).norm() < 1e-15);
                }
            }
        }

        #[test]
        fn gamma_density_trace_at_start(seed in 0u64..10_000, f in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = (seed as usize) % f;
            let g = sample_tw(f, j, &mut rng).g;
            let gam = gamma_init(&g, j);
            let tr: f64 = actions(&g).iter().sum::<f64>() - 1.0;
            prop_assert!((gam.trace().re - tr).abs() < 1e-14);
            let rho = quasi_density_gamma(&g, &gam);
            prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-13);
            prop_assert!(hermiticity_residual(&rho) < 1e-14);
        }
    }

    #[test]
    fn cps_gamma_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = sample_cps(2, 0.5, &mut rng).unwrap().g;
        assert!((gamma_init(&g, 0).trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_sqc(0.3, 2).unwrap(), 1.5);
        assert_eq!(weight_sqc(1.9, 2).unwrap(), 1.5);
        assert!((weight_sqc(1.0, 3).unwrap() - 52.0 / 18.0).abs() < 1e-14);
        assert!(weight_sqc(2.0, 3).is_err());
    }

    #[test]
    fn normalization_examples() {
        let tp = 2.0 * PI;
        assert!((cps_normalization(1, 0.7).unwrap() - tp).abs() < 1e-12);
        assert!((cps_normalization(2, 0.0).unwrap() - tp * tp).abs() < 1e-12);
        assert!((cps_normalization(3, 1.0 / 3.0).unwrap() - tp.powi(3) * 2.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_weight_integrates_to_one() {
        assert!((gamma_weight(2, 0.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(gamma_weight(2, 0.6).is_err());
        for f in 2..=7 {
            let b = 1.0 - 1.0 / f as f64;
            let n = 2000;
            let h = b / n as f64;
            let mut s = gamma_weight(f, 0.0).unwrap() + gamma_weight(f, b).unwrap();
            for i in 1..n {
                let w = gamma_weight(f, i as f64 * h).unwrap();
                s += if i % 2 == 1 { 4.0 * w } else { 2.0 * w };
            }
            assert!((s * h / 3.0 - 1.0).abs() < 1e-10, "F = {f}");
        }
    }

    #[test]
    fn hypergeometric_small_cases() {
        // 2F1(1,1;2;z) = -ln(1-z)/z
        for &z in &[0.1, 0.5, 0.9] {
            let exact = -(1.0f64 - z).ln() / z;
            assert!((hyp2f1_11(2.0, z).unwrap() - exact).abs() < 1e-12);
        }
        assert!(hyp2f1_11(4.0, 1.0).is_err());
    }

    #[test]
    fn phi_two_states_is_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let lambda = rng.random_range(0.0..1.5);
            let e = rng.random_range(0.0..1.3);
            assert!((phi_sqz(lambda, e, 2).unwrap() - lambda * lambda).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_is_antiderivative() {
        // dφ/dλ = 2λ^{F-1}/((F-1)!(2-λe)^{F-2}), φ(0) = 0
        for f in 3..=6 {
            let fact: f64 = (1..f).map(|k| k as f64).product();
            assert!(phi_sqz(0.0, 1.2, f).unwrap().abs() < 1e-15);
            for &(lambda, e) in &[(0.6, 1.2), (0.8, 1.5), (0.5, 1.9), (1.0, 1.1)] {
                let h = 1e-5;
                let fd = (phi_sqz(lambda + h, e, f).unwrap() - phi_sqz(lambda - h, e, f).unwrap())
                    / (2.0 * h);
                let exact = 2.0 * lambda.powi(f as i32 - 1)
                    / (fact * (2.0 - lambda * e).powi(f as i32 - 2));
                assert!((fd - exact).abs() < 1e-7 * exact.abs().max(1.0), "F={f} λ={lambda}");
            }
        }
    }

    #[test]
    fn sqz_two_state_closed_form() {
        let s2 = 2f64.sqrt();
        let gamma = (s2 - 1.0) / 2.0;
        // min e = 1 with 1 + Fγ = √2 gives weight 1
        let w = sqz_weight(&[1.2, s2 - 1.2], &[1.0, s2 - 1.0], 0, 0, gamma).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let gamma = rng.random_range(0.0..1.0);
            let a = sample_cps(2, gamma, &mut rng).unwrap().actions();
            let b = sample_cps(2, gamma, &mut rng).unwrap().actions();
            let (n, m) = (rng.random_range(0..2), rng.random_range(0..2));
            let w = sqz_weight(&a, &b, n, m, gamma).unwrap();
            let s = 1.0 + 2.0 * gamma;
            let dom = a[n] > a[1 - n] && b[m] > b[1 - m];
            let closed = if dom {
                (2.0 - s * s / (2.0 * a[n].min(b[m]).powi(2))).max(0.0)
            } else {
                0.0
            };
            assert!((w - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn sqz_requires_dominant_initial_state() {
        assert_eq!(sqz_weight(&[0.4, 1.6], &[1.6, 0.4], 0, 0, 0.5).unwrap(), 0.0);
    }
}
