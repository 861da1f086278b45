//! Small dense linear-algebra helpers shared by the dynamics code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// A family of `n` real `f × f` matrices stored contiguously.
///
/// Used for diabatic gradients `∂V/∂R_J` and nonadiabatic couplings `d^J`,
/// where allocating one heap matrix per nuclear coordinate would dominate the
/// cost of a time step for large baths.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    f: usize,
    n: usize,
    data: Vec<f64>,
}

impl MatrixFamily {
    pub fn zeros(n: usize, f: usize) -> Self {
        MatrixFamily {
            f,
            n,
            data: vec![0.0; n * f * f],
        }
    }

    pub fn dim(&self) -> usize {
        self.f
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    #[inline]
    pub fn get(&self, j: usize, a: usize, b: usize) -> f64 {
        self.data[(j * self.f + a) * self.f + b]
    }

    #[inline]
    pub fn set(&mut self, j: usize, a: usize, b: usize, value: f64) {
        self.data[(j * self.f + a) * self.f + b] = value;
    }

    #[inline]
    pub fn add(&mut self, j: usize, a: usize, b: usize, value: f64) {
        self.data[(j * self.f + a) * self.f + b] += value;
    }

    /// Row-major view of block `j`.
    pub fn block(&self, j: usize) -> &[f64] {
        let s = self.f * self.f;
        &self.data[j * s..(j + 1) * s]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        let s = self.f * self.f;
        &mut self.data[j * s..(j + 1) * s]
    }

    /// Block `j` copied into an owned matrix.
    pub fn matrix(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.f, self.f, self.block(j))
    }

    pub fn set_matrix(&mut self, j: usize, m: &DMatrix<f64>) {
        let f = self.f;
        let blk = self.block_mut(j);
        for a in 0..f {
            for b in 0..f {
                blk[a * f + b] = m[(a, b)];
            }
        }
    }

    /// Replace every block `G` by `Tᵀ G T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> MatrixFamily {
        let f = self.f;
        let mut out = MatrixFamily::zeros(self.n, f);
        let mut tmp = vec![0.0; f * f];
        for j in 0..self.n {
            let g = self.block(j);
            // tmp = G T
            for a in 0..f {
                for b in 0..f {
                    let mut s = 0.0;
                    for c in 0..f {
                        s += g[a * f + c] * t[(c, b)];
                    }
                    tmp[a * f + b] = s;
                }
            }
            let o = out.block_mut(j);
            for a in 0..f {
                for b in 0..f {
                    let mut s = 0.0;
                    for c in 0..f {
                        s += t[(c, a)] * tmp[c * f + b];
                    }
                    o[a * f + b] = s;
                }
            }
        }
        out
    }
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
///
/// Returns `(E, T)` where the columns of `T` are the eigenvectors.
pub fn sym_eigen_sorted(v: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let f = v.nrows();
    if f == 1 {
        return (DVector::from_element(1, v[(0, 0)]), DMatrix::identity(1, 1));
    }
    if f == 2 {
        return sym_eigen_2x2(v[(0, 0)], v[(0, 1)], v[(1, 1)]);
    }
    let eig = SymmetricEigen::new(v.clone());
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e = DVector::from_iterator(f, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut t = DMatrix::zeros(f, f);
    for (col, &k) in order.iter().enumerate() {
        t.set_column(col, &eig.eigenvectors.column(k));
    }
    (e, t)
}

fn sym_eigen_2x2(a: f64, b: f64, d: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(b);
    let e = DVector::from_vec(vec![mean - r, mean + r]);
    if b == 0.0 {
        let t = if a <= d {
            DMatrix::identity(2, 2)
        } else {
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        };
        return (e, t);
    }
    // Rotation angle with cos 2θ = half/r, sin 2θ = b/r.
    let theta = 0.5 * b.atan2(half);
    let (s, c) = theta.sin_cos();
    // Upper state (c, s), lower state (-s, c).
    let t = DMatrix::from_row_slice(2, 2, &[-s, c, c, s]);
    (e, t)
}

/// `exp(-i dt H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, dt: f64) -> CMatrix {
    let f = h.nrows();
    match f {
        0 => CMatrix::zeros(0, 0),
        1 => CMatrix::from_element(1, 1, (-I * h[(0, 0)].re * dt).exp()),
        2 => expm_hermitian_2x2(h, dt),
        _ => {
            let eig = SymmetricEigen::new(h.clone());
            let phases = CVector::from_iterator(
                f,
                eig.eigenvalues.iter().map(|&e| (-I * e * dt).exp()),
            );
            let u = &eig.eigenvectors;
            let mut scaled = u.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col *= phases[k];
            }
            scaled * u.adjoint()
        }
    }
}

fn expm_hermitian_2x2(h: &CMatrix, dt: f64) -> CMatrix {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let m = 0.5 * (a + d);
    let z = 0.5 * (a - d);
    let w = (z * z + b.norm_sqr()).sqrt();
    let phase = (-I * m * dt).exp();
    let (s, c) = (w * dt).sin_cos();
    // sin(w dt)/w, well defined as w -> 0
    let sinc = if w * dt.abs() < 1e-8 {
        dt * (1.0 - (w * dt).powi(2) / 6.0)
    } else {
        s / w
    };
    let mut u = CMatrix::zeros(2, 2);
    u[(0, 0)] = phase * (c - I * sinc * z);
    u[(1, 1)] = phase * (c + I * sinc * z);
    u[(0, 1)] = phase * (-I * sinc * b);
    u[(1, 0)] = phase * (-I * sinc * b.conj());
    u
}

/// Largest absolute entry of `A - A†`.
pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            r = r.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    r
}

/// Largest absolute entry of `U U† - I`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let p = u * u.adjoint();
    let mut r: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            r = r.max((p[(i, j)] - target).norm());
        }
    }
    r
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_hermitian(f: usize, rng: &mut impl Rng) -> CMatrix {
        let mut h = CMatrix::zeros(f, f);
        for i in 0..f {
            h[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..f {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    fn series_expm(h: &CMatrix, dt: f64) -> CMatrix {
        // scaling and squaring with a Taylor core
        let f = h.nrows();
        let a = h.map(|z| -I * z * dt);
        let norm = a.iter().map(|z| z.norm()).sum::<f64>();
        let s = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let a = a / C64::new(2f64.powi(s), 0.0);
        let mut term = CMatrix::identity(f, f);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn eigen_sorted_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in 1..6 {
            let mut v = DMatrix::zeros(f, f);
            for i in 0..f {
                for j in i..f {
                    let x = rng.random_range(-1.0..1.0);
                    v[(i, j)] = x;
                    v[(j, i)] = x;
                }
            }
            let (e, t) = sym_eigen_sorted(&v);
            for k in 1..f {
                assert!(e[k] >= e[k - 1]);
            }
            let rec = &t * DMatrix::from_diagonal(&e) * t.transpose();
            assert!((rec - &v).amax() < 1e-12);
            assert!((t.transpose() * &t - DMatrix::identity(f, f)).amax() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let (e, t) = sym_eigen_sorted(&DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0]));
        assert!((e[0] + 0.3).abs() < 1e-15 && (e[1] - 0.3).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((t[(0, 0)].abs() - s).abs() < 1e-14);
        assert!((t[(0, 0)] * t[(1, 0)] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn expm_matches_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in 1..5 {
            for &dt in &[0.0, 0.01, 0.7, 3.0] {
                let h = random_hermitian(f, &mut rng);
                let u = expm_hermitian(&h, dt);
                let r = series_expm(&h, dt);
                assert!((u - r).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn expm_is_unitary(seed in 0u64..1000, f in 1usize..5, dt in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(f, &mut rng);
            prop_assert!(unitarity_residual(&expm_hermitian(&h, dt)) < 1e-12);
        }
    }

    #[test]
    fn congruence_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = 3;
        let mut fam = MatrixFamily::zeros(4, f);
        for j in 0..4 {
            for a in 0..f {
                for b in 0..f {
                    fam.set(j, a, b, rng.random_range(-1.0..1.0));
                }
            }
        }
        let t = DMatrix::from_fn(f, f, |_, _| rng.random_range(-1.0..1.0));
        let c = fam.congruence(&t);
        for j in 0..4 {
            let dense = t.transpose() * fam.matrix(j) * &t;
            assert!((c.matrix(j) - dense).amax() < 1e-14);
        }
    }
}
