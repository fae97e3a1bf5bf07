#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use robust_classo::Problem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// CN(0, 1) draw.
pub fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((n, p), |_| cn(rng))
}

/// Random unit-column design, sparse truth with `k` nonzeros, CN(0, noise^2)
/// errors.
pub fn sparse_problem(seed: u64, n: usize, p: usize, k: usize, noise: f64) -> Problem {
    let mut r = rng(seed);
    let m = gaussian_matrix(&mut r, n, p);
    let (unit, _) = Problem::normalized(m, Array1::zeros(n)).unwrap();
    let mut s = Array1::<Complex64>::zeros(p);
    for j in 0..k.min(p) {
        s[(j * 7 + seed as usize) % p] =
            Complex64::from_polar(1.0 + j as f64, 0.9 * j as f64 + 0.3);
    }
    let y = unit.matrix().dot(&s) + Array1::from_shape_fn(n, |_| cn(&mut r) * noise);
    unit.with_observation(y).unwrap()
}

/// Columns of a random unitary matrix (modified Gram-Schmidt).
pub fn unitary(seed: u64, n: usize) -> Array2<Complex64> {
    let mut r = rng(seed);
    let mut q = gaussian_matrix(&mut r, n, n);
    for j in 0..n {
        for i in 0..j {
            let proj: Complex64 = (0..n).map(|t| q[[t, i]].conj() * q[[t, j]]).sum();
            for t in 0..n {
                let v = q[[t, i]];
                q[[t, j]] -= proj * v;
            }
        }
        let norm = (0..n).map(|t| q[[t, j]].norm_sqr()).sum::<f64>().sqrt();
        for t in 0..n {
            q[[t, j]] /= norm;
        }
    }
    q
}

pub fn max_abs_diff(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
