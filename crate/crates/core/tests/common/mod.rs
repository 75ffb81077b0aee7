#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rabi_core::hamiltonian::Generator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense constant Hamiltonian.
pub struct DenseGenerator {
    pub h: Vec<Vec<C64>>,
    pub diagonal: Option<Vec<f64>>,
}

impl DenseGenerator {
    pub fn new(h: Vec<Vec<C64>>, split_diagonal: bool) -> Self {
        let diagonal = split_diagonal.then(|| (0..h.len()).map(|i| h[i][i].re).collect());
        Self { h, diagonal }
    }
}

impl Generator for DenseGenerator {
    fn dim(&self) -> usize {
        self.h.len()
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) {
        for (row, o) in self.h.iter().zip(out.iter_mut()) {
            *o = row.iter().zip(psi).map(|(a, b)| a * b).sum();
        }
    }

    fn static_diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }
}

/// (A + A†)/2 with Re, Im of A uniform in [−1, 1].
pub fn random_hermitian(dim: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<C64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    (0..dim)
        .map(|i| (0..dim).map(|j| (a[i][j] + a[j][i].conj()) * 0.5).collect())
        .collect()
}

pub fn random_state(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// exp(−iHt) ψ0 via nalgebra's Padé matrix exponential.
pub fn expm_propagate(h: &[Vec<C64>], psi0: &[C64], t: f64) -> Vec<C64> {
    let n = h.len();
    let m = DMatrix::from_fn(n, n, |i, j| h[i][j] * C64::new(0.0, -t));
    let u = m.exp();
    let v = nalgebra::DVector::from_column_slice(psi0);
    (u * v).iter().copied().collect()
}

pub fn distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
