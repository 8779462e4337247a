//! Seeded generators and weight initializers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Tensor;

pub type SeededRng = ChaCha8Rng;

/// Independent streams derived from one user seed, one per purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Noise = 3,
    Interpolation = 4,
    Synthesis = 5,
    Dataset = 6,
    FusionInit = 7,
    GeneratorInit = 8,
    CriticInit = 9,
    ClassifierInit = 10,
}

pub fn rng_for(seed: u64, stream: Stream) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Largest magnitude produced by [`glorot_uniform`] for a layer with the
/// given fan-in and fan-out: `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `rows x cols` weights drawn from `U(-l, l)` with `l = glorot_limit(cols, rows)`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let limit = glorot_limit(cols, rows);
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

pub fn normal_vec(n: usize, sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}
