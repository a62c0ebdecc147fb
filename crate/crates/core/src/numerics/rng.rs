use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Seedable, splittable generator used for initialization, dropout, shuffling
/// and synthetic data.
///
/// Algorithm: ChaCha8 seeded through `SeedableRng::seed_from_u64`. A child
/// stream is a fresh ChaCha8 whose 32-byte key is the next 32 bytes of the
/// parent stream, so splitting advances the parent by exactly 32 bytes.
#[derive(Debug, Clone)]
pub struct SplitRng(ChaCha8Rng);

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn split(&mut self) -> Self {
        let mut key = [0u8; 32];
        self.0.fill_bytes(&mut key);
        Self(ChaCha8Rng::from_seed(key))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.gen::<f64>()
    }
}

impl RngCore for SplitRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Fan-in and fan-out of a weight shape. For rank 3 (`taps × in × out`) the
/// taps multiply both fans.
fn fans(shape: &[usize]) -> Result<(usize, usize)> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "cannot initialize zero-extent shape {shape:?}"
        )));
    }
    Ok(match shape {
        [n] => (*n, 1),
        [i, o] => (*i, *o),
        [k, i, o] => (k * i, k * o),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unsupported init shape {shape:?}"
            )))
        }
    })
}

/// Uniform Xavier/Glorot initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init<T: Scalar>(shape: &[usize], rng: &mut SplitRng) -> Result<Tensor<T>> {
    let (fan_in, fan_out) = fans(shape)?;
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.uniform(-bound, bound))).collect();
    Tensor::new(shape, data)
}

/// Standard-normal tensor.
pub fn normal_tensor<T: Scalar>(shape: &[usize], rng: &mut SplitRng) -> Result<Tensor<T>> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.normal())).collect();
    Tensor::new(shape, data)
}
