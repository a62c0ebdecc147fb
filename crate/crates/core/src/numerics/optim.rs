use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moments and step counter for AdamW over a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct OptimState<T> {
    pub config: AdamWConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> OptimState<T> {
    pub fn new<'a>(config: AdamWConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<_> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let second = first.clone();
        Self {
            config,
            first,
            second,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &Tensor<T> {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &Tensor<T> {
        &self.second[i]
    }
}

/// One AdamW update with decoupled weight decay and bias-corrected moments:
///
/// ```text
/// θ ← θ · (1 − lr·wd)
/// m ← β1·m + (1 − β1)·g
/// v ← β2·v + (1 − β2)·g²
/// θ ← θ − lr · (m / (1 − β1ᵗ)) / (sqrt(v / (1 − β2ᵗ)) + ε)
/// ```
pub fn adamw_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut OptimState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::InvalidArgument(format!(
            "adamw: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.shape() != g.shape() {
            return Err(Error::shape("adamw", p.shape(), g.shape()));
        }
        if p.shape() != m.shape() {
            return Err(Error::shape("adamw", p.shape(), m.shape()));
        }
    }

    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let lr = T::of(c.lr);
    let decay = T::one() - T::of(c.lr * c.weight_decay);
    let b1 = T::of(c.beta1);
    let b2 = T::of(c.beta2);
    let one_b1 = T::of(1.0 - c.beta1);
    let one_b2 = T::of(1.0 - c.beta2);
    let bc1 = T::of(1.0 - c.beta1.powi(t));
    let bc2 = T::of(1.0 - c.beta2.powi(t));
    let eps = T::of(c.eps);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *p = *p * decay;
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(theta: f64, g: f64, config: AdamWConfig) -> f64 {
        let mut params = vec![Tensor::<f64>::scalar(theta)];
        let grads = vec![Tensor::<f64>::scalar(g)];
        let mut state = OptimState::new(config, &params);
        adamw_step(&mut params, &grads, &mut state).unwrap();
        params[0].data()[0]
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let delta = single(0.5, 1.0, cfg) - 0.5;
        // m̂ = v̂ = 1 after bias correction, so Δθ = −lr / (1 + ε).
        assert!((delta + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        assert_eq!(single(0.75, 0.0, cfg), 0.75);
    }

    #[test]
    fn decoupled_decay() {
        let cfg = AdamWConfig {
            weight_decay: 0.01,
            lr: 1e-3,
            ..Default::default()
        };
        assert!((single(1.0, 0.0, cfg) - (1.0 - 1e-5)).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_bit_identical() {
        let cfg = AdamWConfig {
            lr: 0.0,
            ..Default::default()
        };
        let mut params = vec![Tensor::<f32>::vector(vec![0.3, -1.7, 0.0, 12.5])];
        let before = params.clone();
        let grads = vec![Tensor::<f32>::vector(vec![1.0, -2.0, 3.0, 0.1])];
        let mut state = OptimState::new(cfg, &params);
        for _ in 0..5 {
            adamw_step(&mut params, &grads, &mut state).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = vec![Tensor::<f32>::zeros(&[2, 2])];
        let grads = vec![Tensor::<f32>::zeros(&[4])];
        let mut state = OptimState::new(AdamWConfig::default(), &params);
        assert!(adamw_step(&mut params, &grads, &mut state).is_err());
        assert_eq!(state.step_count(), 0);
    }
}
