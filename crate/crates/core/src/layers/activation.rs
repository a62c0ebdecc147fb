//! Scalar activations shared by the tape and by off-tape evaluation.

use crate::numerics::Scalar;

const GELU_C: f64 = 0.044_715;
// sqrt(2 / π)
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// GELU, tanh approximation: `0.5·x·(1 + tanh(sqrt(2/π)·(x + 0.044715·x³)))`.
pub fn gelu<T: Scalar>(x: T) -> T {
    let u = T::of(SQRT_2_OVER_PI) * (x + T::of(GELU_C) * x * x * x);
    T::of(0.5) * x * (T::one() + u.tanh())
}

pub fn gelu_deriv<T: Scalar>(x: T) -> T {
    let c = T::of(SQRT_2_OVER_PI);
    let k = T::of(GELU_C);
    let u = c * (x + k * x * x * x);
    let th = u.tanh();
    let du = c * (T::one() + T::of(3.0) * k * x * x);
    T::of(0.5) * (T::one() + th) + T::of(0.5) * x * (T::one() - th * th) * du
}

/// Logistic sigmoid, evaluated so neither branch exponentiates a positive
/// argument.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `e^x / (e^x + e^-x)`. Dividing through by `e^x` (or `e^-x` for negative
/// inputs) gives `1 / (1 + e^-2x)`, which never overflows.
pub fn talu<T: Scalar>(x: T) -> T {
    let two_x = x + x;
    if x >= T::zero() {
        T::one() / (T::one() + (-two_x).exp())
    } else {
        let e = two_x.exp();
        e / (e + T::one())
    }
}
