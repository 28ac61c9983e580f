//! `f64` transcendental functions routed through `libm` so results do not
//! depend on the platform's libm when `std` is linked.

pub use libm::{atan2, cos, exp, log as ln, pow, sin, sqrt, tanh};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn is_finite_slice(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

pub fn norm_sq(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum()
}
