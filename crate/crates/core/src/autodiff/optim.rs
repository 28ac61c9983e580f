use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl Adam {
    /// Default decay rates (0.9, 0.999) and floor 1e-8.
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first_moment, &self.second_moment)
    }

    /// Descends along `grads`. Non-finite gradient entries refuse the whole
    /// update and leave both `params` and the optimizer untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::Length {
                what: "adam params/grads/state",
                left: params.len(),
                right: grads.len(),
            });
        }
        let bad: Vec<usize> = grads
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_finite())
            .map(|(i, _)| i)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonFiniteGradient(bad));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / c1;
            let v_hat = v / c2;
            params[i] -= self.learning_rate * m_hat / (math::sqrt(v_hat) + self.epsilon);
        }
        Ok(())
    }
}

/// `params += scale · grads` (plain gradient step; use a negative scale to descend).
pub fn gradient_step(params: &mut [f64], grads: &[f64], scale: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Length {
            what: "params/grads",
            left: params.len(),
            right: grads.len(),
        });
    }
    let bad: Vec<usize> = grads
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_finite())
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonFiniteGradient(bad));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p += scale * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut adam = Adam::new(3, 0.1);
        let mut p = [1.0, -2.0, 3.5];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [1.0, -2.0, 3.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_has_learning_rate_magnitude() {
        let mut adam = Adam::new(1, 0.05);
        let mut p = [0.0];
        adam.step(&mut p, &[1.0]).unwrap();
        // m̂/√v̂ = 1, so the step is lr / (1 + 1e-8)
        assert!((p[0] + 0.05).abs() < 1e-9);
    }

    #[test]
    fn minimizes_shifted_parabola() {
        let mut adam = Adam::new(1, 0.05);
        let mut x = [0.0];
        for _ in 0..2000 {
            let g = 2.0 * (x[0] - 2.0);
            adam.step(&mut x, &[g]).unwrap();
        }
        assert!((x[0] - 2.0).abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn non_finite_refused() {
        let mut adam = Adam::new(3, 0.1);
        let mut p = [1.0, 1.0, 1.0];
        let err = adam.step(&mut p, &[0.0, f64::NAN, f64::INFINITY]).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient(std::vec![1, 2]));
        assert_eq!(p, [1.0, 1.0, 1.0]);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn counter_increments_by_one() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = [0.0, 0.0];
        for k in 1..=5 {
            adam.step(&mut p, &[0.3, -0.2]).unwrap();
            assert_eq!(adam.step_count(), k);
        }
    }
}
