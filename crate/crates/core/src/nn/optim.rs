//! Adam and cosine annealing.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// One named parameter tensor and its gradient.
pub struct ParamSlot<'a> {
    pub name: &'a str,
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    slots: Vec<Moments>,
    step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl Adam {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            slots: sizes.iter().map(|&n| Moments { first: vec![0.0; n], second: vec![0.0; n] }).collect(),
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, slot: usize) -> &[f64] {
        &self.slots[slot].first
    }

    pub fn second_moment(&self, slot: usize) -> &[f64] {
        &self.slots[slot].second
    }

    /// Applies one bias-corrected Adam update with learning rate `lr`.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [ParamSlot<'_>], lr: f64) -> Result<()> {
        if params.len() != self.slots.len() {
            return Err(Error::ShapeMismatch {
                what: "optimizer slots",
                expected: self.slots.len(),
                found: params.len(),
            });
        }
        for (p, m) in params.iter().zip(&self.slots) {
            if p.values.len() != m.first.len() || p.grads.len() != m.first.len() {
                return Err(Error::ShapeMismatch {
                    what: "parameter length",
                    expected: m.first.len(),
                    found: p.values.len(),
                });
            }
            if !p.grads.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFiniteGradient { param: p.name.to_string() });
            }
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.step += 1;
        self.beta1_pow *= beta1;
        self.beta2_pow *= beta2;
        let c1 = 1.0 - self.beta1_pow;
        let c2 = 1.0 - self.beta2_pow;
        for (p, m) in params.iter_mut().zip(&mut self.slots) {
            for k in 0..p.values.len() {
                let g = p.grads[k];
                let m1 = beta1 * m.first[k] + (1.0 - beta1) * g;
                let m2 = beta2 * m.second[k] + (1.0 - beta2) * g * g;
                m.first[k] = m1;
                m.second[k] = m2;
                p.values[k] -= lr * (m1 / c1) / (libm::sqrt(m2 / c2) + eps);
            }
        }
        Ok(())
    }
}

/// `lr_t = eta_min + ½(base − eta_min)(1 + cos(π·t/T_max))`, held at `eta_min`
/// for `t ≥ T_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub eta_min: f64,
    pub t_max: usize,
}

impl CosineSchedule {
    pub fn lr_at(&self, t: usize) -> f64 {
        if self.t_max == 0 || t >= self.t_max {
            return if self.t_max == 0 { self.base_lr } else { self.eta_min };
        }
        let phase = core::f64::consts::PI * t as f64 / self.t_max as f64;
        self.eta_min + 0.5 * (self.base_lr - self.eta_min) * (1.0 + libm::cos(phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut adam = Adam::new(AdamConfig::default(), &[2]);
        let mut w = [1.0, -1.0];
        adam.step(&mut [ParamSlot { name: "w", values: &mut w, grads: &[1.0, 1.0] }], 0.1).unwrap();
        let before = w;
        let m_before = adam.first_moment(0).to_vec();
        adam.step(&mut [ParamSlot { name: "w", values: &mut w, grads: &[0.0, 0.0] }], 0.1).unwrap();
        // momentum still moves parameters after one non-zero step; from a fresh state it must not
        assert!(adam.first_moment(0)[0].abs() < m_before[0].abs());
        let mut fresh = Adam::new(AdamConfig::default(), &[2]);
        let mut v = [3.0, 4.0];
        fresh.step(&mut [ParamSlot { name: "v", values: &mut v, grads: &[0.0, 0.0] }], 0.1).unwrap();
        assert_eq!(v, [3.0, 4.0]);
        assert_ne!(w, before);
    }

    #[test]
    fn non_finite_gradient_is_rejected_with_name() {
        let mut adam = Adam::new(AdamConfig::default(), &[1, 1]);
        let mut a = [1.0];
        let mut b = [1.0];
        let err = adam
            .step(
                &mut [
                    ParamSlot { name: "a", values: &mut a, grads: &[0.5] },
                    ParamSlot { name: "b", values: &mut b, grads: &[f64::NAN] },
                ],
                0.1,
            )
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { param: "b".into() });
        assert_eq!(a, [1.0]);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        let mut w = [1.0_f64];
        let mut prev = w[0].abs();
        for _ in 0..50 {
            let g = [2.0 * w[0]];
            adam.step(&mut [ParamSlot { name: "w", values: &mut w, grads: &g }], 1e-2).unwrap();
            assert!(w[0].abs() < prev);
            prev = w[0].abs();
        }
    }

    #[test]
    fn cosine_endpoints_and_monotone() {
        let s = CosineSchedule { base_lr: 1e-3, eta_min: 1e-5, t_max: 100 };
        assert_eq!(s.lr_at(0), 1e-3);
        assert_eq!(s.lr_at(100), 1e-5);
        assert_eq!(s.lr_at(150), 1e-5);
        for t in 0..100 {
            assert!(s.lr_at(t + 1) <= s.lr_at(t));
        }
    }
}
