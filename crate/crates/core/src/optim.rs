//! Adam with bias correction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use crate::tensor::{ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every parameter in `params`. `grads` must carry exactly
    /// the same names and shapes.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
        if !params.same_layout(grads) {
            let missing = params
                .names()
                .find(|n| grads.get(n).is_none())
                .or_else(|| grads.names().find(|n| params.get(n).is_none()))
                .unwrap_or("shape");
            return Err(Error::KeyMismatch(format!("first mismatch: {missing}")));
        }
        self.t += 1;
        let t = self.t as f64;
        let bias1 = 1.0 - libm::pow(self.beta1, t);
        let bias2 = 1.0 - libm::pow(self.beta2, t);
        for ((name, param), (_, grad)) in params.iter_mut().zip(grads.iter()) {
            let m = self.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(param.shape()));
            let v = self.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(param.shape()));
            for (((p, g), m), v) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::row_vector(&[value, -value]));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = store(0.7);
        let before = params.clone();
        let mut adam = Adam::new(1e-3);
        let grads = params.zeros_like();
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut params = store(1.0);
        let mut grads = ParamStore::new();
        grads.insert("w", Tensor::row_vector(&[0.3, -2.0]));
        let mut adam = Adam::new(1e-3);
        adam.step(&mut params, &grads).unwrap();
        let w = params.get("w").unwrap().data();
        assert!((w[0] - (1.0 - 1e-3 * 0.3 / (0.3 + 1e-8))).abs() < 1e-15);
        assert!((w[1] - (-1.0 + 1e-3)).abs() < 1e-10);
    }

    #[test]
    fn constant_gradient_steps_are_bounded_by_lr() {
        let lr = 1e-3;
        let mut params = store(0.0);
        let mut grads = ParamStore::new();
        grads.insert("w", Tensor::row_vector(&[5.0, -1e-3]));
        let mut adam = Adam::new(lr);
        let mut prev = params.get("w").unwrap().clone();
        for _ in 0..2 {
            adam.step(&mut params, &grads).unwrap();
            let now = params.get("w").unwrap().clone();
            for (a, b) in now.data().iter().zip(prev.data()) {
                assert!((a - b).abs() <= lr * (1.0 + 1e-6));
            }
            prev = now;
        }
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut params = store(0.3);
        let before = params.clone();
        let mut grads = ParamStore::new();
        grads.insert("w", Tensor::row_vector(&[1.0, 2.0]));
        let mut adam = Adam::new(0.0);
        for _ in 0..3 {
            adam.step(&mut params, &grads).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn key_mismatch_is_rejected() {
        let mut params = store(0.3);
        let mut grads = ParamStore::new();
        grads.insert("other", Tensor::row_vector(&[1.0, 2.0]));
        assert!(matches!(Adam::new(1e-3).step(&mut params, &grads), Err(Error::KeyMismatch(_))));
    }
}
