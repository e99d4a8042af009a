use serde::{Deserialize, Serialize};

use super::ParamStore;

/// Adam with bias correction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore) {
        if self.m.len() != store.len() {
            self.m = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in store.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for ((w, g), (mi, vi)) in p
                .value
                .data
                .iter_mut()
                .zip(p.grad.iter_mut())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * *g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * *g * *g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                *g = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.3, -0.7]));
        let mut adam = Adam::new(1e-3);
        adam.step(&mut store);
        assert_eq!(store.value(w).data, vec![0.3, -0.7]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.0, 0.0, 0.0]));
        store.get_mut(w).grad = vec![2.5, -0.01, 40.0];
        let mut adam = Adam::new(1e-3);
        adam.step(&mut store);
        let expected = [-1e-3, 1e-3, -1e-3];
        for (v, e) in store.value(w).data.iter().zip(expected) {
            assert!((v - e).abs() < 1e-8, "{v} vs {e}");
        }
        assert!(store.get(w).grad.iter().all(|&g| g == 0.0));
    }
}
