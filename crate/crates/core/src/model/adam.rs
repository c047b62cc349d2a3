//! Adaptive moment estimation.

use ndarray::{Array2, Zip};

use super::params::ParamStore;
use super::tape::Gradients;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros = || -> Vec<Array2<f64>> {
            (0..store.len())
                .map(|i| Array2::zeros(store.tensor(i).dim()))
                .collect()
        };
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (i, g) in grads.iter().enumerate() {
            Zip::from(store.tensor_mut(i))
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr_and_zero_grad_is_still() {
        let mut s = ParamStore::default();
        s.push("a", array![[1.0, 2.0]]);
        let mut opt = Adam::new(&s, 0.1);
        opt.step(&mut s, &vec![array![[3.0, 0.0]]]);
        assert!((s.tensor(0)[[0, 0]] - 0.9).abs() < 1e-6);
        assert_eq!(s.tensor(0)[[0, 1]], 2.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut s = ParamStore::default();
        s.push("x", array![[5.0]]);
        let mut opt = Adam::new(&s, 0.05);
        for _ in 0..2000 {
            let g = s.tensor(0) * 2.0;
            opt.step(&mut s, &vec![g]);
        }
        assert!(s.tensor(0)[[0, 0]].abs() < 1e-2);
    }
}
