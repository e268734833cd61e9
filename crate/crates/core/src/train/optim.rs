use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// First-order update rule over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step_size: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn sgd(step_size: f64) -> Self {
        Self::new(OptimizerKind::Sgd, step_size, 0.9, 0.999, 1e-8)
    }

    pub fn adam(step_size: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self::new(OptimizerKind::Adam, step_size, beta1, beta2, eps)
    }

    pub fn new(kind: OptimizerKind, step_size: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            kind,
            step_size,
            beta1,
            beta2,
            eps,
            first: Vec::new(),
            second: Vec::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "parameter/gradient length");
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.step_size * g;
                }
            }
            OptimizerKind::Adam => {
                if self.first.len() != params.len() {
                    self.first = vec![0.0; params.len()];
                    self.second = vec![0.0; params.len()];
                    self.t = 0;
                }
                self.t += 1;
                let c1 = 1.0 - self.beta1.powi(self.t);
                let c2 = 1.0 - self.beta2.powi(self.t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
                    self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
                    let mhat = self.first[i] / c1;
                    let vhat = self.second[i] / c2;
                    params[i] -= self.step_size * mhat / (vhat.sqrt() + self.eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_moves_against_gradient() {
        let mut p = vec![1.0, -1.0];
        Optimizer::sgd(0.5).step(&mut p, &[2.0, -4.0]);
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn first_adam_step_has_step_size_magnitude() {
        let mut p = vec![0.0, 0.0];
        Optimizer::adam(0.1, 0.9, 0.999, 1e-8).step(&mut p, &[3.0, -0.01]);
        assert!((p[0] + 0.1).abs() < 1e-6);
        assert!((p[1] - 0.1).abs() < 1e-4);
    }

    #[test]
    fn adam_ignores_zero_gradient() {
        let mut p = vec![0.7];
        let mut opt = Optimizer::adam(0.1, 0.9, 0.999, 1e-8);
        for _ in 0..5 {
            opt.step(&mut p, &[0.0]);
        }
        assert_eq!(p, vec![0.7]);
    }
}
