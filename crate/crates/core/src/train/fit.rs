use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::grad::{backward, check_shapes, forward, loss_derivative};
use super::{mse, LossNorm, MaskVector, Optimizer, OptimizerKind};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, PropagationOperator};
use crate::model::Model;

/// Full-batch training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Clamp box-constrained parameters to `[−1, 1]` after every update.
    pub project: bool,
    /// Seed for parameter initialization.
    pub seed: u64,
    pub loss_norm: LossNorm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            step_size: 1e-2,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            project: true,
            seed: 0,
            loss_norm: LossNorm::OverN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::input("epochs must be at least 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::input(format!("step size {} must be positive", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_eps <= 0.0 {
            return Err(Error::input("Adam moments need β₁, β₂ ∈ [0, 1) and ε > 0"));
        }
        Ok(())
    }

    fn optimizer(&self) -> Optimizer {
        Optimizer::new(
            self.optimizer,
            self.step_size,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: Model,
    /// Objective value after each update.
    pub loss_trace: Vec<f64>,
    /// Readout parameters with magnitude above `1e-8`.
    pub final_sparsity: usize,
    pub wall_time: f64,
}

impl FitResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("at least one epoch")
    }
}

/// Minimizes the masked squared error from `init` by full-batch first-order
/// steps. Deterministic: no randomness is consumed after initialization.
pub fn fit(
    init: Model,
    op: &PropagationOperator,
    x: &FeatureMatrix,
    y: &[f64],
    mask: &MaskVector,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if y.len() != x.n() || mask.len() != x.n() || op.n() != x.n() {
        return Err(Error::input("operator, features, responses and mask must share n"));
    }
    if mask.observed_count() == 0 {
        return Err(Error::input("no observed nodes"));
    }
    check_shapes(&init, op, x.view())?;
    let start = Instant::now();
    let mut model = init;
    let mut opt = cfg.optimizer();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut flat = model.to_flat();
    let mut fwd = forward(&model, op, x.view());
    for epoch in 0..cfg.epochs {
        let (_, dpred) = loss_derivative(&fwd.pred, y, mask, cfg.loss_norm);
        let grad = backward(&model, op, &fwd, &dpred).to_flat();
        opt.step(&mut flat, &grad);
        model.set_flat(&flat);
        if cfg.project {
            model.project();
            flat = model.to_flat();
        }
        fwd = forward(&model, op, x.view());
        let (loss, _) = loss_derivative(&fwd.pred, y, mask, cfg.loss_norm);
        if !loss.is_finite() {
            return Err(Error::numeric(format!("objective became {loss} at epoch {epoch}")));
        }
        trace.push(loss);
    }
    let final_sparsity = model.effective_sparsity(1e-8);
    Ok(FitResult {
        model,
        loss_trace: trace,
        final_sparsity,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// [`fit`] on a dataset's graph operator, features, noisy responses and mask.
pub fn train_lse(init: Model, data: &Dataset, cfg: &TrainConfig) -> Result<FitResult> {
    fit(init, &data.op, &data.x, &data.y, &data.mask, cfg)
}

/// Mean squared error of the model's predictions at every node of `x_fresh`
/// against `target`.
pub fn evaluate_risk(model: &Model, op: &PropagationOperator, x_fresh: &FeatureMatrix, target: &[f64]) -> Result<f64> {
    if target.len() != x_fresh.n() {
        return Err(Error::input(format!(
            "{} targets for {} nodes",
            target.len(),
            x_fresh.n()
        )));
    }
    let pred = model.predict(op, x_fresh)?;
    mse(pred.as_slice().expect("contiguous"), target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{OperatorKind, SparseGraph};
    use crate::model::{GcnParams, GnnParams, MlpParams};
    use crate::rng::rng_from;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn ring(n: usize) -> PropagationOperator {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        PropagationOperator::from_graph(
            &SparseGraph::from_edges(n, &edges, true).unwrap(),
            OperatorKind::NeighAvg,
        )
        .unwrap()
    }

    fn linear_gnn(w: f64, b: f64) -> Model {
        let gcn = GcnParams::new(vec![array![[1.0]]], vec![1.0]).unwrap();
        let mut mlp = MlpParams::zeros(vec![1, 1], 10.0).unwrap();
        mlp.weights[0][[0, 0]] = w;
        mlp.biases[0][0] = b;
        Model::Gnn(GnnParams::new(gcn, mlp).unwrap())
    }

    #[test]
    fn realizable_target_stays_at_zero_loss() {
        let op = ring(6);
        let x = FeatureMatrix::new(array![[0.1], [0.5], [0.9], [0.3], [0.2], [0.8]]).unwrap();
        let model = linear_gnn(0.5, 0.1);
        let y = model.predict(&op, &x).unwrap().to_vec();
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let res = fit(model, &op, &x, &y, &MaskVector::full(6), &cfg).unwrap();
        assert!(res.loss_trace.iter().all(|&l| l == 0.0));
        assert_eq!(res.loss_trace.len(), 20);
    }

    #[test]
    fn sgd_on_linear_problem_is_monotone() {
        let op = ring(8);
        let mut rng = rng_from(2);
        let x = FeatureMatrix::new(Array2::from_shape_fn((8, 1), |_| rng.random::<f64>())).unwrap();
        let y: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let cfg = TrainConfig {
            epochs: 200,
            step_size: 0.1,
            optimizer: OptimizerKind::Sgd,
            project: false,
            ..TrainConfig::default()
        };
        // A single affine readout on raw features is ordinary least squares
        // in (w, b); outputs never reach the truncation level.
        let model = Model::Mlp(MlpParams::zeros(vec![1, 1], 10.0).unwrap());
        let res = fit(model, &op, &x, &y, &MaskVector::full(8), &cfg).unwrap();
        for w in res.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn equal_configs_give_identical_traces() {
        let op = ring(7);
        let mut rng = rng_from(4);
        let x = FeatureMatrix::new(Array2::from_shape_fn((7, 2), |_| rng.random::<f64>())).unwrap();
        let y: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let build = || {
            let mut r = rng_from(99);
            let gcn = GcnParams::init_skip(2, 2, &mut r).unwrap();
            let mlp = MlpParams::init(vec![2, 8, 1], 3.0, &mut r).unwrap();
            Model::Gnn(GnnParams::new(gcn, mlp).unwrap())
        };
        let cfg = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        let mask = MaskVector::full(7);
        let a = fit(build(), &op, &x, &y, &mask, &cfg).unwrap();
        let b = fit(build(), &op, &x, &y, &mask, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn projection_keeps_parameters_in_box() {
        let op = ring(5);
        let x = FeatureMatrix::new(array![[0.0], [1.0], [0.0], [1.0], [0.5]]).unwrap();
        let y = vec![5.0, -5.0, 5.0, -5.0, 5.0];
        let cfg = TrainConfig {
            epochs: 100,
            step_size: 0.5,
            ..TrainConfig::default()
        };
        let res = fit(linear_gnn(0.9, 0.9), &op, &x, &y, &MaskVector::full(5), &cfg).unwrap();
        res.model.for_each_param(&mut |v| assert!((-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn risk_examples() {
        let op = ring(2);
        let x = FeatureMatrix::new(array![[0.3], [0.6]]).unwrap();
        let zero = linear_gnn(0.0, 0.0);
        assert_eq!(evaluate_risk(&zero, &op, &x, &[1.0, 1.0]).unwrap(), 1.0);
        let pred = zero.predict(&op, &x).unwrap().to_vec();
        assert_eq!(evaluate_risk(&zero, &op, &x, &pred).unwrap(), 0.0);
        assert!(evaluate_risk(&zero, &op, &x, &[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            step_size: -1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
