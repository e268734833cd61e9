use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use super::MlpParams;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, PropagationOperator};

/// Multi-hop model with learned fusion:
/// `Z = Σ_l softmax(α)_l · op^l X W`, followed by a node-wise head.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleParams {
    /// Unconstrained fusion logits, one per hop.
    pub alpha: Vec<f64>,
    /// Shared `d × d` transform.
    pub weight: Array2<f64>,
    pub head: MlpParams,
}

pub(crate) struct MultiscaleCache {
    /// `op^l X` for `l = 1..=L`.
    pub powers: Vec<Array2<f64>>,
    pub mixed: Array2<f64>,
    pub fusion: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|a| (a - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl MultiscaleParams {
    pub fn new(alpha: Vec<f64>, weight: Array2<f64>, head: MlpParams) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::input("multiscale model needs at least one hop"));
        }
        let (r, c) = weight.dim();
        if r != c || head.input_width() != c {
            return Err(Error::input(format!(
                "shared transform is {r}×{c} but head expects width {}",
                head.input_width()
            )));
        }
        Ok(Self { alpha, weight, head })
    }

    pub fn init<R: Rng + ?Sized>(hops: usize, d: usize, head: MlpParams, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (d as f64).sqrt();
        let weight = Array2::from_shape_fn((d, d), |_| rng.random_range(-bound..=bound));
        Self::new(vec![0.0; hops], weight, head)
    }

    pub fn hops(&self) -> usize {
        self.alpha.len()
    }

    pub fn fusion_weights(&self) -> Vec<f64> {
        softmax(&self.alpha)
    }

    pub fn predict(&self, op: &PropagationOperator, x: &FeatureMatrix) -> Result<Array1<f64>> {
        if op.n() != x.n() || x.d() != self.weight.nrows() {
            return Err(Error::input("operator/feature/transform shapes disagree"));
        }
        let cache = self.forward_cached(op, x.view());
        Ok(self.head.forward_batch(cache.mixed.dot(&self.weight).view()))
    }

    pub(crate) fn forward_cached(&self, op: &PropagationOperator, x: ArrayView2<'_, f64>) -> MultiscaleCache {
        let fusion = self.fusion_weights();
        let mut powers: Vec<Array2<f64>> = Vec::with_capacity(self.hops());
        let mut mixed = Array2::zeros(x.raw_dim());
        for (l, &w) in fusion.iter().enumerate() {
            let next = if l == 0 {
                op.mul_dense(x)
            } else {
                op.mul_dense(powers[l - 1].view())
            };
            mixed.scaled_add(w, &next);
            powers.push(next);
        }
        MultiscaleCache { powers, mixed, fusion }
    }

    pub(crate) fn for_each_param(&self, f: &mut dyn FnMut(f64)) {
        self.alpha.iter().for_each(|v| f(*v));
        self.weight.iter().for_each(|v| f(*v));
        self.head.for_each_param(f);
    }

    pub(crate) fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        self.alpha.iter_mut().for_each(&mut *f);
        self.weight.iter_mut().for_each(&mut *f);
        self.head.for_each_param_mut(f);
    }
}
