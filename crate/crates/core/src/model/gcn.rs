use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, PropagationOperator};

/// Linear GCN with skip reweighting:
/// `x ↦ Σ_l γ_l · op^l · x · W_1⋯W_l`.
///
/// With `gamma_trainable = false` the reweighting is held fixed, which is
/// how the no-skip variant (`γ = e_L`) is represented.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub weights: Vec<Array2<f64>>,
    pub gamma: Vec<f64>,
    pub gamma_trainable: bool,
}

pub(crate) struct GcnCache {
    /// `op · H^{(l-1)}` for each layer.
    pub propagated: Vec<Array2<f64>>,
    /// `H^{(l)}` for each layer.
    pub hidden: Vec<Array2<f64>>,
    pub out: Array2<f64>,
}

impl GcnParams {
    pub fn new(weights: Vec<Array2<f64>>, gamma: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != gamma.len() {
            return Err(Error::input(format!(
                "need one skip weight per layer, got {} layers and {} weights",
                weights.len(),
                gamma.len()
            )));
        }
        let d = weights[0].nrows();
        if weights.iter().any(|w| w.dim() != (d, d)) {
            return Err(Error::input("all GCN weights must be d×d with a common d"));
        }
        Ok(Self {
            weights,
            gamma,
            gamma_trainable: true,
        })
    }

    /// Skip variant: uniform `W` entries on `±1/√d`, `γ_l = 1/L`.
    pub fn init_skip<R: Rng + ?Sized>(d: usize, depth: usize, rng: &mut R) -> Result<Self> {
        Self::new(random_weights(d, depth, rng), vec![1.0 / depth as f64; depth])
    }

    /// No-skip variant: only the last layer contributes (`γ = e_L`, frozen).
    pub fn init_last_layer<R: Rng + ?Sized>(d: usize, depth: usize, rng: &mut R) -> Result<Self> {
        let mut gamma = vec![0.0; depth];
        gamma[depth - 1] = 1.0;
        let mut p = Self::new(random_weights(d, depth, rng), gamma)?;
        p.gamma_trainable = false;
        Ok(p)
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn forward(&self, op: &PropagationOperator, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(op, x.view())?;
        FeatureMatrix::new(self.forward_cached(op, x.view()).out)
    }

    pub(crate) fn check(&self, op: &PropagationOperator, x: ArrayView2<'_, f64>) -> Result<()> {
        if op.n() != x.nrows() {
            return Err(Error::input(format!(
                "operator dimension {} does not match {} feature rows",
                op.n(),
                x.nrows()
            )));
        }
        if x.ncols() != self.dim() {
            return Err(Error::input(format!(
                "feature dimension {} does not match GCN width {}",
                x.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Recursion `H^{(l)} = op · H^{(l-1)} · W_l`, accumulating `γ_l H^{(l)}`.
    pub(crate) fn forward_cached(&self, op: &PropagationOperator, x: ArrayView2<'_, f64>) -> GcnCache {
        let mut out = Array2::zeros(x.raw_dim());
        let mut propagated = Vec::with_capacity(self.depth());
        let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(self.depth());
        for (l, (w, &g)) in self.weights.iter().zip(&self.gamma).enumerate() {
            let prev = if l == 0 { x } else { hidden[l - 1].view() };
            let p = op.mul_dense(prev);
            let h = p.dot(w);
            out.scaled_add(g, &h);
            propagated.push(p);
            hidden.push(h);
        }
        GcnCache {
            propagated,
            hidden,
            out,
        }
    }

    /// Reverse pass given `dout = ∂loss/∂Z`.
    pub(crate) fn backward(&self, op: &PropagationOperator, cache: &GcnCache, dout: &Array2<f64>) -> GcnParams {
        let depth = self.depth();
        let mut dgamma = vec![0.0; depth];
        let mut dweights = vec![Array2::zeros((self.dim(), self.dim())); depth];
        let mut dh = Array2::<f64>::zeros(dout.raw_dim());
        for l in (0..depth).rev() {
            if self.gamma_trainable {
                dgamma[l] = (dout * &cache.hidden[l]).sum();
            }
            dh.scaled_add(self.gamma[l], dout);
            dweights[l] = cache.propagated[l].t().dot(&dh);
            if l > 0 {
                dh = op.mul_dense_transpose(dh.dot(&self.weights[l].t()).view());
            }
        }
        GcnParams {
            weights: dweights,
            gamma: dgamma,
            gamma_trainable: self.gamma_trainable,
        }
    }

    pub(crate) fn for_each_param(&self, f: &mut dyn FnMut(f64)) {
        self.weights.iter().for_each(|w| w.iter().for_each(|v| f(*v)));
        self.gamma.iter().for_each(|v| f(*v));
    }

    pub(crate) fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        self.weights.iter_mut().for_each(|w| w.iter_mut().for_each(&mut *f));
        self.gamma.iter_mut().for_each(&mut *f);
    }
}

fn random_weights<R: Rng + ?Sized>(d: usize, depth: usize, rng: &mut R) -> Vec<Array2<f64>> {
    let bound = 1.0 / (d as f64).sqrt();
    (0..depth)
        .map(|_| Array2::from_shape_fn((d, d), |_| rng.random_range(-bound..=bound)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FilterCoefficients, OperatorKind, SparseGraph};
    use ndarray::{array, Array2};

    fn ring5() -> PropagationOperator {
        let edges: Vec<_> = (0..5).map(|i| (i, (i + 1) % 5)).collect();
        let g = SparseGraph::from_edges(5, &edges, true).unwrap();
        PropagationOperator::from_graph(&g, OperatorKind::NeighAvg).unwrap()
    }

    #[test]
    fn zero_gamma_gives_zero() {
        let p = GcnParams::new(vec![Array2::eye(1); 2], vec![0.0, 0.0]).unwrap();
        let x = FeatureMatrix::new(array![[1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let z = p.forward(&ring5(), &x).unwrap();
        assert!(z.view().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_identity_layer_is_op_x() {
        let p = GcnParams::new(vec![Array2::eye(2)], vec![1.0]).unwrap();
        let x = FeatureMatrix::new(Array2::from_shape_fn((5, 2), |(i, j)| (i * 2 + j) as f64)).unwrap();
        let op = ring5();
        assert_eq!(p.forward(&op, &x).unwrap(), op.apply(&x).unwrap());
    }

    #[test]
    fn two_layers_match_polynomial() {
        let p = GcnParams::new(vec![Array2::eye(1); 2], vec![0.5, 0.5]).unwrap();
        let mut x = Array2::zeros((5, 1));
        x[[0, 0]] = 1.0;
        let x = FeatureMatrix::new(x).unwrap();
        let op = ring5();
        let c = FilterCoefficients::new(vec![0.5, 0.5], 1.0).unwrap();
        let want = op.polynomial_propagate(&c, &x).unwrap();
        let got = p.forward(&op, &x).unwrap();
        for (a, b) in got.view().iter().zip(want.view()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = GcnParams::new(vec![Array2::eye(2)], vec![1.0]).unwrap();
        let x = FeatureMatrix::new(Array2::ones((5, 1))).unwrap();
        assert!(p.forward(&ring5(), &x).is_err());
        let x = FeatureMatrix::new(Array2::ones((4, 2))).unwrap();
        assert!(p.forward(&ring5(), &x).is_err());
    }
}
