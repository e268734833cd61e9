use ndarray::{Array1, Array2};

use super::{GcnParams, MlpParams};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, FilterCoefficients, PropagationOperator};

/// GCN aggregation followed by a node-wise shared readout: `f_i(x) = h(g_i(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub gcn: GcnParams,
    pub mlp: MlpParams,
}

impl GnnParams {
    pub fn new(gcn: GcnParams, mlp: MlpParams) -> Result<Self> {
        if mlp.input_width() != gcn.dim() {
            return Err(Error::input(format!(
                "readout input width {} does not match feature dimension {}",
                mlp.input_width(),
                gcn.dim()
            )));
        }
        Ok(Self { gcn, mlp })
    }

    pub fn predict(&self, op: &PropagationOperator, x: &FeatureMatrix) -> Result<Array1<f64>> {
        self.gcn.check(op, x.view())?;
        let z = self.gcn.forward_cached(op, x.view()).out;
        Ok(self.mlp.forward_batch(z.view()))
    }

    pub(crate) fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        self.gcn.for_each_param_mut(f);
        self.mlp.for_each_param_mut(f);
    }
}

/// Realizes `Σ_j θ_j op^j x` as a depth-`depth` GCN over `d`-dimensional
/// features: identity weights and `γ_j = θ_j` on the first `k` layers, zero
/// weights and `γ = 0` after that.
pub fn embed_polynomial_as_gcn(coeffs: &FilterCoefficients, depth: usize, d: usize) -> Result<GcnParams> {
    let k = coeffs.order();
    if depth < k {
        return Err(Error::input(format!(
            "GCN depth {depth} is smaller than filter order {k}"
        )));
    }
    if coeffs.theta().iter().any(|t| t.abs() > 1.0) {
        return Err(Error::input(
            "coefficients exceed 1 in magnitude; rescale θ and absorb the factor into the readout",
        ));
    }
    let weights = (0..depth)
        .map(|l| if l < k { Array2::eye(d) } else { Array2::zeros((d, d)) })
        .collect();
    let gamma = (0..depth)
        .map(|l| coeffs.theta().get(l).copied().unwrap_or(0.0))
        .collect();
    GcnParams::new(weights, gamma)
}

/// Clamps every GCN and readout parameter to `[−1, 1]`.
pub fn project_params(p: &GnnParams) -> GnnParams {
    let mut out = p.clone();
    out.for_each_param_mut(&mut |v| *v = v.clamp(-1.0, 1.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{OperatorKind, SparseGraph};
    use ndarray::array;

    #[test]
    fn embedding_layout() {
        let c = FilterCoefficients::new(vec![0.3, -0.7], 1.0).unwrap();
        let g = embed_polynomial_as_gcn(&c, 4, 2).unwrap();
        assert_eq!(g.gamma, vec![0.3, -0.7, 0.0, 0.0]);
        assert_eq!(g.weights[1], Array2::<f64>::eye(2));
        assert_eq!(g.weights[3], Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn embedding_single_coefficient() {
        let c = FilterCoefficients::new(vec![0.5], 1.0).unwrap();
        let g = embed_polynomial_as_gcn(&c, 1, 1).unwrap();
        assert_eq!(g.gamma, vec![0.5]);
        assert_eq!(g.weights[0], Array2::<f64>::eye(1));
    }

    #[test]
    fn embedding_preconditions() {
        let c = FilterCoefficients::new(vec![0.1, 0.2, 0.3], 1.0).unwrap();
        assert!(embed_polynomial_as_gcn(&c, 2, 1).is_err());
        let big = FilterCoefficients::new(vec![1.5], 2.0).unwrap();
        assert!(embed_polynomial_as_gcn(&big, 1, 1).is_err());
    }

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let mut gcn = GcnParams::new(vec![array![[1.5]]], vec![-0.2]).unwrap();
        gcn.gamma_trainable = true;
        let mut mlp = MlpParams::zeros(vec![1, 1], 1.0).unwrap();
        mlp.biases[0][0] = -3.0;
        let p = GnnParams::new(gcn, mlp).unwrap();
        let q = project_params(&p);
        assert_eq!(q.gcn.weights[0][[0, 0]], 1.0);
        assert_eq!(q.gcn.gamma[0], -0.2);
        assert_eq!(q.mlp.biases[0][0], -1.0);
        assert_eq!(project_params(&q), q);
    }

    #[test]
    fn zero_model_predicts_zero() {
        let g = SparseGraph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let op = PropagationOperator::from_graph(&g, OperatorKind::SymNorm).unwrap();
        let gcn = GcnParams::new(vec![Array2::eye(2)], vec![0.0]).unwrap();
        let p = GnnParams::new(gcn, MlpParams::zeros(vec![2, 3, 1], 1.0).unwrap()).unwrap();
        let x = FeatureMatrix::new(Array2::ones((3, 2))).unwrap();
        assert!(p.predict(&op, &x).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn three_node_chain_by_hand() {
        // path 0-1-2 without loops, row_norm: rows (0,1,0), (.5,0,.5), (0,1,0)
        let g = SparseGraph::from_edges(3, &[(0, 1), (1, 2)], false).unwrap();
        let op = PropagationOperator::from_graph(&g, OperatorKind::RowNorm).unwrap();
        let x = FeatureMatrix::new(array![[1.0], [2.0], [4.0]]).unwrap();
        let gcn = GcnParams::new(vec![array![[2.0]]], vec![0.5]).unwrap();
        let mut mlp = MlpParams::zeros(vec![1, 1], 10.0).unwrap();
        mlp.weights[0][[0, 0]] = 3.0;
        mlp.biases[0][0] = -1.0;
        let p = GnnParams::new(gcn, mlp).unwrap();
        // z = 0.5·2·(op x) = op x = (2, 2.5, 2); h = 3z − 1
        let pred = p.predict(&op, &x).unwrap();
        assert_eq!(pred.to_vec(), vec![5.0, 6.5, 5.0]);
    }
}
