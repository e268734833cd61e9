//! The estimator classes: linear GCN with skip reweighting feeding a
//! truncated ReLU readout, plus the comparison models.

mod baselines;
mod checkpoint;
mod gcn;
mod gnn;
mod mlp;
mod multiscale;

pub use baselines::{label_propagation, tikhonov_fit};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub(crate) use gcn::GcnCache;
pub use gcn::GcnParams;
pub use gnn::{embed_polynomial_as_gcn, project_params, GnnParams};
pub(crate) use mlp::MlpCache;
pub use mlp::MlpParams;
pub(crate) use multiscale::MultiscaleCache;
pub use multiscale::{softmax, MultiscaleParams};

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, PropagationOperator};

/// Any of the trainable node-regression models.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gnn(GnnParams),
    /// Readout applied to raw features (no propagation).
    Mlp(MlpParams),
    Multiscale(MultiscaleParams),
}

impl Model {
    pub fn predict(&self, op: &PropagationOperator, x: &FeatureMatrix) -> Result<Array1<f64>> {
        match self {
            Model::Gnn(p) => p.predict(op, x),
            Model::Mlp(p) => {
                if x.d() != p.input_width() {
                    return Err(Error::input(format!(
                        "feature dimension {} does not match readout width {}",
                        x.d(),
                        p.input_width()
                    )));
                }
                Ok(p.forward_batch(x.view()))
            }
            Model::Multiscale(p) => p.predict(op, x),
        }
    }

    pub fn readout(&self) -> &MlpParams {
        match self {
            Model::Gnn(p) => &p.mlp,
            Model::Mlp(p) => p,
            Model::Multiscale(p) => &p.head,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Gnn(_) => "gnn",
            Model::Mlp(_) => "mlp",
            Model::Multiscale(_) => "multiscale",
        }
    }

    /// Clamps the box-constrained parameters to `[−1, 1]`. Fusion logits of
    /// the multiscale model are unconstrained and left untouched.
    pub fn project(&mut self) {
        let clamp = &mut |v: &mut f64| *v = v.clamp(-1.0, 1.0);
        match self {
            Model::Gnn(p) => p.for_each_param_mut(clamp),
            Model::Mlp(p) => p.for_each_param_mut(clamp),
            Model::Multiscale(p) => {
                p.weight.iter_mut().for_each(&mut *clamp);
                p.head.for_each_param_mut(clamp);
            }
        }
    }

    /// Post-hoc sparsity of the readout network.
    pub fn effective_sparsity(&self, eps: f64) -> usize {
        self.readout().effective_sparsity(eps)
    }

    pub(crate) fn for_each_param(&self, f: &mut dyn FnMut(f64)) {
        match self {
            Model::Gnn(p) => {
                p.gcn.for_each_param(f);
                p.mlp.for_each_param(f);
            }
            Model::Mlp(p) => p.for_each_param(f),
            Model::Multiscale(p) => p.for_each_param(f),
        }
    }

    pub(crate) fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        match self {
            Model::Gnn(p) => p.for_each_param_mut(f),
            Model::Mlp(p) => p.for_each_param_mut(f),
            Model::Multiscale(p) => p.for_each_param_mut(f),
        }
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |_| n += 1);
        n
    }

    /// All parameters in a fixed traversal order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.for_each_param(&mut |v| out.push(v));
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "flat parameter length");
        let mut it = values.iter();
        self.for_each_param_mut(&mut |v| *v = *it.next().unwrap());
    }
}
