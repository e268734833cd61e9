//! Reverse-mode gradients of the masked least-squares objective.

use ndarray::{Array1, Array2, ArrayView2};

use super::{LossNorm, MaskVector};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, PropagationOperator};
use crate::model::{GcnCache, GnnParams, MlpCache, Model, MultiscaleCache, MultiscaleParams};

enum Cache {
    Gnn(GcnCache, MlpCache),
    Mlp(MlpCache),
    Multiscale(MultiscaleCache, MlpCache),
}

/// A forward pass that remembers what the reverse pass needs.
pub(crate) struct Forward {
    pub pred: Array1<f64>,
    cache: Cache,
}

pub(crate) fn check_shapes(model: &Model, op: &PropagationOperator, x: ArrayView2<'_, f64>) -> Result<()> {
    match model {
        Model::Gnn(p) => p.gcn.check(op, x),
        Model::Mlp(p) => {
            if x.ncols() != p.input_width() {
                return Err(Error::input("feature dimension does not match readout width"));
            }
            Ok(())
        }
        Model::Multiscale(p) => {
            if op.n() != x.nrows() || x.ncols() != p.weight.nrows() {
                return Err(Error::input("operator/feature/transform shapes disagree"));
            }
            Ok(())
        }
    }
}

/// Assumes [`check_shapes`] has passed.
pub(crate) fn forward(model: &Model, op: &PropagationOperator, x: ArrayView2<'_, f64>) -> Forward {
    let (out, cache) = match model {
        Model::Gnn(p) => {
            let g = p.gcn.forward_cached(op, x);
            let h = p.mlp.forward_cached(g.out.view());
            (truncate(&h.out, p.mlp.f_trunc), Cache::Gnn(g, h))
        }
        Model::Mlp(p) => {
            let h = p.forward_cached(x);
            (truncate(&h.out, p.f_trunc), Cache::Mlp(h))
        }
        Model::Multiscale(p) => {
            let c = p.forward_cached(op, x);
            let h = p.head.forward_cached(c.mixed.dot(&p.weight).view());
            (truncate(&h.out, p.head.f_trunc), Cache::Multiscale(c, h))
        }
    };
    Forward { pred: out, cache }
}

fn truncate(out: &Array1<f64>, f: f64) -> Array1<f64> {
    out.mapv(|v| v.clamp(-f, f))
}

/// Parameter gradient given `dpred = ∂loss/∂prediction`. The result has the
/// same variant and shapes as `model`.
pub(crate) fn backward(model: &Model, op: &PropagationOperator, fwd: &Forward, dpred: &Array1<f64>) -> Model {
    match (model, &fwd.cache) {
        (Model::Gnn(p), Cache::Gnn(g, h)) => {
            let (dmlp, dz) = p.mlp.backward(h, dpred);
            let dgcn = p.gcn.backward(op, g, &dz);
            Model::Gnn(GnnParams { gcn: dgcn, mlp: dmlp })
        }
        (Model::Mlp(p), Cache::Mlp(h)) => Model::Mlp(p.backward(h, dpred).0),
        (Model::Multiscale(p), Cache::Multiscale(c, h)) => {
            let (dhead, dz) = p.head.backward(h, dpred);
            Model::Multiscale(multiscale_backward(p, c, &dz, dhead))
        }
        _ => unreachable!("cache built for a different model variant"),
    }
}

fn multiscale_backward(
    p: &MultiscaleParams,
    c: &MultiscaleCache,
    dz: &Array2<f64>,
    dhead: crate::model::MlpParams,
) -> MultiscaleParams {
    let dweight = c.mixed.t().dot(dz);
    let dmixed = dz.dot(&p.weight.t());
    let dw: Vec<f64> = c.powers.iter().map(|pw| (&dmixed * pw).sum()).collect();
    let avg: f64 = dw.iter().zip(&c.fusion).map(|(g, w)| g * w).sum();
    let dalpha = c.fusion.iter().zip(&dw).map(|(w, g)| w * (g - avg)).collect();
    MultiscaleParams {
        alpha: dalpha,
        weight: dweight,
        head: dhead,
    }
}

/// `∂loss/∂pred` for the masked objective: `2(pred_i − y_i)/denom` on
/// observed nodes, zero elsewhere.
pub(crate) fn loss_derivative(pred: &Array1<f64>, y: &[f64], mask: &MaskVector, norm: LossNorm) -> (f64, Array1<f64>) {
    let denom = norm.denominator(mask);
    let mut loss = 0.0;
    let d = pred
        .iter()
        .zip(y)
        .zip(mask.omega())
        .map(|((&p, &t), &o)| {
            if o {
                loss += (p - t) * (p - t);
                2.0 * (p - t) / denom
            } else {
                0.0
            }
        })
        .collect();
    (loss / denom, d)
}

fn check_data(op: &PropagationOperator, x: &FeatureMatrix, y: &[f64], mask: &MaskVector) -> Result<()> {
    if y.len() != x.n() || mask.len() != x.n() || op.n() != x.n() {
        return Err(Error::input(format!(
            "data lengths disagree: operator {}, features {}, responses {}, mask {}",
            op.n(),
            x.n(),
            y.len(),
            mask.len()
        )));
    }
    if mask.observed_count() == 0 {
        return Err(Error::input("no observed nodes"));
    }
    Ok(())
}

/// Objective value and its gradient for any model variant.
pub fn loss_and_gradient(
    model: &Model,
    op: &PropagationOperator,
    x: &FeatureMatrix,
    y: &[f64],
    mask: &MaskVector,
    norm: LossNorm,
) -> Result<(f64, Model)> {
    check_data(op, x, y, mask)?;
    check_shapes(model, op, x.view())?;
    let fwd = forward(model, op, x.view());
    let (loss, dpred) = loss_derivative(&fwd.pred, y, mask, norm);
    Ok((loss, backward(model, op, &fwd, &dpred)))
}

/// Gradient of the `over_n` masked objective with respect to every GNN
/// parameter.
pub fn gradients(
    p: &GnnParams,
    op: &PropagationOperator,
    x: &FeatureMatrix,
    y: &[f64],
    mask: &MaskVector,
) -> Result<GnnParams> {
    let model = Model::Gnn(p.clone());
    match loss_and_gradient(&model, op, x, y, mask, LossNorm::OverN)?.1 {
        Model::Gnn(g) => Ok(g),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{OperatorKind, SparseGraph};
    use crate::model::{GcnParams, MlpParams};
    use crate::rng::rng_from;
    use ndarray::array;
    use rand::Rng;

    fn objective(model: &Model, op: &PropagationOperator, x: &FeatureMatrix, y: &[f64], mask: &MaskVector) -> f64 {
        let pred = model.predict(op, x).unwrap();
        crate::train::masked_mse(pred.as_slice().unwrap(), y, mask, LossNorm::OverN).unwrap()
    }

    fn finite_difference_check(
        model: &Model,
        op: &PropagationOperator,
        x: &FeatureMatrix,
        y: &[f64],
        mask: &MaskVector,
    ) {
        let (_, grad) = loss_and_gradient(model, op, x, y, mask, LossNorm::OverN).unwrap();
        let analytic = grad.to_flat();
        let base = model.to_flat();
        let h = 1e-5;
        for k in 0..base.len() {
            let mut plus = model.clone();
            let mut v = base.clone();
            v[k] += h;
            plus.set_flat(&v);
            let mut minus = model.clone();
            v[k] -= 2.0 * h;
            minus.set_flat(&v);
            let fd = (objective(&plus, op, x, y, mask) - objective(&minus, op, x, y, mask)) / (2.0 * h);
            let scale = fd.abs().max(analytic[k].abs()).max(1e-6);
            assert!(
                (fd - analytic[k]).abs() / scale < 1e-4,
                "coordinate {k}: analytic {} vs numeric {fd}",
                analytic[k]
            );
        }
    }

    fn ring_op(n: usize, kind: OperatorKind) -> PropagationOperator {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        PropagationOperator::from_graph(&SparseGraph::from_edges(n, &edges, true).unwrap(), kind).unwrap()
    }

    #[test]
    fn gnn_gradient_matches_finite_differences() {
        let mut rng = rng_from(11);
        let op = ring_op(6, OperatorKind::SymNorm);
        let x = FeatureMatrix::new(Array2::from_shape_fn((6, 2), |_| rng.random::<f64>())).unwrap();
        let y: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let mask = MaskVector::from_bools(vec![true, true, false, true, false, true], 0.6).unwrap();
        let gcn = GcnParams::init_skip(2, 3, &mut rng).unwrap();
        let mlp = MlpParams::init(vec![2, 4, 3, 1], 5.0, &mut rng).unwrap();
        let model = Model::Gnn(GnnParams::new(gcn, mlp).unwrap());
        finite_difference_check(&model, &op, &x, &y, &mask);
    }

    #[test]
    fn multiscale_gradient_matches_finite_differences() {
        let mut rng = rng_from(12);
        let op = ring_op(5, OperatorKind::RowNorm);
        let x = FeatureMatrix::new(Array2::from_shape_fn((5, 2), |_| rng.random::<f64>())).unwrap();
        let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let head = MlpParams::init(vec![2, 3, 1], 5.0, &mut rng).unwrap();
        let mut ms = MultiscaleParams::init(3, 2, head, &mut rng).unwrap();
        ms.alpha = vec![0.3, -0.2, 0.5];
        let model = Model::Multiscale(ms);
        finite_difference_check(&model, &op, &x, &y, &MaskVector::full(5));
    }

    #[test]
    fn zero_gradient_at_interpolation() {
        let op = ring_op(4, OperatorKind::NeighAvg);
        let x = FeatureMatrix::new(array![[0.1], [0.4], [0.7], [0.2]]).unwrap();
        let gcn = GcnParams::new(vec![Array2::eye(1)], vec![1.0]).unwrap();
        let mut mlp = MlpParams::zeros(vec![1, 1], 2.0).unwrap();
        mlp.weights[0][[0, 0]] = 1.0;
        let p = GnnParams::new(gcn, mlp).unwrap();
        let y = p.predict(&op, &x).unwrap().to_vec();
        let g = gradients(&p, &op, &x, &y, &MaskVector::full(4)).unwrap();
        let mut total = 0.0;
        Model::Gnn(g).for_each_param(&mut |v| total += v.abs());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn single_observed_node_by_hand() {
        // Two nodes joined by an edge, row-normalized with self-loops: every
        // entry of the operator is 1/2. One identity GCN layer and a scalar
        // affine readout `h(z) = w z + b`.
        let op = ring_op(2, OperatorKind::RowNorm);
        let x = FeatureMatrix::new(array![[1.0], [3.0]]).unwrap();
        let gcn = GcnParams::new(vec![array![[1.0]]], vec![1.0]).unwrap();
        let mut mlp = MlpParams::zeros(vec![1, 1], 10.0).unwrap();
        mlp.weights[0][[0, 0]] = 2.0;
        mlp.biases[0][0] = 0.5;
        let p = GnnParams::new(gcn, mlp).unwrap();
        let mask = MaskVector::from_bools(vec![true, false], 0.5).unwrap();
        let y = [1.0, 100.0];
        // z_0 = 2, pred_0 = 4.5, loss = (3.5)²/2, ∂loss/∂pred_0 = 3.5.
        let g = gradients(&p, &op, &x, &y, &mask).unwrap();
        assert!((g.mlp.weights[0][[0, 0]] - 3.5 * 2.0).abs() < 1e-12);
        assert!((g.mlp.biases[0][0] - 3.5).abs() < 1e-12);
        // ∂z_0/∂γ = (T X W)_0 = 2, ∂z_0/∂W = γ (T X)_0 = 2.
        assert!((g.gcn.gamma[0] - 3.5 * 2.0 * 2.0).abs() < 1e-12);
        assert!((g.gcn.weights[0][[0, 0]] - 3.5 * 2.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn unobserved_responses_do_not_matter() {
        let mut rng = rng_from(5);
        let op = ring_op(5, OperatorKind::SymNorm);
        let x = FeatureMatrix::new(Array2::from_shape_fn((5, 1), |_| rng.random::<f64>())).unwrap();
        let gcn = GcnParams::init_skip(1, 2, &mut rng).unwrap();
        let mlp = MlpParams::init(vec![1, 3, 1], 2.0, &mut rng).unwrap();
        let model = Model::Gnn(GnnParams::new(gcn, mlp).unwrap());
        let mask = MaskVector::from_bools(vec![true, false, true, false, true], 0.5).unwrap();
        let y1 = [0.1, 0.2, 0.3, 0.4, 0.5];
        let y2 = [0.1, -9.0, 0.3, 7.0, 0.5];
        let a = loss_and_gradient(&model, &op, &x, &y1, &mask, LossNorm::OverN).unwrap();
        let b = loss_and_gradient(&model, &op, &x, &y2, &mask, LossNorm::OverN).unwrap();
        assert_eq!(a, b);
    }
}
