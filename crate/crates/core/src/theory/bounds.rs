use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, FilterCoefficients, PropagationOperator};

/// Metric entropy bound for the GNN class at sup-norm scale `delta`:
///
/// `(d²L₁ + L₁ + s + 1) · log( 2L₁(L₁+L₂+2) (t ∨ 1)^{L₁} d^{L₁} / δ · Π_k (p_k + 1)² )`
///
/// where `widths = (p_0, …, p_{L₂+1})` and `t_rownorm` is the row-sum norm of
/// the propagation operator. Evaluated in log space.
pub fn entropy_bound(
    delta: f64,
    d: usize,
    l1: usize,
    l2: usize,
    widths: &[usize],
    s: usize,
    t_rownorm: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("scale δ = {delta} must lie in (0, 1]")));
    }
    if l1 == 0 || d == 0 {
        return Err(Error::input("GCN depth and feature dimension must be at least 1"));
    }
    if widths.len() != l2 + 2 {
        return Err(Error::input(format!(
            "width vector has {} entries, expected L₂ + 2 = {}",
            widths.len(),
            l2 + 2
        )));
    }
    if !(t_rownorm >= 0.0 && t_rownorm.is_finite()) {
        return Err(Error::input("operator norm must be finite and nonnegative"));
    }
    let (d, l1f, l2f) = (d as f64, l1 as f64, l2 as f64);
    let prefactor = d * d * l1f + l1f + s as f64 + 1.0;
    let log_arg = (2.0 * l1f * (l1f + l2f + 2.0)).ln() + l1f * t_rownorm.max(1.0).ln() + l1f * d.ln() - delta.ln()
        + 2.0 * widths.iter().map(|&p| (p as f64 + 1.0).ln()).sum::<f64>();
    Ok(prefactor * log_arg)
}

/// Complexity term of the GNN class:
///
/// `κ_n = (d²L₁ + s) [ log(n L₁ (L₁+L₂)) + (L₁+1) log(t ∨ d) + L₂ log s ]`.
pub fn kappa_n(n: f64, d: usize, l1: usize, l2: usize, s: usize, t_rownorm: f64) -> Result<f64> {
    if !(n > 0.0 && n.is_finite()) || d == 0 || l1 == 0 {
        return Err(Error::input("n, d and L₁ must be positive"));
    }
    if l2 < 1 {
        return Err(Error::input("κ_n requires L₂ ≥ 1"));
    }
    if s < 2 {
        return Err(Error::input("κ_n requires sparsity s ≥ 2"));
    }
    if !(t_rownorm > 0.0 && t_rownorm.is_finite()) {
        return Err(Error::input("operator norm must be positive and finite"));
    }
    let (nf, df, l1f, l2f, sf) = (n, d as f64, l1 as f64, l2 as f64, s as f64);
    let bracket = (nf * l1f * (l1f + l2f)).ln() + (l1f + 1.0) * t_rownorm.max(df).ln() + l2f * sf.ln();
    Ok((df * df * l1f + sf) * bracket)
}

/// Structural form of the stochastic error terms of the oracle inequality
/// with every universal constant set to 1. Only the shape in `n`, `π`, `m`,
/// `F` and the entropy is meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticTerms {
    /// `m²F² log N_δ / (ε n) + δ F`.
    pub lower: f64,
    /// `(1+ε) m²F² log N_δ / (ε n π) + F δ / √π + F² / N_δ`.
    pub upper: f64,
}

pub fn stochastic_terms_shape(
    m: usize,
    f: f64,
    log_cover: f64,
    eps: f64,
    n: usize,
    pi: f64,
    delta: f64,
) -> Result<StochasticTerms> {
    if !(eps > 0.0 && eps <= 1.0) || !(pi > 0.0 && pi <= 1.0) || n == 0 {
        return Err(Error::input("need ε ∈ (0,1], π ∈ (0,1] and n ≥ 1"));
    }
    let core = (m as f64).powi(2) * f * f * log_cover / (eps * n as f64);
    Ok(StochasticTerms {
        lower: core + delta * f,
        upper: (1.0 + eps) * core / pi + f * delta / pi.sqrt() + f * f * (-log_cover).exp(),
    })
}

/// Worst-case effect of replacing the propagation operator `s_op` with
/// `t_op` inside the polynomial filter:
/// `τ √(d_T + d_S) Σ_i i |θ_i| A^{i−1}` with `τ` the Frobenius distance, `d`
/// the maximum row nonzero counts and `A` the larger row-sum norm.
pub fn mismatch_bound(
    t_op: &PropagationOperator,
    s_op: &PropagationOperator,
    coeffs: &FilterCoefficients,
) -> Result<f64> {
    let tau = t_op.frobenius_distance(s_op)?;
    let dsum = (t_op.max_row_nnz() + s_op.max_row_nnz()) as f64;
    let a = t_op.row_sum_norm().max(s_op.row_sum_norm());
    let series: f64 = coeffs
        .theta()
        .iter()
        .enumerate()
        .map(|(idx, th)| (idx + 1) as f64 * th.abs() * a.powi(idx as i32))
        .sum();
    Ok(tau * dsum.sqrt() * series)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchCheck {
    /// Largest entry of `|Σ θ_i (T^i − S^i) X|`.
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl MismatchCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Evaluates both sides of the operator-mismatch inequality on a concrete
/// feature matrix with entries in `[0, 1]`.
pub fn verify_mismatch(
    t_op: &PropagationOperator,
    s_op: &PropagationOperator,
    coeffs: &FilterCoefficients,
    x: &FeatureMatrix,
) -> Result<MismatchCheck> {
    if !x.all_in_unit_interval() {
        return Err(Error::input("the mismatch inequality requires features in [0, 1]"));
    }
    let rhs = mismatch_bound(t_op, s_op, coeffs)?;
    let a = t_op.polynomial_propagate(coeffs, x)?;
    let b = s_op.polynomial_propagate(coeffs, x)?;
    let lhs = a
        .as_array()
        .iter()
        .zip(b.as_array())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    Ok(MismatchCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{OperatorKind, SparseGraph};
    use ndarray::array;

    #[test]
    fn entropy_reference_value() {
        let v = entropy_bound(1.0, 1, 1, 1, &[1, 1, 1], 1, 1.0).unwrap();
        assert!((v - 4.0 * 512f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_monotonicity_and_linearity_in_s() {
        let base = entropy_bound(0.5, 2, 2, 1, &[2, 4, 1], 5, 1.5).unwrap();
        let finer = entropy_bound(0.25, 2, 2, 1, &[2, 4, 1], 5, 1.5).unwrap();
        assert!(finer > base);
        let more = entropy_bound(0.5, 2, 2, 1, &[2, 4, 1], 6, 1.5).unwrap();
        let log_arg = base / (4.0 * 2.0 + 2.0 + 5.0 + 1.0);
        assert!((more - base - log_arg).abs() < 1e-9);
        assert!(entropy_bound(0.0, 1, 1, 1, &[1, 1, 1], 1, 1.0).is_err());
        assert!(entropy_bound(1.5, 1, 1, 1, &[1, 1, 1], 1, 1.0).is_err());
    }

    #[test]
    fn kappa_reference_value() {
        let e = std::f64::consts::E;
        let v = kappa_n(e, 1, 1, 1, 2, 1.0).unwrap();
        assert!((v - 3.0 * ((2.0 * e).ln() + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn kappa_monotone_and_guarded() {
        assert!(kappa_n(100.0, 1, 2, 2, 4, 1.0).unwrap() < kappa_n(200.0, 1, 2, 2, 4, 1.0).unwrap());
        assert!(kappa_n(100.0, 1, 2, 2, 4, 1.0).unwrap() < kappa_n(100.0, 1, 2, 2, 5, 1.0).unwrap());
        assert!(kappa_n(100.0, 1, 2, 2, 1, 1.0).is_err());
        assert!(kappa_n(100.0, 1, 2, 0, 3, 1.0).is_err());
    }

    #[test]
    fn shape_terms_scale_with_pi() {
        let a = stochastic_terms_shape(3, 1.0, 10.0, 0.5, 1000, 1.0, 0.0).unwrap();
        let b = stochastic_terms_shape(3, 1.0, 10.0, 0.5, 1000, 0.5, 0.0).unwrap();
        assert!(b.upper > a.upper);
        assert_eq!(a.lower, b.lower);
    }

    fn ring8() -> PropagationOperator {
        let edges: Vec<_> = (0..8).map(|i| (i, (i + 1) % 8)).collect();
        PropagationOperator::from_graph(
            &SparseGraph::from_edges(8, &edges, true).unwrap(),
            OperatorKind::RowNorm,
        )
        .unwrap()
    }

    #[test]
    fn identical_operators_have_zero_mismatch() {
        let op = ring8();
        let c = FilterCoefficients::from_theta(vec![0.4, 0.6]).unwrap();
        assert_eq!(mismatch_bound(&op, &op, &c).unwrap(), 0.0);
        let x = FeatureMatrix::new(ndarray::Array2::from_elem((8, 1), 0.5)).unwrap();
        let check = verify_mismatch(&op, &op, &c, &x).unwrap();
        assert_eq!(check.lhs, 0.0);
        assert!(check.holds);
    }

    #[test]
    fn single_entry_perturbation() {
        let eps = 0.3;
        let s = PropagationOperator::zeros(3);
        let t = PropagationOperator::from_triplets(3, &[(0, 1, eps)]).unwrap();
        let c = FilterCoefficients::from_theta(vec![1.0]).unwrap();
        let x = FeatureMatrix::new(array![[0.0], [1.0], [0.0]]).unwrap();
        let check = verify_mismatch(&t, &s, &c, &x).unwrap();
        assert_eq!(check.lhs, eps);
        assert!(check.rhs >= eps);
        // θ = (1): the bound reduces to τ √(d_T + d_S) = 0.3 · √1.
        assert!((check.rhs - eps).abs() < 1e-15);
    }

    #[test]
    fn rejects_features_outside_unit_interval() {
        let op = ring8();
        let c = FilterCoefficients::from_theta(vec![1.0]).unwrap();
        let x = FeatureMatrix::new(ndarray::Array2::from_elem((8, 1), 1.5)).unwrap();
        assert!(verify_mismatch(&op, &op, &c, &x).is_err());
    }
}
