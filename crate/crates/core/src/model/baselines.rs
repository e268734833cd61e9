//! Graph-regularization baselines that ignore node features.

use crate::error::{Error, Result};
use crate::graph::{OperatorKind, PropagationOperator, SparseGraph};
use crate::train::MaskVector;

const CG_RTOL: f64 = 1e-8;

fn check_inputs(g: &SparseGraph, y: &[f64], mask: &MaskVector) -> Result<()> {
    if y.len() != g.n() || mask.len() != g.n() {
        return Err(Error::input(format!(
            "graph has {} nodes but y has {} and mask {} entries",
            g.n(),
            y.len(),
            mask.len()
        )));
    }
    if mask.observed_count() == 0 {
        return Err(Error::input("mask has no observed node"));
    }
    Ok(())
}

/// Laplacian-regularized least squares:
/// `argmin_f Σ_{i∈Ω} (y_i − f_i)² + λ fᵀ L f`, `L = D − A` without self-loops.
///
/// Solves `(Diag(ω) + λL) f = ω∘y` by Jacobi-preconditioned conjugate
/// gradient to a relative residual of 1e-8, at most `10 n` iterations.
pub fn tikhonov_fit(g: &SparseGraph, y: &[f64], mask: &MaskVector, lambda: f64) -> Result<Vec<f64>> {
    check_inputs(g, y, mask)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("regularization weight {lambda} must be ≥ 0")));
    }
    let g = g.without_self_loops();
    let n = g.n();
    let omega: Vec<f64> = mask.omega().iter().map(|&o| if o { 1.0 } else { 0.0 }).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let nbrs = g.neighbors(i);
            let lap = nbrs.len() as f64 * v[i] - nbrs.iter().map(|&j| v[j]).sum::<f64>();
            out[i] = omega[i] * v[i] + lambda * lap;
        }
    };
    let diag: Vec<f64> = (0..n)
        .map(|i| omega[i] + lambda * g.degree(i) as f64)
        .map(|d| if d > 0.0 { d } else { 1.0 })
        .collect();
    let b: Vec<f64> = (0..n).map(|i| omega[i] * y[i]).collect();
    conjugate_gradient(apply, &b, &diag, CG_RTOL, 10 * n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient<F>(apply: F, b: &[f64], diag: &[f64], rtol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter.max(1) {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if dot(&r, &r).sqrt() <= rtol * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / b_norm;
    if rel <= rtol {
        Ok(x)
    } else {
        Err(Error::numeric(format!(
            "conjugate gradient stopped at relative residual {rel:e} (target {rtol:e})"
        )))
    }
}

/// Harmonic label propagation with clamping.
///
/// Iterates `f ← α P f + (1 − α) y_Ω` with `P` the row-normalized
/// self-looped adjacency, resetting observed nodes to their labels after
/// each sweep. Stops after `iters` sweeps or once the largest update is
/// below 1e-9.
pub fn label_propagation(g: &SparseGraph, y: &[f64], mask: &MaskVector, alpha: f64, iters: usize) -> Result<Vec<f64>> {
    check_inputs(g, y, mask)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::input(format!("retention weight {alpha} must lie in [0, 1)")));
    }
    let p = PropagationOperator::from_graph(&g.with_self_loops(), OperatorKind::RowNorm)?;
    let omega = mask.omega();
    let seed: Vec<f64> = (0..g.n()).map(|i| if omega[i] { y[i] } else { 0.0 }).collect();
    let mut f = seed.clone();
    let mut next = vec![0.0; g.n()];
    for _ in 0..iters {
        let mut max_step: f64 = 0.0;
        for i in 0..g.n() {
            let (cols, vals) = p.row(i);
            let avg: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * f[j]).sum();
            next[i] = if omega[i] {
                y[i]
            } else {
                alpha * avg + (1.0 - alpha) * seed[i]
            };
            max_step = max_step.max((next[i] - f[i]).abs());
        }
        std::mem::swap(&mut f, &mut next);
        if max_step < 1e-9 {
            break;
        }
    }
    Ok(f)
}
