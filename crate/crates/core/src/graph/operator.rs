use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, SparseGraph};
use crate::error::{Error, Result};

/// Normalization applied to a graph's adjacency to obtain an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `D^{-1/2} A D^{-1/2}`
    SymNorm,
    /// `D^{-1} A`
    RowNorm,
    /// 0/1 adjacency (sum aggregation)
    RawAdj,
    /// Neighborhood average; identical to `RowNorm` on the graph as given.
    NeighAvg,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 4] = [
        OperatorKind::SymNorm,
        OperatorKind::RowNorm,
        OperatorKind::RawAdj,
        OperatorKind::NeighAvg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::SymNorm => "sym_norm",
            OperatorKind::RowNorm => "row_norm",
            OperatorKind::RawAdj => "raw_adj",
            OperatorKind::NeighAvg => "neigh_avg",
        }
    }

    pub fn is_normalized(self) -> bool {
        !matches!(self, OperatorKind::RawAdj)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown operator kind '{s}'")))
    }
}

/// Polynomial filter coefficients `θ_1..θ_k` with magnitude bound `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    theta: Vec<f64>,
    beta: f64,
}

impl FilterCoefficients {
    pub fn new(theta: Vec<f64>, beta: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::input("filter needs at least one coefficient"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::input(format!("invalid coefficient bound {beta}")));
        }
        if let Some((j, t)) = theta.iter().enumerate().find(|(_, t)| !t.is_finite() || t.abs() > beta) {
            return Err(Error::input(format!(
                "|theta_{}| = {} exceeds bound {beta}",
                j + 1,
                t.abs()
            )));
        }
        Ok(Self { theta, beta })
    }

    /// Uses the tightest bound `max_j |θ_j|`.
    pub fn from_theta(theta: Vec<f64>) -> Result<Self> {
        let beta = theta.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        Self::new(theta, beta)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }
}

/// Sparse `n × n` matrix in compressed-row form.
///
/// Operators built from a graph carry their [`OperatorKind`]; arbitrary
/// matrices (perturbations, identities) carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    kind: Option<OperatorKind>,
}

impl PropagationOperator {
    /// Builds the operator of the given kind from `g`'s stored adjacency.
    pub fn from_graph(g: &SparseGraph, kind: OperatorKind) -> Result<Self> {
        let n = g.n();
        if kind.is_normalized() {
            if let Some(node) = (0..n).find(|&i| g.degree(i) == 0) {
                return Err(Error::ZeroDegree { node });
            }
        }
        let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / (g.degree(i) as f64).sqrt()).collect();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..n {
            let deg = g.degree(i) as f64;
            for &j in g.neighbors(i) {
                col_indices.push(j);
                values.push(match kind {
                    OperatorKind::SymNorm => inv_sqrt[i] * inv_sqrt[j],
                    OperatorKind::RowNorm | OperatorKind::NeighAvg => 1.0 / deg,
                    OperatorKind::RawAdj => 1.0,
                });
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
            kind: Some(kind),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
            kind: None,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
            kind: None,
        }
    }

    /// Assembles a matrix from `(row, col, value)` entries. Duplicates are
    /// summed and exact zeros are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::input(format!("entry ({i}, {j}) outside {n}×{n}")));
            }
            if !v.is_finite() {
                return Err(Error::input(format!("non-finite entry at ({i}, {j})")));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        let mut row_offsets = vec![0usize; n + 1];
        for &(i, _, _) in &merged {
            row_offsets[i + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
            kind: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Option<OperatorKind> {
        self.kind
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values stored in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    /// `op · X`, never densifying the operator.
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        Ok(FeatureMatrix::from_array_unchecked(self.apply_view(x.view())?))
    }

    pub fn apply_view(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_rows(x.nrows())?;
        Ok(self.mul_dense(x))
    }

    /// `opᵀ · X`.
    pub fn apply_transpose_view(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_rows(x.nrows())?;
        Ok(self.mul_dense_transpose(x))
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n {
            return Err(Error::input(format!(
                "operator is {0}×{0} but matrix has {rows} rows",
                self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn mul_dense(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        debug_assert_eq!(x.nrows(), self.n);
        let d = x.ncols();
        let xs = x.as_standard_layout();
        let src = xs.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.n * d];
        for i in 0..self.n {
            let dst = &mut out[i * d..(i + 1) * d];
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let srow = &src[j * d..(j + 1) * d];
                for (o, s) in dst.iter_mut().zip(srow) {
                    *o += v * s;
                }
            }
        }
        Array2::from_shape_vec((self.n, d), out).expect("shape matches")
    }

    pub(crate) fn mul_dense_transpose(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        debug_assert_eq!(x.nrows(), self.n);
        let d = x.ncols();
        let xs = x.as_standard_layout();
        let src = xs.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.n * d];
        for i in 0..self.n {
            let srow = &src[i * d..(i + 1) * d];
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let dst = &mut out[j * d..(j + 1) * d];
                for (o, s) in dst.iter_mut().zip(srow) {
                    *o += v * s;
                }
            }
        }
        Array2::from_shape_vec((self.n, d), out).expect("shape matches")
    }

    /// `Σ_j θ_j op^j X`, accumulated along the power sequence.
    pub fn polynomial_propagate(&self, coeffs: &FilterCoefficients, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_rows(x.n())?;
        Ok(FeatureMatrix::from_array_unchecked(
            self.polynomial_view(coeffs.theta(), x.view()),
        ))
    }

    pub(crate) fn polynomial_view(&self, theta: &[f64], x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut acc = Array2::zeros(x.raw_dim());
        let mut power = x.to_owned();
        for &t in theta {
            power = self.mul_dense(power.view());
            acc.scaled_add(t, &power);
        }
        acc
    }

    /// `max_i Σ_j |op_ij|`.
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of `self − other` over the union of supports.
    pub fn frobenius_distance(&self, other: &PropagationOperator) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::input(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        let mut sum = 0.0;
        for i in 0..self.n {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let diff = match (ca.get(p), cb.get(q)) {
                    (Some(&a), Some(&b)) if a == b => {
                        p += 1;
                        q += 1;
                        va[p - 1] - vb[q - 1]
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        p += 1;
                        va[p - 1]
                    }
                    (Some(_), None) => {
                        p += 1;
                        va[p - 1]
                    }
                    _ => {
                        q += 1;
                        -vb[q - 1]
                    }
                };
                sum += diff * diff;
            }
        }
        Ok(sum.sqrt())
    }

    /// Largest number of nonzero entries in any row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.n)
            .map(|i| self.row(i).1.iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    pub fn max_col_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.n];
        for (&j, &v) in self.col_indices.iter().zip(&self.values) {
            if v != 0.0 {
                counts[j] += 1;
            }
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        let mut out = Self::from_triplets(self.n, &t).expect("entries in range");
        out.kind = self.kind;
        out
    }

    /// Dense copy; intended for small test instances.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.triplets() {
            a[[i, j]] = v;
        }
        a
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.frobenius_like_max(&self.transpose())
    }

    fn frobenius_like_max(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (ca, va) = self.row(i);
            for (&j, &v) in ca.iter().zip(va) {
                let (cb, vb) = other.row(i);
                let w = cb.binary_search(&j).map(|p| vb[p]).unwrap_or(0.0);
                worst = worst.max((v - w).abs());
            }
        }
        worst
    }
}
