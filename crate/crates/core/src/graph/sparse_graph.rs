use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Undirected graph stored as per-node sorted neighbor lists.
///
/// Self-loops are controlled solely by the `self_loops` flag: when set,
/// every node lists itself; when unset, no node does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    self_loops: bool,
}

impl SparseGraph {
    /// Builds a symmetric, deduplicated graph from an edge list.
    ///
    /// Edges may repeat or appear in both orientations. Explicit `(i, i)`
    /// pairs in `edges` are ignored; use `add_self_loops` instead.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], add_self_loops: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("graph must have at least one node"));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) has an endpoint outside [0, {n})"
                )));
            }
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        if add_self_loops {
            for (i, nbrs) in adjacency.iter_mut().enumerate() {
                nbrs.push(i);
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(Self {
            n,
            adjacency,
            self_loops: add_self_loops,
        })
    }

    /// Symmetric k-nearest-neighbor graph under Euclidean distance.
    ///
    /// Each node selects its `k` closest other nodes (ties go to the smaller
    /// id); an edge is kept when either endpoint selected the other.
    pub fn knn(points: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = points.len();
        if k == 0 {
            return Err(Error::input("k must be at least 1"));
        }
        if k >= n {
            return Err(Error::input(format!("k = {k} must be smaller than n = {n}")));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::input(format!("point {i} has dimension {} not {dim}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("point {i} has a non-finite coordinate")));
            }
        }
        let by_dist_then_id = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        let mut edges = Vec::with_capacity(n * k);
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
        for (i, p) in points.iter().enumerate() {
            cand.clear();
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    cand.push((d2, j));
                }
            }
            cand.select_nth_unstable_by(k - 1, by_dist_then_id);
            edges.extend(cand[..k].iter().map(|&(_, j)| (i, j)));
        }
        Self::from_edges(n, &edges, false)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Degree as stored, counting the self-loop when present.
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        self.adjacency.iter().map(Vec::len).sum::<usize>() as f64 / self.n as f64
    }

    /// Undirected non-loop edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn with_self_loops(&self) -> Self {
        if self.self_loops {
            return self.clone();
        }
        Self::from_edges(self.n, &self.edges(), true).expect("valid graph stays valid")
    }

    pub fn without_self_loops(&self) -> Self {
        if !self.self_loops {
            return self.clone();
        }
        Self::from_edges(self.n, &self.edges(), false).expect("valid graph stays valid")
    }

    /// Adds self-loops only at nodes that have no other neighbor.
    pub(crate) fn loops_at_isolated(&self) -> Self {
        let mut g = self.without_self_loops();
        for (i, nbrs) in g.adjacency.iter_mut().enumerate() {
            if nbrs.is_empty() {
                nbrs.push(i);
            }
        }
        g
    }

    /// Rayleigh quotient `fᵀ L f / ‖f‖²` of the combinatorial Laplacian
    /// `L = D − A` (self-loops excluded). Returns 0 for the zero signal.
    pub fn laplacian_energy(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.n {
            return Err(Error::input(format!(
                "signal length {} does not match n = {}",
                f.len(),
                self.n
            )));
        }
        let norm2: f64 = f.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            return Ok(0.0);
        }
        let quad: f64 = self.edges().iter().map(|&(u, v)| (f[u] - f[v]).powi(2)).sum();
        Ok(quad / norm2)
    }

    /// Checks the symmetry / uniqueness / self-loop invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input(format!("neighbors of {i} not sorted/unique")));
            }
            for &j in nbrs {
                if j >= self.n {
                    return Err(Error::input(format!("neighbor {j} of {i} out of range")));
                }
                if self.adjacency[j].binary_search(&i).is_err() {
                    return Err(Error::input(format!("edge ({i}, {j}) not symmetric")));
                }
            }
            if nbrs.binary_search(&i).is_ok() != self.self_loops {
                return Err(Error::input(format!("self-loop flag inconsistent at {i}")));
            }
        }
        Ok(())
    }
}
