use crate::graph::PropagationOperator;

/// For each node, the sorted set of feature rows its depth-`depth` output
/// reads: the support of row `i` of `|op| + |op|² + … + |op|^depth`.
pub fn receptive_sets(op: &PropagationOperator, depth: usize) -> Vec<Vec<usize>> {
    support_closure(op, depth)
}

fn support_closure(op: &PropagationOperator, depth: usize) -> Vec<Vec<usize>> {
    let n = op.n();
    let mut in_frontier = vec![false; n];
    let mut in_union = vec![false; n];
    (0..n)
        .map(|i| {
            let mut frontier = vec![i];
            let mut union: Vec<usize> = Vec::new();
            for _ in 0..depth {
                let mut next = Vec::new();
                for &u in &frontier {
                    let (cols, vals) = op.row(u);
                    for (&c, &v) in cols.iter().zip(vals) {
                        if v != 0.0 && !in_frontier[c] {
                            in_frontier[c] = true;
                            next.push(c);
                        }
                    }
                }
                for &c in &next {
                    in_frontier[c] = false;
                    if !in_union[c] {
                        in_union[c] = true;
                        union.push(c);
                    }
                }
                frontier = next;
                if frontier.is_empty() {
                    break;
                }
            }
            for &c in &union {
                in_union[c] = false;
            }
            union.sort_unstable();
            union
        })
        .collect()
}

/// Smallest `m` such that every node reads at most `m` feature rows and
/// every feature row is read by at most `m` nodes.
pub fn receptive_field(op: &PropagationOperator, depth: usize) -> usize {
    let rows = support_closure(op, depth).iter().map(Vec::len).max().unwrap_or(0);
    let cols = support_closure(&op.transpose(), depth)
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    rows.max(cols).max(1)
}

/// The coarser bound `m_T^depth`, where `m_T` is the largest number of
/// nonzeros in any row or column. Saturates instead of overflowing.
pub fn conservative_receptive_bound(op: &PropagationOperator, depth: usize) -> usize {
    let mt = op.max_row_nnz().max(op.max_col_nnz()).max(1);
    (0..depth).fold(1usize, |acc, _| acc.saturating_mul(mt))
}

/// Greedy coloring of the nodal losses so that equal colors never share an
/// input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyPartition {
    pub colors: Vec<usize>,
    /// Number of color classes.
    pub r: usize,
    /// Receptive-field parameter of the operator at this depth.
    pub m: usize,
    /// Maximum degree of the loss dependency graph.
    pub dep_degree_max: usize,
}

impl DependencyPartition {
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.r];
        for (i, &c) in self.colors.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Builds the loss dependency graph (nodes adjacent when their receptive
/// sets intersect) and colors it greedily in ascending node order.
pub fn dependency_partition(op: &PropagationOperator, depth: usize) -> DependencyPartition {
    let n = op.n();
    let sets = support_closure(op, depth);
    let mut readers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, s) in sets.iter().enumerate() {
        for &c in s {
            readers[c].push(i);
        }
    }
    let m = sets
        .iter()
        .map(Vec::len)
        .chain(readers.iter().map(Vec::len))
        .max()
        .unwrap_or(0)
        .max(1);

    let mut colors = vec![usize::MAX; n];
    let mut stamp = vec![usize::MAX; n];
    let mut seen = vec![usize::MAX; n];
    let mut dep_degree_max = 0;
    for i in 0..n {
        let mut degree = 0;
        for &c in &sets[i] {
            for &j in &readers[c] {
                if j != i && seen[j] != i {
                    seen[j] = i;
                    degree += 1;
                    if colors[j] != usize::MAX {
                        stamp[colors[j]] = i;
                    }
                }
            }
        }
        dep_degree_max = dep_degree_max.max(degree);
        let mut color = 0;
        while stamp[color] == i {
            color += 1;
        }
        colors[i] = color;
    }
    let r = colors.iter().copied().max().map_or(0, |c| c + 1);
    DependencyPartition {
        colors,
        r,
        m,
        dep_degree_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{OperatorKind, SparseGraph};

    fn ring(n: usize, loops: bool) -> PropagationOperator {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        PropagationOperator::from_graph(
            &SparseGraph::from_edges(n, &edges, loops).unwrap(),
            OperatorKind::SymNorm,
        )
        .unwrap()
    }

    #[test]
    fn ring_receptive_fields() {
        assert_eq!(receptive_field(&ring(5, true), 1), 3);
        assert_eq!(receptive_field(&ring(7, true), 2), 5);
        assert_eq!(receptive_field(&PropagationOperator::identity(6), 3), 1);
    }

    #[test]
    fn loopless_ring_two_hops_revisits_center() {
        let sets = receptive_sets(&ring(8, false), 2);
        assert_eq!(sets[0], vec![0, 1, 2, 6, 7]);
    }

    #[test]
    fn conservative_bound_dominates() {
        let op = ring(9, true);
        for depth in 1..4 {
            assert!(receptive_field(&op, depth) <= conservative_receptive_bound(&op, depth));
        }
        assert_eq!(conservative_receptive_bound(&op, 2), 9);
    }

    #[test]
    fn identity_needs_one_color() {
        let p = dependency_partition(&PropagationOperator::identity(5), 2);
        assert_eq!(p.r, 1);
        assert_eq!(p.dep_degree_max, 0);
    }

    #[test]
    fn ring_six_partition() {
        let p = dependency_partition(&ring(6, true), 1);
        assert_eq!(p.dep_degree_max, 4);
        assert!(p.r <= 5);
        let sets = receptive_sets(&ring(6, true), 1);
        for i in 0..6 {
            for j in i + 1..6 {
                if p.colors[i] == p.colors[j] {
                    assert!(sets[i].iter().all(|c| !sets[j].contains(c)));
                }
            }
        }
    }

    #[test]
    fn complete_graph_needs_n_colors() {
        let edges: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
        let g = SparseGraph::from_edges(4, &edges, true).unwrap();
        let op = PropagationOperator::from_graph(&g, OperatorKind::RowNorm).unwrap();
        assert_eq!(dependency_partition(&op, 1).r, 4);
    }
}
