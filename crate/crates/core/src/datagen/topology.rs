use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    ErdosRenyi,
    Sbm2,
    Rgg,
    BarabasiAlbert,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 5] = [
        TopologyKind::Ring,
        TopologyKind::ErdosRenyi,
        TopologyKind::Sbm2,
        TopologyKind::Rgg,
        TopologyKind::BarabasiAlbert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Ring => "ring",
            TopologyKind::ErdosRenyi => "erdos_renyi",
            TopologyKind::Sbm2 => "sbm2",
            TopologyKind::Rgg => "rgg",
            TopologyKind::BarabasiAlbert => "barabasi_albert",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown topology `{s}`")))
    }
}

/// Random graph family, size, target mean degree and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub n: usize,
    #[serde(default = "default_avg_degree")]
    pub avg_degree: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_avg_degree() -> f64 {
    2.0
}

impl TopologySpec {
    pub fn new(kind: TopologyKind, n: usize, avg_degree: f64, seed: u64) -> Self {
        Self {
            kind,
            n,
            avg_degree,
            seed,
        }
    }
}

/// Samples the graph described by `spec`. Graphs come back without
/// self-loops.
pub fn gen_topology(spec: &TopologySpec) -> Result<SparseGraph> {
    let n = spec.n;
    let deg = spec.avg_degree;
    if n == 0 {
        return Err(Error::input("graph needs at least one node"));
    }
    if !(deg.is_finite() && deg >= 0.0) && spec.kind != TopologyKind::Ring {
        return Err(Error::input(format!("average degree {deg} must be nonnegative")));
    }
    match spec.kind {
        TopologyKind::Ring => ring(n),
        TopologyKind::ErdosRenyi => {
            if deg >= n as f64 {
                return Err(Error::input(format!("average degree {deg} must be below n = {n}")));
            }
            erdos_renyi(n, deg / n as f64, spec.seed)
        }
        TopologyKind::Sbm2 => {
            if deg >= n as f64 {
                return Err(Error::input(format!("average degree {deg} must be below n = {n}")));
            }
            sbm2(n, 0.55 * deg / n as f64, 0.055 * deg / n as f64, spec.seed)
        }
        TopologyKind::Rgg => rgg(n, (deg / (PI * n as f64)).sqrt(), spec.seed),
        TopologyKind::BarabasiAlbert => {
            let m = (deg / 2.0).floor() as usize;
            barabasi_albert(n, m, spec.seed)
        }
    }
}

pub fn ring(n: usize) -> Result<SparseGraph> {
    if n < 3 {
        return Err(Error::input(format!("a ring needs at least 3 nodes, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    SparseGraph::from_edges(n, &edges, false)
}

/// Indices in `0..total` kept independently with probability `p`, drawn by
/// geometric skipping so the cost is proportional to the number kept.
fn bernoulli_indices<R: Rng>(total: u64, p: f64, rng: &mut R) -> Vec<u64> {
    if p <= 0.0 || total == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let log_q = (1.0 - p).ln();
    let mut out = Vec::new();
    let mut idx: i64 = -1;
    loop {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        if !skip.is_finite() || skip >= total as f64 {
            break;
        }
        idx += 1 + skip as i64;
        if idx as u64 >= total {
            break;
        }
        out.push(idx as u64);
    }
    out
}

/// Maps a linear index over strictly-lower-triangular pairs to `(v, w)` with
/// `w < v`.
fn triangular_pair(k: u64) -> (usize, usize) {
    let mut v = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0).floor() as u64;
    while v * (v - 1) / 2 > k {
        v -= 1;
    }
    while (v + 1) * v / 2 <= k {
        v += 1;
    }
    let w = k - v * (v - 1) / 2;
    (v as usize, w as usize)
}

pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<SparseGraph> {
    let mut rng = rng_from(seed);
    let total = (n as u64) * (n as u64 - 1) / 2;
    let edges: Vec<_> = bernoulli_indices(total, p, &mut rng)
        .into_iter()
        .map(triangular_pair)
        .collect();
    SparseGraph::from_edges(n, &edges, false)
}

/// Two-block stochastic block model with explicit within/between edge
/// probabilities. Block 0 holds the first `⌈n/2⌉` nodes.
pub fn sbm2(n: usize, p_within: f64, p_between: f64, seed: u64) -> Result<SparseGraph> {
    for p in [p_within, p_between] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let mut rng = rng_from(seed);
    let a = n.div_ceil(2);
    let b = n - a;
    let mut edges = Vec::new();
    for (offset, size) in [(0, a), (a, b)] {
        let total = (size as u64) * (size as u64).saturating_sub(1) / 2;
        for k in bernoulli_indices(total, p_within, &mut rng) {
            let (v, w) = triangular_pair(k);
            edges.push((offset + v, offset + w));
        }
    }
    for k in bernoulli_indices((a as u64) * (b as u64), p_between, &mut rng) {
        let i = (k / b as u64) as usize;
        let j = (k % b as u64) as usize;
        edges.push((i, a + j));
    }
    SparseGraph::from_edges(n, &edges, false)
}

/// Random geometric graph on the unit square: uniform points joined when
/// their Euclidean distance is at most `radius`.
pub fn rgg(n: usize, radius: f64, seed: u64) -> Result<SparseGraph> {
    let mut rng = rng_from(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    rgg_from_points(&pts, radius)
}

pub(crate) fn rgg_from_points(pts: &[(f64, f64)], radius: f64) -> Result<SparseGraph> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&i, &j| pts[i].0.total_cmp(&pts[j].0).then(i.cmp(&j)));
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            let dx = pts[j].0 - pts[i].0;
            if dx > radius {
                break;
            }
            let dy = pts[j].1 - pts[i].1;
            if dx * dx + dy * dy <= r2 {
                edges.push((i, j));
            }
        }
    }
    SparseGraph::from_edges(pts.len(), &edges, false)
}

/// Preferential attachment: starts from a star on `m + 1` nodes, then each
/// new node links to `m` distinct existing nodes drawn with probability
/// proportional to degree.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<SparseGraph> {
    if m < 1 || m >= n {
        return Err(Error::input(format!(
            "preferential attachment needs 1 ≤ m < n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|v| (0, v)).collect();
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * n * m);
    for &(u, v) in &edges {
        repeated.push(u);
        repeated.push(v);
    }
    let mut targets: Vec<usize> = Vec::with_capacity(m);
    for source in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let t = repeated[rng.random_range(0..repeated.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((source, t));
            repeated.push(t);
            repeated.push(source);
        }
    }
    SparseGraph::from_edges(n, &edges, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_has_degree_two() {
        let g = gen_topology(&TopologySpec::new(TopologyKind::Ring, 5, 2.0, 0)).unwrap();
        assert!((0..5).all(|i| g.degree(i) == 2));
        assert!(ring(2).is_err());
    }

    #[test]
    fn triangular_indexing_is_a_bijection() {
        let mut k = 0;
        for v in 1..40 {
            for w in 0..v {
                assert_eq!(triangular_pair(k), (v, w));
                k += 1;
            }
        }
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        let mut total = 0.0;
        for seed in 0..5 {
            let g = gen_topology(&TopologySpec::new(TopologyKind::ErdosRenyi, 10_000, 2.0, seed)).unwrap();
            total += g.mean_degree();
        }
        let mean = total / 5.0;
        assert!((mean - 2.0).abs() < 0.1, "mean degree {mean}");
    }

    #[test]
    fn erdos_renyi_full_probability_is_complete() {
        let g = erdos_renyi(6, 1.0, 3).unwrap();
        assert_eq!(g.num_edges(), 15);
    }

    #[test]
    fn sbm_degenerate_probabilities_split_blocks() {
        let g = sbm2(4, 1.0, 0.0, 1).unwrap();
        let mut edges = g.edges();
        edges.sort();
        assert_eq!(edges, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn rgg_matches_brute_force() {
        let mut rng = rng_from(8);
        let pts: Vec<(f64, f64)> = (0..60).map(|_| (rng.random(), rng.random())).collect();
        let g = rgg_from_points(&pts, 0.2).unwrap();
        let mut expected = Vec::new();
        for i in 0..60 {
            for j in i + 1..60 {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                if dx * dx + dy * dy <= 0.04 {
                    expected.push((i, j));
                }
            }
        }
        let mut got = g.edges();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn barabasi_albert_edge_count_and_hubs() {
        let g = barabasi_albert(200, 2, 4).unwrap();
        assert_eq!(g.num_edges(), 2 + 2 * (200 - 3));
        let mean_max = |n: usize| {
            (0..10)
                .map(|s| barabasi_albert(n, 1, s).unwrap().max_degree() as f64)
                .sum::<f64>()
                / 10.0
        };
        assert!(mean_max(2000) > mean_max(500));
        assert!(gen_topology(&TopologySpec::new(TopologyKind::BarabasiAlbert, 10, 1.0, 0)).is_err());
    }

    #[test]
    fn generated_graphs_are_valid() {
        for kind in TopologyKind::ALL {
            let g = gen_topology(&TopologySpec::new(kind, 300, 4.0, 7)).unwrap();
            g.check_invariants().unwrap();
            assert!(!g.has_self_loops());
        }
    }
}
