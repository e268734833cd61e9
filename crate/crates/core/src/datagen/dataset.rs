use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{sample_features, FeatureDist};
use super::target::{brownian_target, mean_std, random_dnn_target, standardize};
use super::topology::{gen_topology, TopologySpec};
use crate::error::{Error, Result};
use crate::graph::{
    read_edge_list, write_edge_list, FeatureMatrix, FilterCoefficients, OperatorKind, PropagationOperator, SparseGraph,
};
use crate::rng::{derive_seed, rng_from, tag};
use crate::train::MaskVector;

/// Free-form generator record carried alongside a dataset.
pub type Meta = BTreeMap<String, String>;

/// Graph, features, responses and observation mask for one node-regression
/// problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: SparseGraph,
    pub op: PropagationOperator,
    pub x: FeatureMatrix,
    /// Independent copy of the features used for inductive risk. Equal to
    /// `x` for fixed corpora.
    pub x_fresh: FeatureMatrix,
    pub y: Vec<f64>,
    /// Noiseless responses at `x` (equal to `y` when no clean signal exists).
    pub y_clean: Vec<f64>,
    pub y_clean_fresh: Vec<f64>,
    pub mask: MaskVector,
    pub meta: Meta,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn d(&self) -> usize {
        self.x.d()
    }

    /// True when no independent feature copy exists and evaluation has to be
    /// on held-out nodes of the same graph.
    pub fn is_transductive(&self) -> bool {
        self.meta.get("transductive").map(String::as_str) == Some("true")
    }

    pub fn operator_kind(&self) -> Option<OperatorKind> {
        self.op.kind()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.graph.n();
        let lens = [
            self.op.n(),
            self.x.n(),
            self.x_fresh.n(),
            self.y.len(),
            self.y_clean.len(),
            self.y_clean_fresh.len(),
            self.mask.len(),
        ];
        if lens.iter().any(|&l| l != n) || self.x.d() != self.x_fresh.d() {
            return Err(Error::input(format!(
                "dataset components disagree in size: n = {n}, {lens:?}"
            )));
        }
        Ok(())
    }
}

/// Response function applied to propagated features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Brownian path through a scaled sigmoid of the row mean of `Z`.
    Brownian,
    /// Frozen residual ReLU network of standardized `Z`, standardized output.
    RandomDnn,
    /// Row mean of `Z` itself.
    Linear,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Brownian => "brownian",
            TargetKind::RandomDnn => "random_dnn",
            TargetKind::Linear => "linear",
        }
    }
}

/// Every parameter of a synthetic dataset draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub topology: TopologySpec,
    #[serde(default = "one")]
    pub d: usize,
    /// Filter order of the generating polynomial.
    #[serde(default = "two")]
    pub k: usize,
    pub target: TargetKind,
    pub operator: OperatorKind,
    #[serde(default = "one_f")]
    pub pi: f64,
    #[serde(default = "one_f")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Seed of the regression function (filter coefficients and target
    /// draw). When absent it is derived from `seed`; fixing it keeps the
    /// function constant while the sample changes.
    #[serde(default)]
    pub function_seed: Option<u64>,
    /// Defaults to uniform on `[0,1]` for the Brownian and linear targets and
    /// standard Gaussian for the random network.
    #[serde(default)]
    pub features: Option<FeatureDist>,
    #[serde(default = "yes")]
    pub self_loops: bool,
    #[serde(default = "one_f")]
    pub brownian_scale: f64,
    #[serde(default = "two")]
    pub dnn_depth: usize,
    #[serde(default = "sixteen")]
    pub dnn_width: usize,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn sixteen() -> usize {
    16
}
fn one_f() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl SyntheticSpec {
    /// Spec with defaults for everything but the listed fields; the topology
    /// seed is derived from `seed`.
    pub fn new(topology: TopologySpec, target: TargetKind, operator: OperatorKind, pi: f64, seed: u64) -> Self {
        let mut topology = topology;
        topology.seed = derive_seed(seed, &[tag("topology")]);
        Self {
            topology,
            d: 1,
            k: 2,
            target,
            operator,
            pi,
            noise_sigma: 1.0,
            seed,
            function_seed: None,
            features: None,
            self_loops: true,
            brownian_scale: 1.0,
            dnn_depth: 2,
            dnn_width: 16,
        }
    }

    pub fn feature_dist(&self) -> FeatureDist {
        self.features.unwrap_or(match self.target {
            TargetKind::RandomDnn => FeatureDist::Gaussian { sigma: 1.0 },
            TargetKind::Brownian | TargetKind::Linear => FeatureDist::Uniform01,
        })
    }

    fn stream(&self, name: &str) -> u64 {
        derive_seed(self.seed, &[tag(name)])
    }

    fn function_stream(&self, name: &str) -> u64 {
        match self.function_seed {
            Some(s) => derive_seed(s, &[tag(name)]),
            None => self.stream(name),
        }
    }
}

fn row_means(z: &Array2<f64>) -> Vec<f64> {
    z.rows().into_iter().map(|r| r.mean().unwrap_or(0.0)).collect()
}

/// Standardizes the columns of `z` and applies the same affine map to `other`.
fn standardize_columns(z: &mut Array2<f64>, other: &mut Array2<f64>) {
    for j in 0..z.ncols() {
        let mut col = z.column(j).to_vec();
        let (mean, sd) = standardize(&mut col);
        z.column_mut(j).assign(&ndarray::Array1::from(col));
        other.column_mut(j).mapv_inplace(|v| (v - mean) / sd);
    }
}

/// Draws a complete synthetic dataset. Each random component uses its own
/// stream derived from `spec.seed`; the graph uses `spec.topology.seed`.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.k == 0 || spec.d == 0 {
        return Err(Error::input("filter order and feature dimension must be positive"));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::input(format!(
            "noise level {} must be nonnegative",
            spec.noise_sigma
        )));
    }
    let base = gen_topology(&spec.topology)?;
    let graph = if spec.self_loops { base.with_self_loops() } else { base };
    let op = PropagationOperator::from_graph(&graph, spec.operator)?;
    let n = graph.n();
    let dist = spec.feature_dist();
    let x = sample_features(n, spec.d, dist, spec.stream("features"))?;
    let x_fresh = sample_features(n, spec.d, dist, spec.stream("features_fresh"))?;

    let mut rng = rng_from(spec.function_stream("theta"));
    let raw: Vec<f64> = (0..spec.k).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().map(|t| t.abs()).sum();
    let theta: Vec<f64> = if total > 0.0 {
        raw.iter().map(|t| t / total).collect()
    } else {
        vec![1.0 / spec.k as f64; spec.k]
    };
    let coeffs = FilterCoefficients::new(theta.clone(), 1.0)?;
    let mut z = op.polynomial_propagate(&coeffs, &x)?.into_array();
    let mut z_fresh = op.polynomial_propagate(&coeffs, &x_fresh)?.into_array();

    let (y_clean, y_clean_fresh) = match spec.target {
        TargetKind::Brownian => {
            let t = brownian_target(spec.function_stream("target"), spec.brownian_scale)?;
            let f = |m: Vec<f64>| m.into_iter().map(|v| t.eval(v)).collect::<Vec<_>>();
            (f(row_means(&z)), f(row_means(&z_fresh)))
        }
        TargetKind::Linear => (row_means(&z), row_means(&z_fresh)),
        TargetKind::RandomDnn => {
            standardize_columns(&mut z, &mut z_fresh);
            let t = random_dnn_target(spec.d, spec.dnn_depth, spec.dnn_width, spec.function_stream("target"))?;
            let eval = |m: &Array2<f64>| {
                m.rows()
                    .into_iter()
                    .map(|r| t.eval(r.as_slice().expect("standard layout")))
                    .collect::<Vec<_>>()
            };
            let mut y = eval(&z);
            let mut y_fresh = eval(&z_fresh);
            let (mean, sd) = standardize(&mut y);
            y_fresh.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            (y, y_fresh)
        }
    };

    let mut noise_rng = rng_from(spec.stream("noise"));
    let y: Vec<f64> = y_clean
        .iter()
        .map(|&c| {
            let e: f64 = StandardNormal.sample(&mut noise_rng);
            c + spec.noise_sigma * e
        })
        .collect();
    let mask = MaskVector::sample(n, spec.pi, spec.stream("mask"))?;

    let mut meta = Meta::new();
    meta.insert("source".into(), "synthetic".into());
    meta.insert("topology".into(), spec.topology.kind.to_string());
    meta.insert("n".into(), n.to_string());
    meta.insert("avg_degree".into(), spec.topology.avg_degree.to_string());
    meta.insert("topology_seed".into(), spec.topology.seed.to_string());
    meta.insert("d".into(), spec.d.to_string());
    meta.insert("k".into(), spec.k.to_string());
    meta.insert("theta".into(), join(&theta));
    meta.insert("target".into(), spec.target.as_str().into());
    meta.insert("operator".into(), spec.operator.to_string());
    meta.insert("self_loops".into(), spec.self_loops.to_string());
    meta.insert("pi".into(), spec.pi.to_string());
    meta.insert("noise_sigma".into(), spec.noise_sigma.to_string());
    meta.insert("seed".into(), spec.seed.to_string());
    if let Some(fs) = spec.function_seed {
        meta.insert("function_seed".into(), fs.to_string());
    }
    meta.insert("features".into(), format!("{dist:?}"));
    meta.insert("transductive".into(), "false".into());
    if spec.target == TargetKind::Brownian {
        meta.insert("brownian_scale".into(), spec.brownian_scale.to_string());
    }
    if spec.target == TargetKind::RandomDnn {
        meta.insert("dnn_depth".into(), spec.dnn_depth.to_string());
        meta.insert("dnn_width".into(), spec.dnn_width.to_string());
    }
    let data = Dataset {
        graph,
        op,
        x: FeatureMatrix::new(x.into_array())?,
        x_fresh,
        y,
        y_clean,
        y_clean_fresh,
        mask,
        meta,
    };
    data.check()?;
    Ok(data)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Writes `edges.txt`, `features.csv`, `features_fresh.csv`, `targets.csv`,
/// `targets_fresh.csv` and `meta.toml` into `dir`, creating it if needed.
pub fn write_bundle(data: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_edge_list(&dir.join("edges.txt"), data.n(), &data.graph.edges())?;
    data.x.write_csv(&dir.join("features.csv"))?;
    data.x_fresh.write_csv(&dir.join("features_fresh.csv"))?;

    let mut t = String::from("node,y,y_clean,observed\n");
    for i in 0..data.n() {
        let _ = writeln!(
            t,
            "{i},{},{},{}",
            data.y[i],
            data.y_clean[i],
            u8::from(data.mask.is_observed(i))
        );
    }
    write_text(&dir.join("targets.csv"), &t)?;
    let mut t = String::from("node,y_clean\n");
    for (i, v) in data.y_clean_fresh.iter().enumerate() {
        let _ = writeln!(t, "{i},{v}");
    }
    write_text(&dir.join("targets_fresh.csv"), &t)?;

    let mut meta = data.meta.clone();
    meta.insert("n".into(), data.n().to_string());
    meta.insert("self_loops".into(), data.graph.has_self_loops().to_string());
    meta.insert("pi".into(), data.mask.pi().to_string());
    if let Some(kind) = data.op.kind() {
        meta.insert("operator".into(), kind.to_string());
    }
    let text = toml::to_string(&meta).map_err(|e| Error::format(dir.join("meta.toml"), e.to_string()))?;
    write_text(&dir.join("meta.toml"), &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn meta_value<T: std::str::FromStr>(meta: &Meta, key: &str, path: &Path) -> Result<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(path, format!("missing or invalid `{key}`")))
}

/// Numeric CSV body under a header; returns rows of parsed cells.
fn read_numeric_csv(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("row {idx}: {e}")))?;
        if cells.len() != columns {
            return Err(Error::format(path, format!("row {idx}: expected {columns} cells")));
        }
        rows.push(cells);
    }
    Ok(rows)
}

/// Reads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.toml");
    let meta: Meta = toml::from_str(&read_text(&meta_path)?).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    let n: usize = meta_value(&meta, "n", &meta_path)?;
    let self_loops: bool = meta_value(&meta, "self_loops", &meta_path)?;
    let pi: f64 = meta_value(&meta, "pi", &meta_path)?;
    let kind: OperatorKind = meta_value(&meta, "operator", &meta_path)?;

    let edges = read_edge_list(&dir.join("edges.txt"))?;
    let graph = SparseGraph::from_edges(n, &edges, self_loops)?;
    let op = PropagationOperator::from_graph(&graph, kind)?;
    let x = FeatureMatrix::read_csv(&dir.join("features.csv"))?;
    let x_fresh = FeatureMatrix::read_csv(&dir.join("features_fresh.csv"))?;

    let tpath = dir.join("targets.csv");
    let rows = read_numeric_csv(&tpath, 4)?;
    if rows.len() != n {
        return Err(Error::format(
            &tpath,
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    let mut y = vec![0.0; n];
    let mut y_clean = vec![0.0; n];
    let mut omega = vec![false; n];
    for r in rows {
        let i = r[0] as usize;
        if r[0] < 0.0 || i >= n || r[0].fract() != 0.0 {
            return Err(Error::format(&tpath, format!("node id {} out of range", r[0])));
        }
        y[i] = r[1];
        y_clean[i] = r[2];
        omega[i] = r[3] != 0.0;
    }
    let fpath = dir.join("targets_fresh.csv");
    let rows = read_numeric_csv(&fpath, 2)?;
    let mut y_clean_fresh = vec![0.0; n];
    if rows.len() != n {
        return Err(Error::format(
            &fpath,
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    for r in rows {
        let i = r[0] as usize;
        if i >= n {
            return Err(Error::format(&fpath, format!("node id {i} out of range")));
        }
        y_clean_fresh[i] = r[1];
    }
    let data = Dataset {
        graph,
        op,
        x,
        x_fresh,
        y,
        y_clean,
        y_clean_fresh,
        mask: MaskVector::from_bools(omega, pi)?,
        meta,
    };
    data.check()?;
    Ok(data)
}

/// Sample mean and standard deviation of a response vector.
pub fn response_stats(y: &[f64]) -> (f64, f64) {
    mean_std(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::TopologyKind;

    fn ring_spec(n: usize, target: TargetKind) -> SyntheticSpec {
        SyntheticSpec::new(
            TopologySpec::new(TopologyKind::Ring, n, 2.0, 0),
            target,
            OperatorKind::NeighAvg,
            0.5,
            17,
        )
    }

    #[test]
    fn noiseless_full_mask() {
        let mut spec = ring_spec(20, TargetKind::Brownian);
        spec.noise_sigma = 0.0;
        spec.pi = 1.0;
        let data = make_synthetic(&spec).unwrap();
        assert_eq!(data.y, data.y_clean);
        assert_eq!(data.mask.observed_count(), 20);
    }

    #[test]
    fn theta_is_normalized() {
        for seed in 0..20 {
            let mut spec = ring_spec(10, TargetKind::Linear);
            spec.seed = seed;
            spec.k = 4;
            let data = make_synthetic(&spec).unwrap();
            let s: f64 = data.meta["theta"]
                .split(' ')
                .map(|t| t.parse::<f64>().unwrap().abs())
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_target_is_neighborhood_average() {
        let mut spec = ring_spec(8, TargetKind::Linear);
        spec.k = 1;
        let data = make_synthetic(&spec).unwrap();
        let x = data.x.as_array();
        for i in 0..8 {
            let avg = (x[[(i + 7) % 8, 0]] + x[[i, 0]] + x[[(i + 1) % 8, 0]]) / 3.0;
            assert!((data.y_clean[i] - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn random_network_targets_are_standardized() {
        let spec = SyntheticSpec::new(
            TopologySpec::new(TopologyKind::ErdosRenyi, 200, 3.0, 0),
            TargetKind::RandomDnn,
            OperatorKind::SymNorm,
            0.7,
            5,
        );
        let data = make_synthetic(&spec).unwrap();
        let (mean, sd) = mean_std(&data.y_clean);
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_specs_give_identical_data() {
        let spec = ring_spec(30, TargetKind::Brownian);
        assert_eq!(make_synthetic(&spec).unwrap(), make_synthetic(&spec).unwrap());
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(make_synthetic(&spec).unwrap().x, make_synthetic(&other).unwrap().x);
    }

    #[test]
    fn bundle_round_trip() {
        let data = make_synthetic(&ring_spec(25, TargetKind::Brownian)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&data, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        assert_eq!(back, data);
    }
}
