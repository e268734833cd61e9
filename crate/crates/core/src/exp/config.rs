use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{FeatureDist, TargetKind, TopologyKind};
use crate::error::{Error, Result};
use crate::graph::OperatorKind;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Convergence,
    LabelFraction,
    Topology,
    Degree,
    Real,
}

impl Study {
    pub const ALL: [Study; 5] = [
        Study::Convergence,
        Study::LabelFraction,
        Study::Topology,
        Study::Degree,
        Study::Real,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Study::Convergence => "convergence",
            Study::LabelFraction => "label_fraction",
            Study::Topology => "topology",
            Study::Degree => "degree",
            Study::Real => "real",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown study `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GnnSkip,
    GnnNoskip,
    Mlp,
    Tikhonov,
    LabelProp,
    Multiscale,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::GnnSkip,
        Method::GnnNoskip,
        Method::Mlp,
        Method::Tikhonov,
        Method::LabelProp,
        Method::Multiscale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GnnSkip => "gnn_skip",
            Method::GnnNoskip => "gnn_noskip",
            Method::Mlp => "mlp",
            Method::Tikhonov => "tikhonov",
            Method::LabelProp => "label_prop",
            Method::Multiscale => "multiscale",
        }
    }

    /// Trained by gradient descent (as opposed to a closed-form smoother).
    pub fn is_neural(self) -> bool {
        !matches!(self, Method::Tikhonov | Method::LabelProp)
    }

    /// Has a propagation depth that calibration may select.
    pub fn has_depth(self) -> bool {
        matches!(self, Method::GnnSkip | Method::GnnNoskip | Method::Multiscale)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown method `{s}`")))
    }
}

/// Synthetic data generation shared by the simulated studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub topologies: Vec<TopologyKind>,
    pub operators: Vec<OperatorKind>,
    pub target: TargetKind,
    pub d: usize,
    pub k: usize,
    pub noise_sigma: f64,
    pub features: Option<FeatureDist>,
    pub self_loops: bool,
    pub brownian_scale: f64,
    pub dnn_depth: usize,
    pub dnn_width: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            topologies: vec![TopologyKind::Ring],
            operators: vec![OperatorKind::NeighAvg],
            target: TargetKind::Brownian,
            d: 1,
            k: 2,
            noise_sigma: 1.0,
            features: None,
            self_loops: true,
            brownian_scale: 1.0,
            dnn_depth: 2,
            dnn_width: 16,
        }
    }
}

/// Architecture and baseline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Propagation depth of the GCN and the multiscale model.
    pub gcn_depth: usize,
    /// Number of hidden layers in every readout network.
    pub hidden_layers: usize,
    /// Fixed hidden width; when absent the width is `⌈width_scale·√n⌉`.
    pub width: Option<usize>,
    pub width_scale: f64,
    pub f_trunc: f64,
    pub tikhonov_lambda: f64,
    pub label_prop_alpha: f64,
    pub label_prop_iters: usize,
    /// Candidate depths picked on a calibration split; empty disables
    /// selection and uses `gcn_depth`.
    pub depth_grid: Vec<usize>,
    /// Share of the observed nodes held out for depth selection.
    pub calibration_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            gcn_depth: 2,
            hidden_layers: 1,
            width: None,
            width_scale: 1.0,
            f_trunc: 10.0,
            tikhonov_lambda: 1.0,
            label_prop_alpha: 0.9,
            label_prop_iters: 200,
            depth_grid: Vec::new(),
            calibration_fraction: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn hidden_width(&self, n: usize) -> usize {
        self.width
            .unwrap_or_else(|| (self.width_scale * (n as f64).sqrt()).ceil().max(1.0) as usize)
    }

    pub fn readout_widths(&self, input: usize, n: usize) -> Vec<usize> {
        let w = self.hidden_width(n);
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(w, self.hidden_layers));
        widths.push(1);
        widths
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealDataset {
    California,
    Chameleon,
}

impl RealDataset {
    pub fn as_str(self) -> &'static str {
        match self {
            RealDataset::California => "california",
            RealDataset::Chameleon => "chameleon",
        }
    }
}

/// Location and preprocessing of a fixed corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealConfig {
    pub dataset: RealDataset,
    /// Housing CSV for the California corpus.
    pub csv: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Neighbors per node in the spatial k-NN graph.
    pub knn_k: usize,
    /// Keep only the most frequent text features.
    pub max_features: usize,
    pub operator: OperatorKind,
}

impl Default for RealConfig {
    fn default() -> Self {
        Self {
            dataset: RealDataset::California,
            csv: None,
            edges: None,
            features: None,
            target: None,
            knn_k: 8,
            max_features: 64,
            operator: OperatorKind::SymNorm,
        }
    }
}

/// One experiment: a study, its factor grids, methods and settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    pub n_grid: Vec<usize>,
    pub pi_grid: Vec<f64>,
    /// Target mean degrees of the random topologies.
    pub degree_grid: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
    /// Record wall-clock time per fit. Off by default so that reruns are
    /// byte-identical.
    pub timing: bool,
    /// Skip the dependency coloring when the receptive field exceeds this.
    pub partition_max_m: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub real: RealConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            study: Study::Convergence,
            n_grid: vec![200, 400, 800, 1600, 3200],
            pi_grid: vec![0.95],
            degree_grid: vec![2.0],
            trials: 20,
            methods: vec![Method::GnnSkip, Method::GnnNoskip, Method::Mlp],
            master_seed: 0,
            out_dir: None,
            workers: None,
            timing: false,
            partition_max_m: 64,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            real: RealConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults tuned to each study's usual setup.
    pub fn for_study(study: Study) -> Self {
        let mut cfg = Self {
            study,
            ..Self::default()
        };
        match study {
            Study::Convergence => {}
            Study::LabelFraction => {
                cfg.n_grid = vec![200, 800, 3200];
                cfg.pi_grid = vec![0.05, 0.15, 0.35, 0.75, 0.95];
            }
            Study::Topology => {
                cfg.n_grid = vec![3000];
                cfg.pi_grid = vec![0.1, 0.3, 0.5, 0.7, 0.9];
                cfg.degree_grid = vec![2.0];
                cfg.trials = 5;
                cfg.methods = Method::ALL.to_vec();
                cfg.data.topologies = vec![
                    TopologyKind::ErdosRenyi,
                    TopologyKind::Sbm2,
                    TopologyKind::Rgg,
                    TopologyKind::BarabasiAlbert,
                ];
                cfg.data.operators = vec![OperatorKind::SymNorm];
                cfg.data.target = TargetKind::RandomDnn;
                cfg.data.d = 3;
            }
            Study::Degree => {
                cfg.n_grid = vec![1500];
                cfg.pi_grid = vec![0.75];
                cfg.degree_grid = vec![2.0, 4.0, 6.0, 8.0, 10.0];
                cfg.trials = 4;
                cfg.methods = vec![Method::GnnSkip];
                cfg.data.topologies = vec![TopologyKind::BarabasiAlbert];
                cfg.data.operators = vec![OperatorKind::SymNorm, OperatorKind::RowNorm, OperatorKind::RawAdj];
                cfg.data.target = TargetKind::RandomDnn;
                cfg.data.d = 3;
            }
            Study::Real => {
                cfg.pi_grid = vec![0.1, 0.3, 0.5, 0.7];
                cfg.trials = 5;
                cfg.methods = Method::ALL.to_vec();
                cfg.model.depth_grid = vec![1, 2, 3];
            }
        }
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::input("at least one method is required"));
        }
        if self.pi_grid.is_empty() || self.pi_grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::input("label fractions must be a nonempty list in (0, 1]"));
        }
        if self.study != Study::Real {
            if self.n_grid.is_empty() || self.n_grid.contains(&0) {
                return Err(Error::input("n_grid must be a nonempty list of positive sizes"));
            }
            if self.degree_grid.is_empty() {
                return Err(Error::input("degree_grid must be nonempty"));
            }
            if self.data.topologies.is_empty() || self.data.operators.is_empty() {
                return Err(Error::input("need at least one topology and one operator"));
            }
        }
        if self.model.gcn_depth == 0 || self.model.depth_grid.contains(&0) {
            return Err(Error::input("propagation depths must be positive"));
        }
        if !(0.0..1.0).contains(&self.model.calibration_fraction) {
            return Err(Error::input("calibration fraction must lie in [0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(Error::input("workers must be positive"));
        }
        self.train.validate()
    }
}
