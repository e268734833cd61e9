//! Synthetic graphs, features, targets and complete datasets.

mod dataset;
mod features;
mod target;
mod topology;

pub use dataset::{
    make_synthetic, read_bundle, response_stats, write_bundle, Dataset, Meta, SyntheticSpec, TargetKind,
};
pub use features::{sample_features, FeatureDist};
pub use target::{
    brownian_target, mean_std, random_dnn_target, sigmoid, standardize, HolderTarget, RandomDnnTarget, BROWNIAN_STEPS,
};
pub use topology::{barabasi_albert, erdos_renyi, gen_topology, rgg, ring, sbm2, TopologyKind, TopologySpec};
