//! Graph substrate: adjacency storage, sparse propagation operators,
//! dense feature matrices and the matrix norms consumed by the bound
//! calculators.

mod features;
mod io;
mod operator;
mod sparse_graph;

pub use features::FeatureMatrix;
pub use io::{read_edge_list, write_edge_list};
pub use operator::{FilterCoefficients, OperatorKind, PropagationOperator};
pub use sparse_graph::SparseGraph;
