//! Acceptance checks for the estimators, bound formulas and experiment
//! pipeline. Each check returns an [`Outcome`]; the `acceptance` test target
//! runs them all and prints one line per criterion.

mod exact;
mod pipeline;
mod studies;

use std::time::{Duration, Instant};

pub use exact::{coloring_soundness, embedding_containment, gradient_oracle, mismatch_inequality, monotone_bounds};
pub use pipeline::{determinism, real_data_pipeline};
pub use studies::{convergence_slope, degree_sensitivity, gnn_beats_mlp};

/// Why a check could not complete.
#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Lib(#[from] gnnlab::Error),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Violation(String),
}

/// Result of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub(crate) fn new(pass: bool, detail: String, start: Instant) -> Self {
        Self {
            pass,
            detail,
            elapsed: start.elapsed(),
        }
    }

    /// Fails a passing outcome whose runtime exceeded `budget`.
    pub(crate) fn within(mut self, budget: Duration) -> Self {
        if self.elapsed > budget {
            self.pass = false;
            self.detail = format!("{}; over the {:?} budget", self.detail, budget);
        }
        self
    }

    pub(crate) fn error(err: impl std::fmt::Display, start: Instant) -> Self {
        Self::new(false, format!("error: {err}"), start)
    }
}

/// A numbered criterion with a short name and its check.
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub check: fn() -> Outcome,
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            name: "polynomial embedding is exact",
            check: embedding_containment,
        },
        Criterion {
            id: 2,
            name: "operator mismatch inequality",
            check: mismatch_inequality,
        },
        Criterion {
            id: 3,
            name: "dependency coloring soundness",
            check: coloring_soundness,
        },
        Criterion {
            id: 4,
            name: "gradients match finite differences",
            check: gradient_oracle,
        },
        Criterion {
            id: 5,
            name: "convergence slope near -1/2",
            check: convergence_slope,
        },
        Criterion {
            id: 6,
            name: "raw adjacency degree sensitivity",
            check: degree_sensitivity,
        },
        Criterion {
            id: 7,
            name: "gnn beats mlp on graph targets",
            check: gnn_beats_mlp,
        },
        Criterion {
            id: 8,
            name: "bound formulas are monotone",
            check: monotone_bounds,
        },
        Criterion {
            id: 9,
            name: "cell reruns are byte-identical",
            check: determinism,
        },
        Criterion {
            id: 10,
            name: "real-data pipeline on the sample",
            check: real_data_pipeline,
        },
    ]
}
