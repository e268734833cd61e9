use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::rng::rng_from;

/// Law of the iid feature entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureDist {
    Uniform01,
    Gaussian { sigma: f64 },
}

pub fn sample_features(n: usize, d: usize, dist: FeatureDist, seed: u64) -> Result<FeatureMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::input("feature matrix needs n, d ≥ 1"));
    }
    let mut rng = rng_from(seed);
    let values = match dist {
        FeatureDist::Uniform01 => Array2::from_shape_fn((n, d), |_| rng.random::<f64>()),
        FeatureDist::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma)
                .ok()
                .filter(|_| sigma > 0.0)
                .ok_or_else(|| Error::input(format!("feature scale {sigma} must be positive")))?;
            Array2::from_shape_fn((n, d), |_| normal.sample(&mut rng))
        }
    };
    FeatureMatrix::new(values)
}
