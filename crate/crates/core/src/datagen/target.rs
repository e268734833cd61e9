use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Number of subintervals of the Brownian path grid.
pub const BROWNIAN_STEPS: usize = 1 << 12;

/// A Brownian sample path on a uniform grid of `[0, 1]`, composed with a
/// scaled sigmoid: `z ↦ BM(sigmoid(z / scale))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderTarget {
    pub grid_values: Vec<f64>,
    pub scale: f64,
}

pub fn brownian_target(seed: u64, scale: f64) -> Result<HolderTarget> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::input(format!("sigmoid scale {scale} must be positive")));
    }
    let mut rng = rng_from(seed);
    let sd = (1.0 / BROWNIAN_STEPS as f64).sqrt();
    let mut grid_values = Vec::with_capacity(BROWNIAN_STEPS + 1);
    let mut acc = 0.0;
    grid_values.push(acc);
    for _ in 0..BROWNIAN_STEPS {
        let e: f64 = StandardNormal.sample(&mut rng);
        acc += sd * e;
        grid_values.push(acc);
    }
    Ok(HolderTarget { grid_values, scale })
}

impl HolderTarget {
    /// Linear interpolation of the path at `u ∈ [0, 1]`.
    pub fn path_at(&self, u: f64) -> f64 {
        let steps = self.grid_values.len() - 1;
        let pos = u.clamp(0.0, 1.0) * steps as f64;
        let i = (pos.floor() as usize).min(steps - 1);
        let frac = pos - i as f64;
        self.grid_values[i] + frac * (self.grid_values[i + 1] - self.grid_values[i])
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.path_at(sigmoid(z / self.scale))
    }
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// A frozen random ReLU network with residual hidden blocks:
/// `h₀ = A z + a`, `h_l = h_{l−1} + ReLU(W_l h_{l−1} + b_l)`, output `c·h + c₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDnnTarget {
    pub input: Array2<f64>,
    pub input_bias: Array1<f64>,
    pub blocks: Vec<(Array2<f64>, Array1<f64>)>,
    pub output: Array1<f64>,
    pub output_bias: f64,
}

/// Gaussian weights with variance `1/fan_in`, Gaussian biases with variance
/// `0.1`.
pub fn random_dnn_target(d: usize, depth: usize, width: usize, seed: u64) -> Result<RandomDnnTarget> {
    if depth == 0 || width == 0 || d == 0 {
        return Err(Error::input(
            "random network needs depth, width and input dimension ≥ 1",
        ));
    }
    let mut rng = rng_from(seed);
    let mut gaussian = |fan_in: usize, shape: (usize, usize)| {
        let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("positive scale");
        Array2::from_shape_fn(shape, |_| normal.sample(&mut rng))
    };
    let input = gaussian(d, (width, d));
    let input_bias = gaussian(10, (width, 1)).column(0).to_owned();
    let blocks = (1..depth)
        .map(|_| {
            (
                gaussian(width, (width, width)),
                gaussian(10, (width, 1)).column(0).to_owned(),
            )
        })
        .collect();
    let output = gaussian(width, (1, width)).row(0).to_owned();
    let output_bias = gaussian(10, (1, 1))[[0, 0]];
    Ok(RandomDnnTarget {
        input,
        input_bias,
        blocks,
        output,
        output_bias,
    })
}

impl RandomDnnTarget {
    pub fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut h = self.input.dot(&ndarray::ArrayView1::from(z)) + &self.input_bias;
        h.mapv_inplace(|v| v.max(0.0));
        for (w, b) in &self.blocks {
            let mut inner = w.dot(&h) + b;
            inner.mapv_inplace(|v| v.max(0.0));
            h += &inner;
        }
        self.output.dot(&h) + self.output_bias
    }

    /// The same network with every bias set to zero.
    pub fn without_biases(mut self) -> Self {
        self.input_bias.fill(0.0);
        for (_, b) in &mut self.blocks {
            b.fill(0.0);
        }
        self.output_bias = 0.0;
        self
    }
}

/// Mean and sample standard deviation (`n − 1` denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Centers and scales in place to zero mean and unit sample standard
/// deviation; returns the statistics used. A constant input is only
/// centered.
pub fn standardize(values: &mut [f64]) -> (f64, f64) {
    let (mean, std) = mean_std(values);
    let s = if std > 0.0 { std } else { 1.0 };
    values.iter_mut().for_each(|v| *v = (*v - mean) / s);
    (mean, s)
}
