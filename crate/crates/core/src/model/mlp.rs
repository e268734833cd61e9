use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Truncated ReLU network `h(z) = clamp(Θ_L ∘ ReLU ∘ … ∘ ReLU ∘ Θ_0(z), −F, F)`.
///
/// `weights[l]` has shape `widths[l+1] × widths[l]` so that
/// `Θ_l(y) = weights[l]·y + biases[l]`. The last width is always 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub widths: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub f_trunc: f64,
}

/// Activations recorded during a batched forward pass.
pub(crate) struct MlpCache {
    /// Input to each affine layer; `acts[0]` is the network input.
    pub acts: Vec<Array2<f64>>,
    /// Output before truncation.
    pub out: Array1<f64>,
}

impl MlpParams {
    pub fn zeros(widths: Vec<usize>, f_trunc: f64) -> Result<Self> {
        Self::validate_widths(&widths, f_trunc)?;
        let weights = widths.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect();
        let biases = widths[1..].iter().map(|&w| Array1::zeros(w)).collect();
        Ok(Self {
            widths,
            weights,
            biases,
            f_trunc,
        })
    }

    /// Weights uniform on `[−1/√fan_in, 1/√fan_in]`, biases zero.
    pub fn init<R: Rng + ?Sized>(widths: Vec<usize>, f_trunc: f64, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(widths, f_trunc)?;
        for m in &mut p.weights {
            let bound = 1.0 / (m.ncols() as f64).sqrt();
            m.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(p)
    }

    fn validate_widths(widths: &[usize], f_trunc: f64) -> Result<()> {
        if widths.len() < 2 {
            return Err(Error::input("width vector needs input and output entries"));
        }
        if widths.contains(&0) {
            return Err(Error::input("layer widths must be positive"));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::input("readout must have a scalar output"));
        }
        if f_trunc.is_nan() || f_trunc < 1.0 {
            return Err(Error::input(format!("truncation level {f_trunc} must be ≥ 1")));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|m| m.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn forward_one(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.input_width() {
            return Err(Error::input(format!(
                "input width {} does not match p_0 = {}",
                z.len(),
                self.input_width()
            )));
        }
        let batch = ArrayView2::from_shape((1, z.len()), z).expect("contiguous slice");
        Ok(self.forward_batch(batch)[0])
    }

    /// Applies the network to every row of `z`.
    pub fn forward_batch(&self, z: ArrayView2<'_, f64>) -> Array1<f64> {
        let f = self.f_trunc;
        self.forward_cached(z).out.mapv(|v| v.clamp(-f, f))
    }

    pub(crate) fn forward_cached(&self, z: ArrayView2<'_, f64>) -> MlpCache {
        debug_assert_eq!(z.ncols(), self.input_width());
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len());
        acts.push(z.to_owned());
        for l in 0..last {
            let mut pre = acts[l].dot(&self.weights[l].t());
            pre += &self.biases[l];
            pre.mapv_inplace(|v| v.max(0.0));
            acts.push(pre);
        }
        let mut out = acts[last].dot(&self.weights[last].t());
        out += &self.biases[last];
        let out = out.index_axis_move(Axis(1), 0);
        MlpCache { acts, out }
    }

    /// Reverse pass. `dpred` is the loss derivative w.r.t. the truncated
    /// outputs; the truncation passes gradient only strictly inside
    /// `(−F, F)`, and ReLU passes it only where the pre-activation is
    /// positive. Returns the parameter gradient and the input gradient.
    pub(crate) fn backward(&self, cache: &MlpCache, dpred: &Array1<f64>) -> (MlpParams, Array2<f64>) {
        let f = self.f_trunc;
        let mut grad = Self {
            widths: self.widths.clone(),
            weights: Vec::with_capacity(self.weights.len()),
            biases: Vec::with_capacity(self.biases.len()),
            f_trunc: self.f_trunc,
        };
        let dout: Array1<f64> = cache
            .out
            .iter()
            .zip(dpred)
            .map(|(&o, &g)| if o > -f && o < f { g } else { 0.0 })
            .collect();
        let mut dpre = dout.insert_axis(Axis(1));
        let mut rev_w = Vec::with_capacity(self.weights.len());
        let mut rev_b = Vec::with_capacity(self.weights.len());
        for l in (0..self.weights.len()).rev() {
            rev_w.push(dpre.t().dot(&cache.acts[l]));
            rev_b.push(dpre.sum_axis(Axis(0)));
            let mut dact = dpre.dot(&self.weights[l]);
            if l > 0 {
                ndarray::Zip::from(&mut dact).and(&cache.acts[l]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            dpre = dact;
        }
        rev_w.reverse();
        rev_b.reverse();
        grad.weights = rev_w;
        grad.biases = rev_b;
        (grad, dpre)
    }

    pub(crate) fn for_each_param(&self, f: &mut dyn FnMut(f64)) {
        for (m, b) in self.weights.iter().zip(&self.biases) {
            m.iter().for_each(|v| f(*v));
            b.iter().for_each(|v| f(*v));
        }
    }

    pub(crate) fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        for (m, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            m.iter_mut().for_each(&mut *f);
            b.iter_mut().for_each(&mut *f);
        }
    }

    /// Count of weights and biases with magnitude strictly above `eps`.
    pub fn effective_sparsity(&self, eps: f64) -> usize {
        let mut count = 0;
        self.for_each_param(&mut |v| {
            if v.abs() > eps {
                count += 1;
            }
        });
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(vec![3, 4, 1], 1.0).unwrap();
        assert_eq!(p.forward_one(&[0.3, -1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_affine_layer_is_identity() {
        let mut p = MlpParams::zeros(vec![1, 1], 1.0).unwrap();
        p.weights[0][[0, 0]] = 1.0;
        assert_eq!(p.forward_one(&[0.3]).unwrap(), 0.3);
    }

    #[test]
    fn output_is_clamped() {
        let mut p = MlpParams::zeros(vec![1, 1], 2.0).unwrap();
        p.biases[0][0] = 5.0;
        assert_eq!(p.forward_one(&[0.0]).unwrap(), 2.0);
        p.biases[0][0] = -5.0;
        assert_eq!(p.forward_one(&[0.0]).unwrap(), -2.0);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let p = MlpParams::zeros(vec![2, 1], 1.0).unwrap();
        assert!(p.forward_one(&[1.0]).is_err());
        assert!(MlpParams::zeros(vec![2, 3], 1.0).is_err());
        assert!(MlpParams::zeros(vec![2, 1], 0.5).is_err());
    }

    #[test]
    fn hidden_relu_by_hand() {
        // h(z) = 1·relu(z1 − z2) + 2·relu(−z1) + 0.5
        let mut p = MlpParams::zeros(vec![2, 2, 1], 10.0).unwrap();
        p.weights[0] = array![[1.0, -1.0], [-1.0, 0.0]];
        p.weights[1] = array![[1.0, 2.0]];
        p.biases[1][0] = 0.5;
        assert_eq!(p.forward_one(&[3.0, 1.0]).unwrap(), 2.5);
        assert_eq!(p.forward_one(&[-1.0, 1.0]).unwrap(), 2.5);
    }

    #[test]
    fn sparsity_uses_strict_threshold() {
        let mut p = MlpParams::zeros(vec![2, 1], 1.0).unwrap();
        assert_eq!(p.effective_sparsity(1e-8), 0);
        p.weights[0][[0, 0]] = 0.5;
        assert_eq!(p.effective_sparsity(1e-8), 1);
        p.weights[0][[0, 1]] = 1e-8;
        assert_eq!(p.effective_sparsity(1e-8), 1);
    }
}
