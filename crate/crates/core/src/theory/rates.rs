use crate::error::{Error, Result};

/// Smoothness description of a composition `g_q ∘ … ∘ g_0` where stage `i`
/// is `α_i`-Hölder in `t_i` active variables out of `d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessSpec {
    pub q: usize,
    pub d_vec: Vec<usize>,
    pub t_vec: Vec<usize>,
    pub alpha_vec: Vec<f64>,
    /// `α_i* = α_i Π_{ℓ>i} (α_ℓ ∧ 1)`.
    pub alpha_star: Vec<f64>,
}

pub fn effective_smoothness(d_vec: Vec<usize>, t_vec: Vec<usize>, alpha_vec: Vec<f64>) -> Result<SmoothnessSpec> {
    let len = alpha_vec.len();
    if len == 0 || t_vec.len() != len || d_vec.len() != len {
        return Err(Error::input("d, t and α vectors must share a positive length q + 1"));
    }
    if alpha_vec.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::input("smoothness exponents must be positive"));
    }
    if t_vec.contains(&0) {
        return Err(Error::input("active dimensions must be positive"));
    }
    let mut alpha_star = vec![0.0; len];
    let mut tail = 1.0;
    for i in (0..len).rev() {
        alpha_star[i] = alpha_vec[i] * tail;
        tail *= alpha_vec[i].min(1.0);
    }
    Ok(SmoothnessSpec {
        q: len - 1,
        d_vec,
        t_vec,
        alpha_vec,
        alpha_star,
    })
}

impl SmoothnessSpec {
    /// Per-stage exponents `−2α_i*/(2α_i* + t_i)`.
    pub fn stage_exponents(&self) -> Vec<f64> {
        self.alpha_star
            .iter()
            .zip(&self.t_vec)
            .map(|(&a, &t)| -2.0 * a / (2.0 * a + t as f64))
            .collect()
    }

    /// Exponent of the slowest stage, i.e. the predicted log-log slope of
    /// risk against `n`.
    pub fn rate_exponent(&self) -> f64 {
        self.stage_exponents().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(m² log³ n / π) · max_i n^{−2α_i*/(2α_i*+t_i)}` with the constant dropped.
pub fn predicted_rate(spec: &SmoothnessSpec, n: usize, m: usize, pi: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::input("predicted rate needs n ≥ 2"));
    }
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::input(format!("label fraction {pi} outside (0, 1]")));
    }
    let nf = n as f64;
    let decay = spec
        .stage_exponents()
        .into_iter()
        .map(|e| nf.powf(e))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((m as f64).powi(2) * nf.ln().powi(3) / pi * decay)
}
