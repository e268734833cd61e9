use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Bernoulli observation indicators `ω_i ~ Bernoulli(π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskVector {
    omega: Vec<bool>,
    pi: f64,
}

fn check_pi(pi: f64) -> Result<()> {
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::input(format!("inclusion probability {pi} is outside (0, 1]")));
    }
    Ok(())
}

impl MaskVector {
    /// Independent seeded draws; the same `(n, pi, seed)` always gives the
    /// same mask.
    pub fn sample(n: usize, pi: f64, seed: u64) -> Result<Self> {
        check_pi(pi)?;
        let mut rng = rng_from(seed);
        let omega = (0..n).map(|_| rng.random::<f64>() < pi).collect();
        Ok(Self { omega, pi })
    }

    pub fn full(n: usize) -> Self {
        Self {
            omega: vec![true; n],
            pi: 1.0,
        }
    }

    pub fn from_bools(omega: Vec<bool>, pi: f64) -> Result<Self> {
        check_pi(pi)?;
        Ok(Self { omega, pi })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn omega(&self) -> &[bool] {
        &self.omega
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.omega[i]
    }

    pub fn observed_count(&self) -> usize {
        self.omega.iter().filter(|&&o| o).count()
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.omega[i]).collect()
    }

    /// Splits the observed set in two: indices listed in `held_out` become
    /// unobserved in the first mask and form the second. Used to carve a
    /// calibration set out of the training labels.
    pub fn split_off(&self, held_out: &[usize]) -> (Self, Self) {
        let mut train = self.clone();
        let mut calib = vec![false; self.len()];
        for &i in held_out {
            if self.omega[i] {
                train.omega[i] = false;
                calib[i] = true;
            }
        }
        (
            train,
            Self {
                omega: calib,
                pi: self.pi,
            },
        )
    }

    /// Indicator of the unobserved nodes.
    pub fn complement(&self) -> Self {
        Self {
            omega: self.omega.iter().map(|o| !o).collect(),
            pi: self.pi,
        }
    }
}

/// Free-function form of [`MaskVector::sample`].
pub fn sample_mask(n: usize, pi: f64, seed: u64) -> Result<MaskVector> {
    MaskVector::sample(n, pi, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_one_observes_everything() {
        let m = sample_mask(50, 1.0, 9).unwrap();
        assert_eq!(m.observed_count(), 50);
    }

    #[test]
    fn seeded_masks_repeat() {
        assert_eq!(sample_mask(100, 0.3, 5).unwrap(), sample_mask(100, 0.3, 5).unwrap());
        assert_ne!(sample_mask(100, 0.3, 5).unwrap(), sample_mask(100, 0.3, 6).unwrap());
    }

    #[test]
    fn observed_fraction_concentrates() {
        let m = sample_mask(100_000, 0.35, 42).unwrap();
        let frac = m.observed_count() as f64 / 1e5;
        assert!((frac - 0.35).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn invalid_pi_is_rejected() {
        assert!(sample_mask(3, 0.0, 1).is_err());
        assert!(sample_mask(3, 1.5, 1).is_err());
        assert!(MaskVector::from_bools(vec![true], f64::NAN).is_err());
    }

    #[test]
    fn split_moves_observed_nodes_only() {
        let m = MaskVector::from_bools(vec![true, false, true, true], 0.5).unwrap();
        let (train, calib) = m.split_off(&[1, 2]);
        assert_eq!(train.omega(), &[true, false, false, true]);
        assert_eq!(calib.omega(), &[false, false, true, false]);
    }
}
