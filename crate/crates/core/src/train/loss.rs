use serde::{Deserialize, Serialize};

use super::MaskVector;
use crate::error::{Error, Result};

/// Normalization of the masked squared-error objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    /// Divide by the total node count `n`.
    #[default]
    OverN,
    /// Divide by the number of observed nodes.
    OverOmega,
}

impl LossNorm {
    pub(crate) fn denominator(self, mask: &MaskVector) -> f64 {
        match self {
            LossNorm::OverN => mask.len() as f64,
            LossNorm::OverOmega => mask.observed_count() as f64,
        }
    }
}

/// Squared error summed over observed nodes, divided per `norm`.
pub fn masked_mse(pred: &[f64], y: &[f64], mask: &MaskVector, norm: LossNorm) -> Result<f64> {
    if pred.len() != y.len() || y.len() != mask.len() {
        return Err(Error::input(format!(
            "length mismatch: {} predictions, {} responses, mask of {}",
            pred.len(),
            y.len(),
            mask.len()
        )));
    }
    if mask.observed_count() == 0 {
        return Err(Error::input("no observed nodes"));
    }
    let sum: f64 = pred
        .iter()
        .zip(y)
        .zip(mask.omega())
        .filter(|(_, &o)| o)
        .map(|((p, t), _)| (p - t) * (p - t))
        .sum();
    Ok(sum / norm.denominator(mask))
}

/// Unmasked mean squared error over all entries.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::input(format!(
            "cannot compare {} predictions with {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_is_zero() {
        let m = MaskVector::full(3);
        assert_eq!(
            masked_mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &m, LossNorm::OverN).unwrap(),
            0.0
        );
    }

    #[test]
    fn normalizations() {
        let m = MaskVector::from_bools(vec![true, false], 0.5).unwrap();
        let pred = [0.0, 0.0];
        let y = [1.0, 0.0];
        assert_eq!(masked_mse(&pred, &y, &m, LossNorm::OverN).unwrap(), 0.5);
        assert_eq!(masked_mse(&pred, &y, &m, LossNorm::OverOmega).unwrap(), 1.0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let m = MaskVector::from_bools(vec![false, false], 0.5).unwrap();
        assert!(masked_mse(&[0.0, 0.0], &[0.0, 0.0], &m, LossNorm::OverN).is_err());
    }
}
