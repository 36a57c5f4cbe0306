use crate::error::{Error, Result};

/// Floor applied inside the logarithm of the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// Softmax with max subtraction.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `-Σ gold_i · ln(max(probs_i, LOG_FLOOR))`. Several gold entries may be set.
pub fn cross_entropy(probs: &[f64], gold: &[f64]) -> Result<f64> {
    if probs.len() != gold.len() {
        return Err(Error::dim("gold indicator", probs.len(), gold.len()));
    }
    if probs.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    Ok(-probs
        .iter()
        .zip(gold)
        .filter(|(_, &d)| d != 0.0)
        .map(|(&p, &d)| d * p.max(LOG_FLOOR).ln())
        .sum::<f64>())
}

/// Index of the largest entry; ties go to the largest index.
pub fn argmax_last(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] > v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_empty_is_error() {
        assert!(matches!(softmax(&[]), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn softmax_uniform_and_singleton() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax(&[123.4]).unwrap(), vec![1.0]);
        assert_eq!(softmax(&[-800.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn softmax_large_inputs_stay_finite() {
        let p = softmax(&[1000.0, 999.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_cases() {
        assert_eq!(cross_entropy(&[1.0], &[1.0]).unwrap(), 0.0);
        assert!((cross_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let zero = cross_entropy(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(zero.is_finite());
        assert!((zero + LOG_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn argmax_prefers_last_on_ties() {
        assert_eq!(argmax_last(&[0.5, 0.5]), Some(1));
        assert_eq!(argmax_last(&[0.7, 0.2, 0.1]), Some(0));
        assert_eq!(argmax_last(&[]), None);
    }
}
