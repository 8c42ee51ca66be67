use rand::Rng;

use crate::error::{MonasError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub index: usize,
    pub log_prob: f64,
    pub probs: Vec<f64>,
}

fn check(logits: &[f64]) -> Result<f64> {
    if logits.is_empty() {
        return Err(MonasError::contract("softmax over empty logits"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(MonasError::contract("softmax logits must be finite"));
    }
    Ok(logits.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let max = check(logits)?;
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let max = check(logits)?;
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|v| v - lse).collect())
}

/// Draws one index from `softmax(logits)` by inverse CDF on a single uniform.
pub fn softmax_sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Result<Sample> {
    let probs = softmax(logits)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut index = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            index = k;
            break;
        }
    }
    let log_prob = log_softmax(logits)?[index];
    Ok(Sample {
        index,
        log_prob,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_for_equal_logits() {
        let p = softmax(&[0.3; 5]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = softmax_sample(&[500.0, -500.0, -500.0], &mut rng).unwrap();
            assert_eq!(s.index, 0);
            assert!(s.log_prob.abs() < 1e-300);
        }
    }

    #[test]
    fn empty_logits_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(softmax_sample(&[], &mut rng).is_err());
    }

    #[test]
    fn empirical_frequencies_match() {
        let logits = [0.1, 0.3, -0.2];
        let z: f64 = logits.iter().map(|v: &f64| v.exp()).sum();
        let expected: Vec<f64> = logits.iter().map(|v| v.exp() / z).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[softmax_sample(&logits, &mut rng).unwrap().index] += 1;
        }
        for k in 0..3 {
            let freq = counts[k] as f64 / n as f64;
            assert!(
                (freq - expected[k]).abs() < 0.01,
                "{k}: {freq} vs {}",
                expected[k]
            );
        }
    }

    #[test]
    fn log_prob_matches_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = softmax_sample(&[1.0, 2.0, 3.0, -1.0], &mut rng).unwrap();
        assert!((s.log_prob - s.probs[s.index].ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sums_to_one(logits in proptest::collection::vec(-700.0f64..700.0, 1..40)) {
            let p = softmax(&logits).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
