//! Finite posteriors held as log-weights.

use rand::Rng;

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;

/// Log-sum-exp normalization. Returns log-probabilities in the input order.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(NdbalError::invalid("log-weights must be finite or -inf"));
    }
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NdbalError::EmptyPosterior);
    }
    let sum: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let log_z = max + sum.ln();
    Ok(log_weights.iter().map(|w| w - log_z).collect())
}

/// A distribution over finitely many structures.
///
/// Log-weights are always stored normalized; every constructor and update
/// goes through log-sum-exp so long runs of multiplicative updates never
/// underflow.
#[derive(Debug, Clone)]
pub struct WeightedEnsemble<G> {
    structures: Vec<G>,
    log_weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl<G> WeightedEnsemble<G> {
    pub fn new(structures: Vec<G>, log_weights: Vec<f64>) -> Result<Self> {
        if structures.len() != log_weights.len() {
            return Err(NdbalError::invalid(format!(
                "{} structures but {} log-weights",
                structures.len(),
                log_weights.len()
            )));
        }
        let log_weights = normalize_log_weights(&log_weights)?;
        let cdf = cumulative(&log_weights);
        Ok(WeightedEnsemble {
            structures,
            log_weights,
            cdf,
        })
    }

    pub fn uniform(structures: Vec<G>) -> Result<Self> {
        let n = structures.len();
        WeightedEnsemble::new(structures, vec![0.0; n])
    }

    pub fn from_probabilities(structures: Vec<G>, probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(NdbalError::invalid("probabilities must be finite and >= 0"));
        }
        WeightedEnsemble::new(structures, probs.iter().map(|p| p.ln()).collect())
    }

    pub fn point_mass(g: G) -> Self {
        WeightedEnsemble {
            structures: vec![g],
            log_weights: vec![0.0],
            cdf: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    pub fn structures(&self) -> &[G] {
        &self.structures
    }

    pub fn structure(&self, i: usize) -> &G {
        &self.structures[i]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_weights[i].exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Same structures, new (unnormalized) log-weights.
    pub fn reweighted(&self, log_weights: Vec<f64>) -> Result<Self>
    where
        G: Clone,
    {
        WeightedEnsemble::new(self.structures.clone(), log_weights)
    }

    /// Index drawn with probability equal to its weight.
    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        let u: f64 = rng.random::<f64>();
        let i = self.cdf.partition_point(|c| *c <= u);
        // Guard the top end against rounding in the cumulative sum.
        let mut i = i.min(self.cdf.len() - 1);
        while self.log_weights[i] == f64::NEG_INFINITY && i > 0 {
            i -= 1;
        }
        i
    }
}

fn cumulative(log_weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = log_weights
        .iter()
        .map(|w| {
            acc += w.exp();
            acc
        })
        .collect();
    let total = acc;
    for c in cdf.iter_mut() {
        *c /= total;
    }
    cdf
}

/// Re-normalizes an ensemble. Stored weights are already normalized, so this
/// only re-runs log-sum-exp to squeeze out accumulated rounding.
pub fn normalize<G: Clone>(e: &WeightedEnsemble<G>) -> Result<WeightedEnsemble<G>> {
    WeightedEnsemble::new(e.structures.clone(), e.log_weights.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn symmetric_weights_normalize_to_half() {
        let e = WeightedEnsemble::new(vec!['a', 'b'], vec![0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(e.weight(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.weight(1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn softmax_of_zero_and_minus_one() {
        let e = WeightedEnsemble::new(vec![0, 1], vec![0.0, -1.0]).unwrap();
        let z = 1.0 + (-1.0f64).exp();
        assert_abs_diff_eq!(e.weight(0), 1.0 / z, epsilon = 1e-15);
        assert_abs_diff_eq!(e.weight(1), (-1.0f64).exp() / z, epsilon = 1e-15);
        assert_abs_diff_eq!(e.weight(0), 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(e.weight(1), 0.2689, epsilon = 1e-4);
    }

    #[test]
    fn extreme_log_weights_do_not_overflow() {
        let e = WeightedEnsemble::new(vec![0, 1], vec![-1000.0, 0.0]).unwrap();
        assert!(e.weight(0) < 1e-300);
        assert_abs_diff_eq!(e.weight(1), 1.0, epsilon = 1e-15);
        assert!(e.log_weights().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn all_minus_infinity_is_empty_posterior() {
        let r = WeightedEnsemble::new(vec![0, 1], vec![f64::NEG_INFINITY; 2]);
        assert_eq!(r.unwrap_err(), NdbalError::EmptyPosterior);
    }

    #[test]
    fn sampling_skips_zero_weight_entries() {
        let e = WeightedEnsemble::new(vec![0, 1, 2], vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY])
            .unwrap();
        let mut rng = RngStream::new(3, "t");
        for _ in 0..1000 {
            assert_eq!(e.sample_index(&mut rng), 1);
        }
    }

    proptest! {
        #[test]
        fn normalized_weights_sum_to_one(ws in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let e = WeightedEnsemble::new((0..ws.len()).collect(), ws.clone()).unwrap();
            let s: f64 = e.probabilities().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            // order preserved: ranks of weights unchanged
            for i in 0..ws.len() {
                for j in 0..ws.len() {
                    if ws[i] < ws[j] {
                        prop_assert!(e.log_weights()[i] < e.log_weights()[j]);
                    }
                }
            }
        }
    }
}
