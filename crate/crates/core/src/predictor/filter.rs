//! Softmax filtering of a large generated pool down to the population that
//! actually gets evaluated.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optim::lmmaes::SampledCandidate;
use crate::predictor::classifier::NeuralClassifier;

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Samples `take` distinct indices without replacement, proportional to the
/// softmax of `scores` (renormalized after each pick). Selection order is
/// the returned order.
pub fn select_by_scores(scores: &[f64], take: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if take > scores.len() {
        return Err(Error::invalid(
            "take",
            format!("cannot select {take} from a pool of {}", scores.len()),
        ));
    }
    let mut weights = softmax(scores);
    let mut available: Vec<usize> = (0..scores.len()).collect();
    let mut selected = Vec::with_capacity(take);
    for _ in 0..take {
        let total: f64 = available.iter().map(|&i| weights[i]).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = available.len() - 1;
        for (slot, &i) in available.iter().enumerate() {
            u -= weights[i];
            if u <= 0.0 {
                pick = slot;
                break;
            }
        }
        let idx = available.swap_remove(pick);
        weights[idx] = 0.0;
        selected.push(idx);
    }
    Ok(selected)
}

/// Result of filtering: the selected candidates (with their classifier
/// scores, recorded for the accuracy monitor) and the pool-wide mean score.
#[derive(Debug, Clone)]
pub struct FilteredPopulation {
    pub candidates: Vec<SampledCandidate>,
    pub scores: Vec<f64>,
    pub mean_pool_score: f64,
}

/// Scores the pool with the classifier in inference mode, converts the
/// score vector through softmax, and samples `lambda` distinct candidates.
pub fn filter_candidates(
    classifier: &NeuralClassifier,
    pool: Vec<SampledCandidate>,
    lambda: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FilteredPopulation> {
    if pool.len() < lambda {
        return Err(Error::invalid(
            "lambda",
            format!("pool of {} is smaller than lambda {}", pool.len(), lambda),
        ));
    }
    debug_assert!(pool.iter().all(|c| c.fitness.is_none()), "pool must be unevaluated");
    let latents: Vec<&[f64]> = pool.iter().map(|c| c.latent.as_slice()).collect();
    let scores = classifier.score_batch(&latents)?;
    let mean_pool_score = scores.iter().sum::<f64>() / scores.len() as f64;
    let picks = select_by_scores(&scores, lambda, rng)?;

    let mut taken: Vec<Option<SampledCandidate>> = pool.into_iter().map(Some).collect();
    let mut candidates = Vec::with_capacity(lambda);
    let mut picked_scores = Vec::with_capacity(lambda);
    for idx in picks {
        candidates.push(taken[idx].take().expect("indices are distinct"));
        picked_scores.push(scores[idx]);
    }
    Ok(FilteredPopulation { candidates, scores: picked_scores, mean_pool_score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn softmax_of_constants_is_uniform() {
        let p = softmax(&[0.4; 8]);
        assert!(p.iter().all(|&v| (v - 0.125).abs() < 1e-12));
    }

    #[test]
    fn selection_returns_distinct_indices_of_requested_size() {
        let mut rng = substream(0, "filter");
        let scores: Vec<f64> = (0..50).map(|i| (i as f64) / 50.0).collect();
        let picks = select_by_scores(&scores, 10, &mut rng).unwrap();
        assert_eq!(picks.len(), 10);
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn take_larger_than_pool_errors() {
        let mut rng = substream(1, "filter");
        assert!(select_by_scores(&[0.1, 0.2], 3, &mut rng).is_err());
    }

    #[test]
    fn dominant_score_is_almost_always_selected() {
        // one pre-softmax score 50 above the rest
        let mut scores = vec![0.0; 40];
        scores[17] = 50.0;
        let mut rng = substream(2, "filter");
        let mut hits = 0;
        let trials = 2_000;
        for _ in 0..trials {
            let picks = select_by_scores(&scores, 5, &mut rng).unwrap();
            if picks.contains(&17) {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!(freq > 0.99, "dominant candidate selected with frequency {freq}");
    }

    #[test]
    fn equal_scores_sample_uniformly() {
        // chi-square goodness-of-fit over single picks from a uniform pool
        let scores = vec![0.3; 20];
        let mut rng = substream(3, "filter");
        let trials = 10_000;
        let mut counts = vec![0usize; 20];
        for _ in 0..trials {
            let picks = select_by_scores(&scores, 1, &mut rng).unwrap();
            counts[picks[0]] += 1;
        }
        let expected = trials as f64 / 20.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 19 degrees of freedom; critical value at significance 0.001 is 43.82
        assert!(chi2 < 43.82, "chi-square statistic {chi2}");
    }
}
