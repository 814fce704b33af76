//! Lloyd's k-means with k-means++ seeding, restarts, and inertia-based
//! selection. Clustering runs in plain euclidean space; callers measure
//! coverage with whatever metric the benchmark uses.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::EmbeddingVector;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 300;
pub const INERTIA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// k-means++ seeding. When every remaining point has zero distance to the
/// chosen set (duplicates, or k close to n), the next seed is drawn
/// uniformly from the unchosen points.
fn seed_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen_idx: Vec<usize> = Vec::with_capacity(k);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    chosen_idx.push(first);
    centroids.push(points[first].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining distances are zero: pick uniformly among unchosen
            let unchosen: Vec<usize> = (0..n).filter(|i| !chosen_idx.contains(i)).collect();
            unchosen[rng.random_range(0..unchosen.len())]
        };
        chosen_idx.push(next);
        centroids.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centroids.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> KMeansResult {
    let n = points.len();
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let mut new_inertia = 0.0;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (a, d) = nearest(p, &centroids);
            if assignments[i] != a {
                assignments[i] = a;
                changed = true;
            }
            new_inertia += d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (s, v) in sums[assignments[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for (c, (sum, &count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if count > 0 {
                for (cv, sv) in c.iter_mut().zip(sum) {
                    *cv = sv / count as f64;
                }
            }
        }
        // re-seed empty clusters on the point farthest from its centroid
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(points[a], &centroids[assignments[a]])
                            .partial_cmp(&sq_dist(points[b], &centroids[assignments[b]]))
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                centroids[j] = points[far].to_vec();
                changed = true;
            }
        }
        let converged = !changed || (inertia - new_inertia).abs() < INERTIA_TOLERANCE;
        inertia = new_inertia;
        if converged {
            break;
        }
    }
    KMeansResult { centroids, assignments, inertia, iterations }
}

/// Best-of-`restarts` k-means (by inertia; ties keep the earlier restart).
pub fn kmeans(
    embeddings: &[EmbeddingVector],
    k: usize,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KMeansResult> {
    if embeddings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k < 1 || k > embeddings.len() {
        return Err(Error::invalid(
            "k",
            format!("need 1 <= k <= n, got k={k}, n={}", embeddings.len()),
        ));
    }
    if restarts < 1 {
        return Err(Error::invalid("restarts", "must be >= 1"));
    }
    let points: Vec<&[f64]> = embeddings.iter().map(|e| e.as_slice()).collect();
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts {
        let centroids = seed_plus_plus(&points, k, rng);
        let result = lloyd(&points, centroids);
        let better = match &best {
            Some(b) => result.inertia < b.inertia,
            None => true,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn ev(v: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::new(v)
    }

    #[test]
    fn separable_clusters_are_found() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(ev(vec![10.0 + 0.1 * i as f64, 0.0]));
            pts.push(ev(vec![-10.0 - 0.1 * i as f64, 0.0]));
        }
        let mut rng = substream(0, "km");
        let res = kmeans(&pts, 2, 5, &mut rng).unwrap();
        // all even indices together, all odd together
        let a = res.assignments[0];
        assert!(res.assignments.iter().step_by(2).all(|&x| x == a));
        assert!(res.assignments.iter().skip(1).step_by(2).all(|&x| x != a));
        // per side: 2·(0.45² + 0.35² + 0.25² + 0.15² + 0.05²) around ±10.45
        assert!((res.inertia - 1.65).abs() < 1e-9);
    }

    #[test]
    fn k_equal_n_gives_zero_inertia() {
        let pts: Vec<EmbeddingVector> = (0..6).map(|i| ev(vec![i as f64, 1.0])).collect();
        let mut rng = substream(1, "km");
        let res = kmeans(&pts, 6, 3, &mut rng).unwrap();
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn duplicates_do_not_break_seeding() {
        let pts: Vec<EmbeddingVector> = (0..8).map(|_| ev(vec![1.0, 2.0])).collect();
        let mut rng = substream(2, "km");
        let res = kmeans(&pts, 8, 2, &mut rng).unwrap();
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn invalid_k_rejected() {
        let pts = vec![ev(vec![0.0]), ev(vec![1.0])];
        let mut rng = substream(3, "km");
        assert!(kmeans(&pts, 0, 1, &mut rng).is_err());
        assert!(kmeans(&pts, 3, 1, &mut rng).is_err());
    }

    #[test]
    fn deterministic_for_fixed_stream() {
        let pts: Vec<EmbeddingVector> =
            (0..30).map(|i| ev(vec![(i % 5) as f64, (i / 5) as f64])).collect();
        let mut r1 = substream(4, "km");
        let mut r2 = substream(4, "km");
        let a = kmeans(&pts, 4, 10, &mut r1).unwrap();
        let b = kmeans(&pts, 4, 10, &mut r2).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.inertia, b.inertia);
    }
}
