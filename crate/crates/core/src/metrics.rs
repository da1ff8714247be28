//! Distance error, traces and a seeded k-means evaluator.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm, DenseMatrix, EigenPair};

/// Sign-aligned distance between a unit reference and the normalized `u`.
/// Lies in `[0, √2]`.
pub fn distance_error(u_ref: &[f64], u: &[f64]) -> Result<f64> {
    if u_ref.len() != u.len() {
        return Err(Error::DimensionMismatch {
            left: u_ref.len(),
            right: u.len(),
        });
    }
    let len = norm(u);
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::ZeroVector);
    }
    let (mut plus, mut minus) = (0.0, 0.0);
    for (r, x) in u_ref.iter().zip(u) {
        let x = x / len;
        plus += (r - x) * (r - x);
        minus += (r + x) * (r + x);
    }
    Ok(plus.min(minus).sqrt())
}

/// Column-wise sign-aligned distance between two `n×k` bases, combined as a
/// Frobenius norm.
pub fn subspace_distance(reference: &[Vec<f64>], other: &[Vec<f64>]) -> Result<f64> {
    if reference.len() != other.len() {
        return Err(Error::DimensionMismatch {
            left: reference.len(),
            right: other.len(),
        });
    }
    let mut total = 0.0;
    for (r, o) in reference.iter().zip(other) {
        total += distance_error(r, o)?.powi(2);
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm started from `k` distinct rows sampled with `seed`.
pub fn kmeans(z: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let n = z.rows();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of points {n}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = sample(&mut rng, n, k)
        .into_iter()
        .map(|i| z.row(i).to_vec())
        .collect();
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let row = z.row(i);
            let (best, d) = centroids.iter().map(|c| sq_dist(row, c)).enumerate().fold(
                (0, f64::INFINITY),
                |acc, (j, d)| if d < acc.1 { (j, d) } else { acc },
            );
            if *label != best {
                *label = best;
                changed = true;
            }
            inertia += d;
        }
        history.push(inertia);
        iterations += 1;
        if !changed || iterations >= max_iters {
            return Ok(KMeansResult {
                labels,
                centroids,
                inertia,
                iterations,
                inertia_history: history,
            });
        }

        let d = z.cols();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            sums[l].iter_mut().zip(z.row(i)).for_each(|(s, v)| *s += v);
        }
        let mut taken = vec![false; n];
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .map(|i| (i, sq_dist(z.row(i), &centroids[labels[i]])))
                    .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
                        Some((_, best)) if best >= d => acc,
                        _ => Some((i, d)),
                    });
                if let Some((i, _)) = far {
                    taken[i] = true;
                    centroids[j] = z.row(i).to_vec();
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Unit-normalized federated vector (client consensus in decentralized
    /// runs).
    pub federated_vector: Vec<f64>,
    /// Per-client normalized merge results; empty for server runs.
    pub client_vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub distance_error: f64,
    pub scalars_sent: u64,
    /// Wall-clock seconds.
    pub elapsed: f64,
}

/// Per-round history of a federated run with a fixed number of slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    capacity: usize,
    pub rounds: Vec<RoundRecord>,
    pub final_pair: Option<EigenPair>,
}

/// Inputs of one [`RunTrace::record_round`] call.
#[derive(Debug, Clone)]
pub struct RoundObservation {
    pub federated_vector: Vec<f64>,
    pub client_vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub scalars_sent: u64,
    pub elapsed: f64,
}

impl RunTrace {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            rounds: Vec::with_capacity(capacity),
            final_pair: None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() == self.capacity
    }

    /// Appends a round. The distance error is taken against `u_ref`; when
    /// client vectors are present it is their mean distance.
    pub fn record_round(&mut self, obs: RoundObservation, u_ref: &[f64]) -> Result<&RoundRecord> {
        if self.rounds.len() >= self.capacity {
            return Err(Error::TraceFull(self.capacity));
        }
        let distance_error = if obs.client_vectors.is_empty() {
            distance_error(u_ref, &obs.federated_vector)?
        } else {
            let mut total = 0.0;
            for v in &obs.client_vectors {
                total += distance_error(u_ref, v)?;
            }
            total / obs.client_vectors.len() as f64
        };
        self.rounds.push(RoundRecord {
            round: self.rounds.len(),
            federated_vector: obs.federated_vector,
            client_vectors: obs.client_vectors,
            weights: obs.weights,
            distance_error,
            scalars_sent: obs.scalars_sent,
            elapsed: obs.elapsed.max(0.0),
        });
        Ok(self.rounds.last().expect("just pushed"))
    }

    pub fn distance_series(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.distance_error).collect()
    }

    pub fn total_scalars(&self) -> u64 {
        self.rounds.iter().map(|r| r.scalars_sent).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let e1 = [1.0, 0.0, 0.0];
        assert_eq!(distance_error(&e1, &e1).unwrap(), 0.0);
        assert_eq!(distance_error(&e1, &[-1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(distance_error(&e1, &[0.0, 1.0, 0.0]).unwrap(), 2f64.sqrt());
        assert!(matches!(
            distance_error(&e1, &[0.0; 3]),
            Err(Error::ZeroVector)
        ));
        assert_eq!(distance_error(&e1, &[5.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn kmeans_separable_pairs() {
        let z =
            DenseMatrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [10.0, 10.0], [10.0, 10.0]]).unwrap();
        for seed in 0..10 {
            let r = kmeans(&z, 2, seed, 50).unwrap();
            assert_eq!(r.inertia, 0.0);
            assert_eq!(r.labels[0], r.labels[1]);
            assert_eq!(r.labels[2], r.labels[3]);
            assert_ne!(r.labels[0], r.labels[2]);
        }
    }

    #[test]
    fn kmeans_k_equals_n_and_one() {
        let z = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 6.0], [5.0, 1.0]]).unwrap();
        assert_eq!(kmeans(&z, 3, 4, 10).unwrap().inertia, 0.0);
        let one = kmeans(&z, 1, 4, 10).unwrap();
        assert!(one.centroids[0]
            .iter()
            .zip([3.0, 3.0])
            .all(|(a, b)| (a - b).abs() < 1e-12));
        // squared deviations: x → 4+0+4, y → 1+9+4
        assert!((one.inertia - 22.0).abs() < 1e-12);
        assert!(kmeans(&z, 4, 0, 10).is_err());
    }

    #[test]
    fn trace_accounting() {
        let mut t = RunTrace::new(1);
        let obs = RoundObservation {
            federated_vector: vec![1.0, 0.0],
            client_vectors: vec![],
            weights: vec![1.0],
            scalars_sent: 3 * 101 + 3 * 100,
            elapsed: 0.0,
        };
        let rec = t.record_round(obs.clone(), &[1.0, 0.0]).unwrap();
        assert_eq!(rec.scalars_sent, 603);
        assert!(rec.elapsed >= 0.0);
        assert!(t.is_complete());
        assert!(matches!(
            t.record_round(obs, &[1.0, 0.0]),
            Err(Error::TraceFull(1))
        ));
    }

    proptest! {
        #[test]
        fn distance_scale_invariant(v in prop::collection::vec(-5.0f64..5.0, 4), c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
            prop_assume!(norm(&v) > 1e-3);
            let r: Vec<f64> = vec![0.5; 4];
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let a = distance_error(&r, &v).unwrap();
            let b = distance_error(&r, &scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&a));
        }

        #[test]
        fn distance_symmetric_for_unit_inputs(a in prop::collection::vec(-5.0f64..5.0, 5), b in prop::collection::vec(-5.0f64..5.0, 5)) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let ua: Vec<f64> = a.iter().map(|x| x / norm(&a)).collect();
            let ub: Vec<f64> = b.iter().map(|x| x / norm(&b)).collect();
            let d1 = distance_error(&ua, &ub).unwrap();
            let d2 = distance_error(&ub, &ua).unwrap();
            prop_assert!((d1 - d2).abs() <= 1e-12);
        }

        #[test]
        fn kmeans_inertia_non_increasing(data in prop::collection::vec(-10.0f64..10.0, 40), k in 1usize..6, seed in any::<u64>()) {
            let z = DenseMatrix::new(20, 2, data).unwrap();
            let r = kmeans(&z, k, seed, 100).unwrap();
            prop_assert!(r.labels.iter().all(|&l| l < k));
            for w in r.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            prop_assert_eq!(r.clone(), kmeans(&z, k, seed, 100).unwrap());
        }
    }
}
