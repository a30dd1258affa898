//! Exact brute-force k-nearest-neighbor baseline over flattened tensors.

use crate::error::{Error, Result};
use crate::signal::GestureClass;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    k: usize,
    dim: usize,
    points: Vec<f64>,
    labels: Vec<GestureClass>,
}

impl KnnIndex {
    pub fn new(k: usize, points: Vec<Vec<f64>>, labels: Vec<GestureClass>) -> Result<Self> {
        if k == 0 {
            return Err(Error::ConfigInvalid("k must be >= 1".into()));
        }
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != points.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: labels.len(),
            });
        }
        let dim = points[0].len();
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        Ok(Self {
            k,
            dim,
            points: flat,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Majority label among the `k` nearest points (Euclidean). Equal
    /// distances prefer the lower point index; equal votes prefer the lower
    /// class index.
    pub fn classify(&self, query: &[f64]) -> Result<GestureClass> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let k = self.k.min(self.len());
        // (squared distance, index), kept sorted; k is small
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, p) in self.points.chunks_exact(self.dim).enumerate() {
            let d: f64 = p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            // insert after any equal distances so earlier indices win ties
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        let mut votes = [0usize; GestureClass::COUNT];
        for &(_, i) in &best {
            votes[self.labels[i].index()] += 1;
        }
        let mut winner = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[winner] {
                winner = c;
            }
        }
        Ok(GestureClass::from_index(winner).unwrap_or_default())
    }
}

/// Convenience: [`KnnIndex::classify`] as a free function.
pub fn knn_classify(index: &KnnIndex, query: &[f64]) -> Result<GestureClass> {
    index.classify(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use GestureClass::*;

    /// Sort every distance, take k, vote.
    fn oracle(points: &[Vec<f64>], labels: &[GestureClass], k: usize, q: &[f64]) -> GestureClass {
        let mut d: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = [0; 4];
        for &(_, i) in d.iter().take(k) {
            votes[labels[i].index()] += 1;
        }
        let max = *votes.iter().max().unwrap();
        GestureClass::from_index(votes.iter().position(|&v| v == max).unwrap()).unwrap()
    }

    #[test]
    fn exact_match_with_k1() {
        let idx = KnnIndex::new(1, vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![Push, Grab]).unwrap();
        assert_eq!(idx.classify(&[1.0, 1.0]).unwrap(), Grab);
    }

    #[test]
    fn vote_tie_goes_to_lower_class() {
        let idx = KnnIndex::new(2, vec![vec![1.0], vec![-1.0], vec![10.0]], vec![Grab, Push, NoContact]).unwrap();
        assert_eq!(idx.classify(&[0.0]).unwrap(), Push);
    }

    #[test]
    fn distance_tie_goes_to_lower_index() {
        let idx = KnnIndex::new(1, vec![vec![1.0], vec![-1.0]], vec![Grab, Push]).unwrap();
        assert_eq!(idx.classify(&[0.0]).unwrap(), Grab);
    }

    #[test]
    fn agrees_with_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let points: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<GestureClass> = (0..50)
            .map(|_| GestureClass::from_index(rng.random_range(0..4)).unwrap())
            .collect();
        let idx = KnnIndex::new(5, points.clone(), labels.clone()).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(idx.classify(&q).unwrap(), oracle(&points, &labels, 5, &q));
        }
    }

    #[test]
    fn permutation_invariant_with_distinct_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<GestureClass> = (0..30).map(|i| GestureClass::from_index(i % 4).unwrap()).collect();
        let a = KnnIndex::new(3, points.clone(), labels.clone()).unwrap();
        let b = KnnIndex::new(
            3,
            points.into_iter().rev().collect(),
            labels.into_iter().rev().collect(),
        )
        .unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(a.classify(&q).unwrap(), b.classify(&q).unwrap());
        }
    }

    #[test]
    fn errors() {
        assert!(KnnIndex::new(0, vec![vec![1.0]], vec![Push]).is_err());
        assert!(matches!(KnnIndex::new(1, vec![], vec![]), Err(Error::EmptyDataset)));
        assert!(matches!(
            KnnIndex::new(1, vec![vec![1.0], vec![1.0, 2.0]], vec![Push, Push]),
            Err(Error::DimensionMismatch { .. })
        ));
        let idx = KnnIndex::new(1, vec![vec![1.0, 2.0]], vec![Push]).unwrap();
        assert!(matches!(
            idx.classify(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
