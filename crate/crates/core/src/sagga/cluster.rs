//! Plain k-means with k-means++ initialization.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("{points} points cannot form {k} clusters")]
    TooFewPoints { points: usize, k: usize },
}

const MAX_ITERS: usize = 100;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq(p, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Assigns each point to one of `k` clusters. Centers are seeded by
/// D²-weighted sampling from `rng`: each new center is drawn with
/// probability proportional to its squared distance from the nearest
/// center already chosen.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Result<Vec<usize>, ClusterError> {
    if k == 0 || points.len() < k {
        return Err(ClusterError::TooFewPoints { points: points.len(), k });
    }
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut min_d: Vec<f64> = points.iter().map(|p| sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = min_d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            min_d
                .iter()
                .position(|&d| {
                    u -= d;
                    u < 0.0
                })
                .unwrap_or_else(|| min_d.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every point coincides with a center.
            centers.len() % points.len()
        };
        centers.push(points[next].clone());
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(sq(p, &points[next]));
        }
    }
    let dim = points[0].len();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..MAX_ITERS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(assign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn separates_obvious_blobs() {
        let mut pts = vec![];
        for i in 0..10 {
            let j = i as f64 * 0.01;
            pts.push(vec![0.0 + j, 0.0]);
            pts.push(vec![5.0 + j, 5.0]);
            pts.push(vec![-5.0, 5.0 + j]);
        }
        let a = kmeans(&pts, 3, &mut rng_for(&[1])).unwrap();
        for t in 0..3 {
            let labels: Vec<usize> = (0..10).map(|i| a[3 * i + t]).collect();
            assert!(labels.iter().all(|&l| l == labels[0]));
        }
        assert_ne!(a[0], a[1]);
        assert_ne!(a[1], a[2]);
        assert_ne!(a[0], a[2]);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            kmeans(&pts, 3, &mut rng_for(&[0])),
            Err(ClusterError::TooFewPoints { points: 2, k: 3 })
        );
    }

    #[test]
    fn single_cluster_and_duplicates() {
        let pts = vec![vec![1.0, 0.0]; 6];
        assert_eq!(kmeans(&pts, 1, &mut rng_for(&[2])).unwrap(), vec![0; 6]);
        let a = kmeans(&pts, 3, &mut rng_for(&[2])).unwrap();
        assert!(a.iter().all(|&l| l < 3));
    }
}
