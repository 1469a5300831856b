use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrajectoryError;

pub const KMEANS_MAX_ITER: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Number of distinct points (exact equality).
pub fn distinct_points(points: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.iter().any(|s| *s == p) {
            seen.push(p);
        }
    }
    seen.len()
}

/// Assignment plus its within-cluster sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

/// Within-cluster sum of squares of an assignment around its cluster means.
pub fn within_ss(points: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let centroids = means(points, assignment, k);
    points.iter().zip(assignment).map(|(p, &c)| centroids[c].as_ref().map_or(0.0, |m| sq_dist(p, m))).sum()
}

fn means(points: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Option<Vec<f64>>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// Lloyd's algorithm from `init_indices` centroids; empty clusters are
/// reseeded with the point farthest from its centroid.
pub fn kmeans_lloyd(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering, TrajectoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lloyd_once(points, k, &mut rng)
}

/// Best of `restarts` seeded runs by inertia; the first run is identical to
/// `kmeans_lloyd` with the same seed and wins ties.
pub fn kmeans_restarts(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<Clustering, TrajectoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = lloyd_once(points, k, &mut rng)?;
    for _ in 1..restarts {
        let c = lloyd_once(points, k, &mut rng)?;
        if c.inertia < best.inertia {
            best = c;
        }
    }
    Ok(best)
}

/// Seeded D²-weighted draw of k indices: the first uniformly, each next one
/// with probability proportional to its squared distance from the nearest
/// index already drawn. Duplicates of drawn points have weight zero.
pub fn init_indices(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.random_range(0.0..1.0) * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, w) in d2.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let next = pick.expect("a distinct point remains");
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen
}

fn lloyd_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Result<Clustering, TrajectoryError> {
    if k == 0 {
        return Err(TrajectoryError::Precondition("k must be positive".into()));
    }
    let distinct = distinct_points(points);
    if distinct < k {
        return Err(TrajectoryError::TooFewDistinct { k, distinct });
    }
    let mut centroids: Vec<Vec<f64>> = init_indices(points, k, rng).into_iter().map(|i| points[i].clone()).collect();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..KMEANS_MAX_ITER {
        let updated = means(points, &assignment, k);
        for (j, m) in updated.into_iter().enumerate() {
            match m {
                Some(m) => centroids[j] = m,
                None => {
                    let far = (0..points.len())
                        .max_by(|&a, &b| {
                            let da = sq_dist(&points[a], &centroids[assignment[a]]);
                            let db = sq_dist(&points[b], &centroids[assignment[b]]);
                            da.total_cmp(&db).then(b.cmp(&a))
                        })
                        .expect("non-empty input");
                    centroids[j] = points[far].clone();
                    assignment[far] = j;
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let inertia = within_ss(points, &assignment, k);
    Ok(Clustering { assignment, inertia })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_blobs_are_separate() {
        let pts = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]];
        let c = kmeans_lloyd(&pts, 3, 1).unwrap();
        let mut a = c.assignment.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 3);
        assert_eq!(c.inertia, 0.0);
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = kmeans_lloyd(&pts, 3, 5).unwrap();
        assert_eq!(a, kmeans_lloyd(&pts, 3, 5).unwrap());
        // Initial assignment: nearest of the seeded initial centroids.
        let init: Vec<Vec<f64>> =
            init_indices(&pts, 3, &mut ChaCha8Rng::seed_from_u64(5)).iter().map(|&i| pts[i].clone()).collect();
        let init_assign: Vec<usize> = pts.iter().map(|p| nearest(p, &init)).collect();
        assert!(a.inertia <= within_ss(&pts, &init_assign, 3) + 1e-12);
        let best = kmeans_restarts(&pts, 3, 5, 5).unwrap();
        assert!(best.inertia <= a.inertia);
    }

    #[test]
    fn too_few_distinct_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(matches!(kmeans_lloyd(&pts, 3, 0), Err(TrajectoryError::TooFewDistinct { k: 3, distinct: 2 })));
    }
}
