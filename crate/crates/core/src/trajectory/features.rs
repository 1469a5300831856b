use super::kmeans::{distinct_points, kmeans_restarts};
use super::{FeatureUndefined, Trajectory};
use crate::embedding::{cosine_distance, EmbeddingError};

type FeatureResult = Result<f64, FeatureUndefined>;

fn dcos(a: &[f64], b: &[f64]) -> FeatureResult {
    match cosine_distance(a, b) {
        Ok(d) => Ok(d),
        Err(EmbeddingError::ZeroVector) => Err(FeatureUndefined::Degenerate),
        Err(e) => unreachable!("trajectory dimensions are checked on construction: {e}"),
    }
}

fn need(t: &Trajectory, n: usize) -> Result<(), FeatureUndefined> {
    if t.n() < n {
        Err(FeatureUndefined::InsufficientTurns)
    } else {
        Ok(())
    }
}

fn consecutive(t: &Trajectory) -> Result<Vec<f64>, FeatureUndefined> {
    t.points().windows(2).map(|w| dcos(&w[0], &w[1])).collect()
}

/// Mean pairwise cosine distance over i < j.
fn mean_pairwise(points: &[Vec<f64>]) -> FeatureResult {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            sum += dcos(&points[i], &points[j])?;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// ⌈0.3·n⌉, at least 1.
pub fn revisit_window(n: usize) -> usize {
    ((3 * n).div_ceil(10)).max(1)
}

/// Mean of 1 - d_cos over consecutive turns.
pub fn local_coherence(t: &Trajectory) -> FeatureResult {
    need(t, 2)?;
    let d = consecutive(t)?;
    Ok(d.iter().map(|x| 1.0 - x).sum::<f64>() / d.len() as f64)
}

/// Centroid norm below this fraction of the mean turn norm is a zero centroid.
const ZERO_CENTROID_TOL: f64 = 1e-12;

/// Mean of 1 - d_cos(e_i, centroid).
pub fn global_coherence(t: &Trajectory) -> FeatureResult {
    need(t, 1)?;
    let c = t.centroid();
    let cnorm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mean_norm = t.points().iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / t.n() as f64;
    if cnorm <= ZERO_CENTROID_TOL * mean_norm || cnorm == 0.0 {
        return Err(FeatureUndefined::Degenerate);
    }
    let mut sum = 0.0;
    for p in t.points() {
        sum += 1.0 - dcos(p, &c)?;
    }
    Ok(sum / t.n() as f64)
}

/// Sum of consecutive cosine distances.
pub fn path_length(t: &Trajectory) -> FeatureResult {
    need(t, 2)?;
    Ok(consecutive(t)?.iter().sum())
}

/// Early dispersion below this is treated as zero.
const ZERO_DISPERSION_TOL: f64 = 1e-12;

/// (D_early - D_late) / D_early over the first ⌊n/2⌋ and last ⌈n/2⌉ turns.
pub fn convergence_ratio(t: &Trajectory) -> FeatureResult {
    need(t, 4)?;
    let half = t.n() / 2;
    let early = mean_pairwise(&t.points()[..half])?;
    let late = mean_pairwise(&t.points()[half..])?;
    if early <= ZERO_DISPERSION_TOL {
        return Err(FeatureUndefined::Degenerate);
    }
    Ok((early - late) / early)
}

/// Largest pairwise cosine distance.
pub fn max_distance(t: &Trajectory) -> FeatureResult {
    need(t, 2)?;
    let p = t.points();
    let mut best = 0.0f64;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            best = best.max(dcos(&p[i], &p[j])?);
        }
    }
    Ok(best)
}

/// Mean turning angle between consecutive displacement vectors, with the
/// number of pairs skipped because a displacement was zero.
pub fn trajectory_curvature_detail(t: &Trajectory) -> Result<(f64, usize), FeatureUndefined> {
    need(t, 3)?;
    let deltas: Vec<Vec<f64>> =
        t.points().windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect()).collect();
    let norms: Vec<f64> = deltas.iter().map(|d| d.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for i in 0..deltas.len() - 1 {
        if norms[i] == 0.0 || norms[i + 1] == 0.0 {
            skipped += 1;
            continue;
        }
        let dot: f64 = deltas[i].iter().zip(&deltas[i + 1]).map(|(a, b)| a * b).sum();
        sum += (dot / (norms[i] * norms[i + 1])).clamp(-1.0, 1.0).acos();
        used += 1;
    }
    if used == 0 {
        return Err(FeatureUndefined::Degenerate);
    }
    Ok((sum / used as f64, skipped))
}

pub fn trajectory_curvature(t: &Trajectory) -> FeatureResult {
    trajectory_curvature_detail(t).map(|(v, _)| v)
}

pub const SWITCHING_CLUSTERS: usize = 3;

/// Cluster transitions over (n - 1), clustering with k = 3.
pub fn topic_switching_rate(t: &Trajectory, seed: u64, restarts: usize) -> FeatureResult {
    need(t, 4)?;
    if distinct_points(t.points()) < SWITCHING_CLUSTERS {
        return Err(FeatureUndefined::InsufficientTurns);
    }
    let c = kmeans_restarts(t.points(), SWITCHING_CLUSTERS, seed, restarts.max(1))
        .map_err(|_| FeatureUndefined::InsufficientTurns)?;
    let switches = c.assignment.windows(2).filter(|w| w[0] != w[1]).count();
    Ok(switches as f64 / (t.n() - 1) as f64)
}

/// Best similarity between a late-window turn and an early-window turn.
pub fn revisit_score(t: &Trajectory) -> FeatureResult {
    need(t, 4)?;
    let w = revisit_window(t.n());
    let p = t.points();
    let mut best = f64::NEG_INFINITY;
    for late in &p[p.len() - w..] {
        for early in &p[..w] {
            best = best.max(1.0 - dcos(late, early)?);
        }
    }
    Ok(best)
}

/// Population SD of Euclidean distances to the centroid.
pub fn semantic_spread(t: &Trajectory) -> FeatureResult {
    need(t, 2)?;
    let c = t.centroid();
    let d: Vec<f64> =
        t.points().iter().map(|p| p.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect();
    Ok(crate::stats::population_sd(&d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn t(points: &[&[f64]]) -> Trajectory {
        Trajectory::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn coherence_landmarks() {
        let x = t(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert!(local_coherence(&x).unwrap().abs() < 1e-15);
        assert!((local_coherence(&t(&[&[1.0, 2.0], &[1.0, 2.0]])).unwrap() - 1.0).abs() < 1e-15);
        let g = global_coherence(&t(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert!((g - SQRT_2 / 2.0).abs() < 1e-12);
        assert_eq!(global_coherence(&t(&[&[1.0, 0.0], &[-1.0, 0.0]])), Err(FeatureUndefined::Degenerate));
        assert_eq!(local_coherence(&t(&[&[1.0, 0.0]])), Err(FeatureUndefined::InsufficientTurns));
    }

    #[test]
    fn path_and_max_landmarks() {
        let x = t(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert!((path_length(&x).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(max_distance(&t(&[&[1.0, 0.0], &[0.5, 0.5], &[-1.0, 0.0]])).unwrap(), 2.0);
    }

    #[test]
    fn convergence_landmarks() {
        let x = t(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 0.0]]);
        assert!((convergence_ratio(&x).unwrap() - 1.0).abs() < 1e-15);
        let same = t(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(convergence_ratio(&same), Err(FeatureUndefined::Degenerate));
    }

    #[test]
    fn curvature_landmarks() {
        assert_eq!(trajectory_curvature(&t(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]])).unwrap(), 0.0);
        assert!((trajectory_curvature(&t(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]])).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let stalled = t(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[2.0, 0.0], &[2.0, 1.0]]);
        assert_eq!(trajectory_curvature_detail(&stalled).unwrap(), (FRAC_PI_2, 2));
        assert_eq!(trajectory_curvature(&t(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]])), Err(FeatureUndefined::Degenerate));
    }

    #[test]
    fn switching_landmarks() {
        let blobs = t(&[&[0.0, 0.0], &[0.01, 0.0], &[10.0, 0.0], &[10.0, 0.01], &[0.0, 10.0], &[0.01, 10.0]]);
        assert!((topic_switching_rate(&blobs, 3, 1).unwrap() - 0.4).abs() < 1e-15);
        let abc = t(&[&[0.0, 0.0], &[5.0, 0.0], &[0.0, 5.0], &[0.0, 0.0], &[5.0, 0.0], &[0.0, 5.0]]);
        assert_eq!(topic_switching_rate(&abc, 3, 1).unwrap(), 1.0);
        let two = t(&[&[1.0], &[1.0], &[1.0], &[1.0], &[1.0], &[2.0], &[3.0]]);
        assert!(topic_switching_rate(&two, 0, 1).is_ok());
        let two = t(&[&[1.0], &[1.0], &[1.0], &[1.0], &[1.0], &[2.0], &[2.0]]);
        assert_eq!(topic_switching_rate(&two, 0, 1), Err(FeatureUndefined::InsufficientTurns));
    }

    #[test]
    fn revisit_landmarks() {
        assert_eq!(revisit_window(10), 3);
        assert_eq!(revisit_window(4), 2);
        assert_eq!(revisit_window(1), 1);
        let back = t(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert!((revisit_score(&back).unwrap() - 1.0).abs() < 1e-15);
        let orth = t(&[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]);
        assert!(revisit_score(&orth).unwrap().abs() < 1e-15);
    }

    #[test]
    fn spread_landmarks() {
        assert_eq!(semantic_spread(&t(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap(), 0.0);
        assert!(semantic_spread(&t(&[&[0.0, 3.0], &[4.0, 1.0]])).unwrap().abs() < 1e-15);
        let s = semantic_spread(&t(&[&[0.0], &[1.0], &[2.0]])).unwrap();
        assert!((s - (2.0f64 / 9.0).sqrt()).abs() < 1e-15);
    }
}
