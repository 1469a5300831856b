use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Trajectory, TrajectoryError};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 20_000;
/// Second eigenvalue below this fraction of the first means rank < 2.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// One (x, y) per turn, in turn order.
    pub points: Vec<[f64; 2]>,
    /// Covariance eigenvalues for the two axes (population normalization).
    pub eigenvalues: [f64; 2],
    /// Total variance (trace of the covariance).
    pub total_variance: f64,
    pub degenerate: bool,
}

impl Projection {
    pub fn captured_variance_share(&self) -> f64 {
        (self.eigenvalues[0] + self.eigenvalues[1]) / self.total_variance
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// C v without forming C: Xcᵀ (Xc v) / n.
fn cov_apply(xc: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for row in xc {
        let s = dot(row, v);
        for (o, r) in out.iter_mut().zip(row) {
            *o += s * r;
        }
    }
    let n = xc.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Dominant eigenpair of C restricted to the complement of `deflate`.
fn power(xc: &[Vec<f64>], deflate: &[(f64, Vec<f64>)], rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let dim = xc[0].len();
    let apply = |v: &[f64]| {
        let mut w = cov_apply(xc, v);
        for (lambda, u) in deflate {
            let s = lambda * dot(u, v);
            w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= s * ui);
        }
        w
    };
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
    normalize(&mut v);
    for _ in 0..POWER_MAX_ITER {
        let mut w = apply(&v);
        if normalize(&mut w) == 0.0 {
            return (0.0, v);
        }
        let diff = v.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let flip = v.iter().zip(&w).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        v = w;
        if diff.min(flip) < POWER_TOL {
            break;
        }
    }
    let lambda = dot(&v, &apply(&v));
    (lambda.max(0.0), v)
}

fn orient(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Projects centered turns onto the top two covariance eigenvectors found
/// by power iteration with deflation.
pub fn pca_project_2d(t: &Trajectory) -> Result<Projection, TrajectoryError> {
    if t.n() < 3 {
        return Err(TrajectoryError::Precondition(format!("projection needs 3 turns, got {}", t.n())));
    }
    let c = t.centroid();
    let xc: Vec<Vec<f64>> = t.points().iter().map(|p| p.iter().zip(&c).map(|(a, b)| a - b).collect()).collect();
    let total_variance = xc.iter().map(|r| dot(r, r)).sum::<f64>() / xc.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ca);
    let (l1, mut v1) = power(&xc, &[], &mut rng);
    let (l2, mut v2) = power(&xc, &[(l1, v1.clone())], &mut rng);
    orient(&mut v1);
    orient(&mut v2);
    let degenerate = l1 <= 0.0 || l2 <= RANK_TOL * l1;
    let points = xc
        .iter()
        .map(|r| {
            let y = if degenerate { 0.0 } else { dot(r, &v2) };
            [if l1 > 0.0 { dot(r, &v1) } else { 0.0 }, y]
        })
        .collect();
    Ok(Projection { points, eigenvalues: [l1, if degenerate { 0.0 } else { l2 }], total_variance, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_is_preserved() {
        // A plane in 4-D spanned by two orthonormal directions.
        let a = [0.5, 0.5, 0.5, 0.5];
        let b = [0.5, -0.5, 0.5, -0.5];
        let coords = [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5), (2.0, -1.0), (0.3, 0.7)];
        let pts: Vec<Vec<f64>> =
            coords.iter().map(|(x, y)| (0..4).map(|i| 1.0 + x * a[i] + y * b[i]).collect()).collect();
        let p = pca_project_2d(&Trajectory::new(pts).unwrap()).unwrap();
        assert!(!p.degenerate);
        for i in 0..coords.len() {
            for j in 0..coords.len() {
                let d0 = ((coords[i].0 - coords[j].0).powi(2) + (coords[i].1 - coords[j].1).powi(2)).sqrt();
                let d1 = ((p.points[i][0] - p.points[j][0]).powi(2) + (p.points[i][1] - p.points[j][1]).powi(2)).sqrt();
                assert!((d0 - d1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn collinear_points_flag_rank() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect();
        let p = pca_project_2d(&Trajectory::new(pts).unwrap()).unwrap();
        assert!(p.degenerate);
        assert!(p.points.iter().all(|q| q[1] == 0.0));
        assert!(p.points.windows(2).all(|w| w[1][0] > w[0][0]));
    }
}
