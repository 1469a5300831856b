//! Brute-force reference implementations shared by the oracle tests and the
//! acceptance harness. Everything here is written against nalgebra vectors
//! and plain loops, independently of the library code.
#![allow(dead_code)]

pub mod stats;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// An oracle feature value, or why it has none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ref {
    Value(f64),
    Undefined,
    /// Defined-but-degenerate; the carried value is what gets reported.
    Degenerate(f64),
}

fn vecs(points: &[Vec<f64>]) -> Vec<DVector<f64>> {
    points.iter().map(|p| DVector::from_column_slice(p)).collect()
}

fn cos_dist(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(1.0 - (a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

fn centroid(v: &[DVector<f64>]) -> DVector<f64> {
    let mut c = DVector::zeros(v[0].len());
    for p in v {
        c += p;
    }
    c / v.len() as f64
}

fn mean_pair_dist(v: &[DVector<f64>]) -> Option<f64> {
    let mut d = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d.push(cos_dist(&v[i], &v[j])?);
        }
    }
    Some(d.iter().sum::<f64>() / d.len() as f64)
}

fn wrap(x: Option<f64>) -> Ref {
    x.map_or(Ref::Degenerate(f64::NAN), Ref::Value)
}

pub fn local_coherence(v: &[DVector<f64>]) -> Ref {
    if v.len() < 2 {
        return Ref::Undefined;
    }
    let s: Option<Vec<f64>> = (0..v.len() - 1).map(|i| cos_dist(&v[i], &v[i + 1]).map(|d| 1.0 - d)).collect();
    wrap(s.map(|s| s.iter().sum::<f64>() / s.len() as f64))
}

pub fn global_coherence(v: &[DVector<f64>]) -> Ref {
    let c = centroid(v);
    let s: Option<Vec<f64>> = v.iter().map(|p| cos_dist(p, &c).map(|d| 1.0 - d)).collect();
    wrap(s.map(|s| s.iter().sum::<f64>() / s.len() as f64))
}

pub fn path_length(v: &[DVector<f64>]) -> Ref {
    if v.len() < 2 {
        return Ref::Undefined;
    }
    let s: Option<Vec<f64>> = (1..v.len()).map(|i| cos_dist(&v[i - 1], &v[i])).collect();
    wrap(s.map(|s| s.iter().sum()))
}

pub fn convergence_ratio(v: &[DVector<f64>]) -> Ref {
    let n = v.len();
    if n < 4 {
        return Ref::Undefined;
    }
    let (early, late) = v.split_at(n / 2);
    match (mean_pair_dist(early), mean_pair_dist(late)) {
        // Identical early turns give a rounding-level De rather than exactly 0.
        (Some(de), Some(dl)) if de > 1e-12 => Ref::Value((de - dl) / de),
        _ => Ref::Degenerate(0.0),
    }
}

pub fn max_distance(v: &[DVector<f64>]) -> Ref {
    if v.len() < 2 {
        return Ref::Undefined;
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..v.len() {
        for j in 0..v.len() {
            if i != j {
                match cos_dist(&v[i], &v[j]) {
                    Some(d) => best = best.max(d),
                    None => return Ref::Degenerate(f64::NAN),
                }
            }
        }
    }
    Ref::Value(best)
}

pub fn curvature(v: &[DVector<f64>]) -> Ref {
    if v.len() < 3 {
        return Ref::Undefined;
    }
    let deltas: Vec<DVector<f64>> = (1..v.len()).map(|i| &v[i] - &v[i - 1]).collect();
    let angles: Vec<f64> = deltas
        .windows(2)
        .filter(|w| w[0].norm() > 0.0 && w[1].norm() > 0.0)
        .map(|w| (w[0].dot(&w[1]) / (w[0].norm() * w[1].norm())).clamp(-1.0, 1.0).acos())
        .collect();
    if angles.is_empty() {
        return Ref::Degenerate(f64::NAN);
    }
    Ref::Value(angles.iter().sum::<f64>() / angles.len() as f64)
}

pub fn revisit(v: &[DVector<f64>]) -> Ref {
    let n = v.len();
    if n < 4 {
        return Ref::Undefined;
    }
    let w = ((0.3 * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut best = f64::NEG_INFINITY;
    for l in n - w..n {
        for e in 0..w {
            match cos_dist(&v[l], &v[e]) {
                Some(d) => best = best.max(1.0 - d),
                None => return Ref::Degenerate(f64::NAN),
            }
        }
    }
    Ref::Value(best)
}

pub fn spread(v: &[DVector<f64>]) -> Ref {
    if v.len() < 2 {
        return Ref::Undefined;
    }
    let c = centroid(v);
    let d: Vec<f64> = v.iter().map(|p| (p - &c).norm()).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    Ref::Value((d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt())
}

/// k-means replica: D²-weighted seeding from ChaCha8, Lloyd updates, ties
/// to the lowest cluster index, empty clusters take the farthest point.
pub fn kmeans(v: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = v.len();
    let sq = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm_squared();
    let mut seeds = vec![rng.random_range(0..n)];
    while seeds.len() < k {
        let d2: Vec<f64> =
            v.iter().map(|p| seeds.iter().map(|&s| sq(p, &v[s])).fold(f64::INFINITY, f64::min)).collect();
        let target = rng.random_range(0.0..1.0) * d2.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut pick = usize::MAX;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                pick = i;
                if acc > target {
                    break;
                }
            }
        }
        seeds.push(pick);
    }
    let mut cents: Vec<DVector<f64>> = seeds.iter().map(|&s| v[s].clone()).collect();
    let assign_all = |cents: &[DVector<f64>]| -> Vec<usize> {
        v.iter()
            .map(|p| {
                let d: Vec<f64> = cents.iter().map(|c| sq(p, c)).collect();
                let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
                d.iter().position(|&x| x == lo).unwrap()
            })
            .collect()
    };
    let mut assign = assign_all(&cents);
    for _ in 0..100 {
        for j in 0..k {
            let members: Vec<&DVector<f64>> = (0..n).filter(|&i| assign[i] == j).map(|i| &v[i]).collect();
            if members.is_empty() {
                let dist: Vec<f64> = (0..n).map(|i| sq(&v[i], &cents[assign[i]])).collect();
                let hi = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let far = dist.iter().position(|&x| x == hi).unwrap();
                cents[j] = v[far].clone();
                assign[far] = j;
            } else {
                let mut s = DVector::zeros(v[0].len());
                for m in &members {
                    s += *m;
                }
                cents[j] = s / members.len() as f64;
            }
        }
        let next = assign_all(&cents);
        if next == assign {
            break;
        }
        assign = next;
    }
    let mut inertia = 0.0;
    for j in 0..k {
        let members: Vec<&DVector<f64>> = (0..n).filter(|&i| assign[i] == j).map(|i| &v[i]).collect();
        if !members.is_empty() {
            let c = members.iter().fold(DVector::zeros(v[0].len()), |a, m| a + *m) / members.len() as f64;
            inertia += members.iter().map(|m| sq(m, &c)).sum::<f64>();
        }
    }
    (assign, inertia)
}

pub fn switching(v: &[DVector<f64>], seed: u64, restarts: usize) -> Ref {
    let n = v.len();
    let mut distinct: Vec<&DVector<f64>> = Vec::new();
    for p in v {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    if n < 4 || distinct.len() < 3 {
        return Ref::Undefined;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = kmeans(v, 3, &mut rng);
    for _ in 1..restarts.max(1) {
        let c = kmeans(v, 3, &mut rng);
        if c.1 < best.1 {
            best = c;
        }
    }
    let switches = (1..n).filter(|&i| best.0[i] != best.0[i - 1]).count();
    Ref::Value(switches as f64 / (n - 1) as f64)
}

/// All nine in the library's feature order.
pub fn all_features(points: &[Vec<f64>], seed: u64, restarts: usize) -> [Ref; 9] {
    let v = vecs(points);
    [
        local_coherence(&v),
        global_coherence(&v),
        path_length(&v),
        convergence_ratio(&v),
        max_distance(&v),
        curvature(&v),
        switching(&v, seed, restarts),
        revisit(&v),
        spread(&v),
    ]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Random trajectory of one of three shapes: isotropic noise, a drifting
/// walk around a common offset, or jumps between a few topic centres.
pub fn random_trajectory(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| StandardNormal.sample(rng)).collect() };
    match rng.random_range(0..3) {
        0 => (0..n).map(|_| gauss(rng)).collect(),
        1 => {
            let offset = gauss(rng);
            let mut cur = vec![0.0; dim];
            (0..n)
                .map(|_| {
                    let step = gauss(rng);
                    for (c, s) in cur.iter_mut().zip(&step) {
                        *c += 0.3 * s;
                    }
                    offset.iter().zip(&cur).map(|(o, c)| o + c).collect()
                })
                .collect()
        }
        _ => {
            let centres: Vec<Vec<f64>> = (0..4).map(|_| gauss(rng)).collect();
            (0..n)
                .map(|_| {
                    let c = &centres[rng.random_range(0..centres.len())];
                    let noise = gauss(rng);
                    c.iter().zip(&noise).map(|(a, e)| a + 0.2 * e).collect()
                })
                .collect()
        }
    }
}

/// A random orthogonal map as a product of Householder reflections about
/// Gaussian directions. Cheap to apply at high dimension.
pub struct Householder {
    normals: Vec<DVector<f64>>,
}

impl Householder {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, reflections: usize) -> Self {
        let normals = (0..reflections)
            .map(|_| {
                let v: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut *rng));
                let n = v.norm();
                v / n
            })
            .collect();
        Self { normals }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut x = DVector::from_column_slice(p);
        for u in &self.normals {
            let s = 2.0 * u.dot(&x);
            x -= u * s;
        }
        x.iter().copied().collect()
    }
}
