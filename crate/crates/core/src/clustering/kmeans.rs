//! Seeded Lloyd's K-Means with k-means++ seeding, used to initialise EM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct KMeansResult<T> {
    pub centers: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub inertia: T,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

fn nearest<T: Scalar>(x: &[T], centers: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus<T: Scalar>(points: &[&[T]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &centers[0]).as_f64())
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].to_vec());
        let c = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c).as_f64());
        }
    }
    centers
}

fn lloyd<T: Scalar>(
    points: &[&[T]],
    mut centers: Vec<Vec<T>>,
    max_iter: usize,
    tol: T,
) -> KMeansResult<T> {
    let n = points.len();
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    for _ in 0..max_iter {
        for (l, p) in labels.iter_mut().zip(points) {
            *l = nearest(p, &centers).0;
        }
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        // Empty clusters take the point farthest from its center.
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| counts[labels[i]] > 1)
                    .map(|(i, p)| (i, sq_dist(p, &centers[labels[i]])))
                    .fold((0, -T::one()), |b, x| if x.1 > b.1 { x } else { b });
                if counts[labels[far]] <= 1 {
                    continue;
                }
                let old = labels[far];
                counts[old] -= 1;
                for (s, &x) in sums[old].iter_mut().zip(points[far].iter()) {
                    *s -= x;
                }
                labels[far] = c;
                counts[c] = 1;
                sums[c] = points[far].to_vec();
            }
        }
        let mut shift = T::zero();
        for c in 0..k {
            let cnt = T::count(counts[c]);
            let new: Vec<T> = sums[c].iter().map(|&s| s / cnt).collect();
            shift += sq_dist(&new, &centers[c]);
            centers[c] = new;
        }
        if shift <= tol {
            break;
        }
    }
    for (l, p) in labels.iter_mut().zip(points) {
        *l = nearest(p, &centers).0;
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    KMeansResult {
        centers,
        labels,
        inertia,
    }
}

/// Best-of-`restarts` K-Means. Deterministic in `seed`; on equal inertia
/// the earliest restart wins.
pub fn kmeans<T: Scalar>(points: &[&[T]], k: usize, seed: u64, restarts: usize) -> KMeansResult<T> {
    assert!(k >= 1 && k <= points.len(), "1 <= k <= n required");
    let dim = points[0].len();
    // Shift tolerance relative to the data variance.
    let mean: Vec<T> = (0..dim)
        .map(|j| points.iter().map(|p| p[j]).sum::<T>() / T::count(points.len()))
        .collect();
    let var: T = points.iter().map(|p| sq_dist(p, &mean)).sum::<T>() / T::count(points.len());
    let tol = var * T::lit(1e-4) / T::count(dim);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult<T>> = None;
    for _ in 0..restarts.max(1) {
        let init = plus_plus(points, k, &mut rng);
        let run = lloyd(points, init, 300, tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.unwrap()
}
