//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::squared_distance;
use crate::vectors::VectorSet;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: VectorSet,
    pub assignments: Vec<u32>,
    /// Sum of squared distances to the assigned centroid after each
    /// assignment step.
    pub distortion: Vec<f64>,
    pub iterations: usize,
}

fn nearest(centroids: &[f32], dim: usize, x: &[f32]) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(data: &VectorSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = data.len();
    let dim = data.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(data.row(first));
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut d2: Vec<f64> = data
        .rows()
        .map(|x| squared_distance(x, data.row(first)) as f64)
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.unwrap()
        } else {
            // Every remaining point coincides with a center.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = data.row(pick);
        centroids.extend_from_slice(c);
        for (w, x) in d2.iter_mut().zip(data.rows()) {
            *w = w.min(squared_distance(x, c) as f64);
        }
    }
    centroids
}

pub fn kmeans(data: &VectorSet, n_clusters: usize, max_iters: usize, seed: u64) -> Result<KMeans> {
    let n = data.len();
    let dim = data.dim();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::invalid(format!(
            "cannot form {n_clusters} clusters from {n} vectors"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(data, n_clusters, &mut rng);
    let mut assignments = vec![u32::MAX; n];
    let mut distortion = Vec::new();
    let mut iterations = 0;
    let mut sums = vec![0.0f64; n_clusters * dim];
    let mut counts = vec![0usize; n_clusters];

    loop {
        iterations += 1;
        let mut changed = false;
        let mut total = 0.0f64;
        for (i, x) in data.rows().enumerate() {
            let (c, d) = nearest(&centroids, dim, x);
            total += d as f64;
            if assignments[i] != c as u32 {
                assignments[i] = c as u32;
                changed = true;
            }
        }
        distortion.push(total);
        if !changed || iterations >= max_iters.max(1) {
            break;
        }

        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (x, &a) in data.rows().zip(&assignments) {
            let a = a as usize;
            counts[a] += 1;
            for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
                *s += v as f64;
            }
        }
        for c in 0..n_clusters {
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids[c * dim + j] = (sums[c * dim + j] / counts[c] as f64) as f32;
                }
            }
        }
        for empty in 0..n_clusters {
            if counts[empty] > 0 {
                continue;
            }
            let donor = (0..n_clusters)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .unwrap();
            let donor_centroid = centroids[donor * dim..(donor + 1) * dim].to_vec();
            let (far, _) = data
                .rows()
                .enumerate()
                .filter(|&(i, _)| assignments[i] as usize == donor)
                .map(|(i, x)| (i, squared_distance(x, &donor_centroid)))
                .fold((usize::MAX, -1.0f32), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
            centroids[empty * dim..(empty + 1) * dim].copy_from_slice(data.row(far));
            assignments[far] = empty as u32;
            counts[donor] -= 1;
            counts[empty] = 1;
        }
    }

    Ok(KMeans {
        centroids: VectorSet::new(dim, centroids)?,
        assignments,
        distortion,
        iterations,
    })
}
