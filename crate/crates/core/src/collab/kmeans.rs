//! Seeded, fully deterministic k-means for the spectral embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::num::Real;

const MAX_ITERATIONS: usize = 100;

/// Cluster `n` points of dimension `dim` (row-major in `points`) into `k`
/// groups and return a label per point.
///
/// The first center is drawn with the seeded RNG; the remaining centers are
/// placed farthest-point style (maximum distance to the chosen set). All ties
/// break toward the lower point index, so identical inputs yield identical
/// labels on every platform.
pub fn kmeans<F: Real>(points: &[F], n: usize, dim: usize, k: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1 && k <= n, "need 1 <= k <= n (k={k}, n={n})");
    assert_eq!(points.len(), n * dim);
    if k == 1 {
        return vec![0; n];
    }

    let dist2 = |a: &[F], b: &[F]| -> F {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - y) * (x - y))
            .fold(F::zero(), |acc, v| acc + v)
    };
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    // Farthest-point initialization.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = vec![rng.random_range(0..n)];
    while chosen.len() < k {
        let mut best: Option<(usize, F)> = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen
                .iter()
                .map(|&c| dist2(point(i), point(c)))
                .fold(F::infinity(), F::min);
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((i, d)),
            }
        }
        chosen.push(best.expect("k <= n leaves an unchosen point").0);
    }
    let mut centers: Vec<F> = Vec::with_capacity(k * dim);
    for &c in &chosen {
        centers.extend_from_slice(point(c));
    }

    let mut labels = vec![0usize; n];
    let mut prev_labels: Option<Vec<usize>> = None;
    for _ in 0..MAX_ITERATIONS {
        // Assignment; ties go to the lower center index.
        for i in 0..n {
            let mut best_j = 0;
            let mut best_d = F::infinity();
            for j in 0..k {
                let d = dist2(point(i), &centers[j * dim..(j + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best_j = j;
                }
            }
            labels[i] = best_j;
        }

        // Re-seed empty clusters with the point farthest from its own center.
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for j in 0..k {
            if sizes[j] > 0 {
                continue;
            }
            let mut best: Option<(usize, F)> = None;
            for i in 0..n {
                if sizes[labels[i]] < 2 {
                    continue;
                }
                let d = dist2(point(i), &centers[labels[i] * dim..(labels[i] + 1) * dim]);
                match best {
                    Some((_, bd)) if d <= bd => {}
                    _ => best = Some((i, d)),
                }
            }
            if let Some((i, _)) = best {
                sizes[labels[i]] -= 1;
                labels[i] = j;
                sizes[j] += 1;
            }
        }

        if prev_labels.as_deref() == Some(&labels) {
            break;
        }
        prev_labels = Some(labels.clone());

        // Center update.
        let mut sums = vec![F::zero(); k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &x) in sums[labels[i] * dim..(labels[i] + 1) * dim]
                .iter_mut()
                .zip(point(i))
            {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = F::one() / F::from(counts[j]).expect("count fits scalar");
                for s in &mut sums[j * dim..(j + 1) * dim] {
                    *s *= inv;
                }
                centers[j * dim..(j + 1) * dim].copy_from_slice(&sums[j * dim..(j + 1) * dim]);
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_obvious_blobs() {
        let points: Vec<f64> = vec![0.0, 0.1, -0.1, 10.0, 10.2, 9.9]
            .into_iter()
            .collect();
        let labels = kmeans(&points, 6, 1, 2, 42);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[4], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn deterministic_per_seed() {
        let points: Vec<f64> = (0..40).map(|i| (i % 7) as f64 * 1.3).collect();
        assert_eq!(kmeans(&points, 20, 2, 3, 7), kmeans(&points, 20, 2, 3, 7));
    }

    #[test]
    fn k_equals_n_gives_all_singletons() {
        let points = vec![0.0f64, 1.0, 2.0, 3.0];
        let labels = kmeans(&points, 4, 1, 4, 0);
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let points = vec![1.0f64; 5];
        let labels = kmeans(&points, 5, 1, 2, 9);
        let mut sizes = [0usize; 2];
        for l in labels {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&s| s > 0));
    }
}
