//! Shared generators and reference implementations for the integration tests.
#![allow(dead_code)]

use gdpmeans::dataio::{Dataset, RgbImage};
use gdpmeans::{Divergence, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

/// Gaussian blobs around `k` random centers in `[lo, hi]^dims`.
pub fn blobs(rng: &mut ChaCha8Rng, n: usize, dims: usize, k: usize, lo: f64, hi: f64, sd: f64) -> Matrix {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dims).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let mut values = Vec::with_capacity(n * dims);
    for _ in 0..n {
        let c = &centers[rng.random_range(0..k)];
        for &m in c {
            values.push(m + sd * normal(rng));
        }
    }
    Matrix::new(dims, values).unwrap()
}

/// Positive data for divergences on `(0, ∞)`: log-normal blobs.
pub fn positive_blobs(rng: &mut ChaCha8Rng, n: usize, dims: usize, k: usize) -> Matrix {
    let m = blobs(rng, n, dims, k, 0.0, 3.0, 0.25);
    Matrix::new(dims, m.values().iter().map(|v| v.exp()).collect()).unwrap()
}

/// Textbook DP-means with squared distance: start from the data mean,
/// assign points in order (spawning a cluster whenever the nearest center
/// is farther than λ, ties to the lowest index), drop empty clusters, move
/// centers to member means, and stop once the labels repeat.
pub fn plain_dp_means(data: &Matrix, lambda: f64, max_iter: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let n = data.rows();
    let dims = data.cols();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mean = |idx: &[usize]| {
        let mut m = vec![0.0; dims];
        for &i in idx {
            for (a, v) in m.iter_mut().zip(data.row(i)) {
                *a += v;
            }
        }
        m.iter().map(|a| a / idx.len() as f64).collect::<Vec<f64>>()
    };
    let all: Vec<usize> = (0..n).collect();
    let mut centers = vec![mean(&all)];
    let mut labels = vec![0usize; n];
    for _ in 0..max_iter {
        let before = (labels.clone(), centers.len());
        for i in 0..n {
            let x = data.row(i);
            let mut best = (f64::INFINITY, 0);
            for (k, c) in centers.iter().enumerate() {
                let d = sq(x, c);
                if d < best.0 {
                    best = (d, k);
                }
            }
            if best.0 > lambda {
                centers.push(x.to_vec());
                labels[i] = centers.len() - 1;
            } else {
                labels[i] = best.1;
            }
        }
        let mut used: Vec<usize> = labels.clone();
        used.sort_unstable();
        used.dedup();
        let remap: std::collections::HashMap<usize, usize> =
            used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        labels.iter_mut().for_each(|l| *l = remap[l]);
        centers = (0..used.len())
            .map(|k| {
                let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == k).collect();
                mean(&idx)
            })
            .collect();
        if labels == before.0 && centers.len() == before.1 {
            break;
        }
    }
    (labels, centers)
}

/// Two Gaussian clusters in the plane plus uniformly scattered outliers.
pub fn two_clusters_with_outliers(seed: u64, per_cluster: usize, outliers: usize) -> Dataset {
    let mut r = rng(seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (k, cx) in [-4.0, 4.0].into_iter().enumerate() {
        for _ in 0..per_cluster {
            values.push(cx + normal(&mut r));
            values.push(normal(&mut r));
            labels.push(k);
        }
    }
    for _ in 0..outliers {
        values.push(r.random_range(-25.0..25.0));
        values.push(r.random_range(-25.0..25.0));
        labels.push(2);
    }
    Dataset::labeled(Matrix::new(2, values).unwrap(), labels)
}

/// A small image with flat patches, gradients and a noisy corner.
pub fn synthetic_image(seed: u64, width: usize, height: usize) -> RgbImage {
    let mut r = rng(seed);
    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let (bx, by) = (x / 16, y / 16);
            let base = match (bx + 2 * by) % 4 {
                0 => [200.0, 40.0, 40.0],
                1 => [30.0, 160.0, 60.0],
                2 => [(x * 255 / width) as f64, (y * 255 / height) as f64, 128.0],
                _ => [90.0, 90.0, 220.0],
            };
            let noise = if x >= width / 2 && y >= height / 2 { 40.0 } else { 6.0 };
            for c in base {
                let v = c + noise * normal(&mut r);
                pixels.push(v.clamp(0.0, 255.0).round() as u8);
            }
        }
    }
    RgbImage {
        width,
        height,
        pixels,
    }
}

/// Mean divergence of the points to their mean.
pub fn spread(div: &Divergence, data: &Matrix) -> f64 {
    let m = data.column_mean();
    data.iter_rows().map(|x| div.eval(x, &m).unwrap()).sum::<f64>() / data.rows() as f64
}
