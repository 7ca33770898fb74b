//! Vector quantization of an RGB image with 8×8 blocks as data points.
//!
//! Every block is replaced by its cluster center, so the codebook size K
//! relative to the number of blocks is the compression rate. Large β
//! pushes the codebook towards minimizing the worst block error.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::dataio::{blockify, column_rms, deblockify, permutation, scale_columns, ImageBlocks, RgbImage};
use crate::divergence::Divergence;
use crate::fgen::FSpec;
use crate::solver::{fit, ClusteringConfig};

/// `100 · K / n_blocks`, in percent.
pub fn compression_ratio(k: usize, n_blocks: usize) -> f64 {
    100.0 * k as f64 / n_blocks as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizeConfig {
    pub f: FSpec,
    pub divergence: Divergence,
    pub lambda: f64,
    /// Scale every block dimension to unit RMS before clustering.
    pub standardize: bool,
    /// Shuffle the block order before clustering.
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub max_outer_iter: usize,
    pub max_inner_iter: usize,
}

impl QuantizeConfig {
    pub fn new(f: FSpec, lambda: f64) -> Self {
        Self {
            f,
            divergence: Divergence::squared_distance(),
            lambda,
            standardize: true,
            seed: None,
            delta: None,
            max_outer_iter: 300,
            max_inner_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizeResult {
    #[serde(skip)]
    pub image: Option<RgbImage>,
    pub k: usize,
    pub n_blocks: usize,
    pub compression_ratio: f64,
    /// Average and maximum block distortion in the clustering space.
    pub avg_distortion: f64,
    pub max_distortion: f64,
    /// Largest squared error of a reconstructed block, in pixel units.
    pub max_block_sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub newton_failures: usize,
}

/// Clusters the blocks of `img` and rebuilds the image from the centers.
pub fn quantize(img: &RgbImage, config: &QuantizeConfig) -> Result<QuantizeResult, ExperimentError> {
    let original = blockify(img)?;
    let n = original.blocks.rows();
    let order = match config.seed {
        Some(s) => permutation(n, s),
        None => (0..n).collect(),
    };
    let mut data = original.blocks.select_rows(&order);
    let scales = if config.standardize {
        let s = column_rms(&data)?;
        scale_columns(&mut data, &s, false);
        Some(s)
    } else {
        None
    };

    let mut cfg = ClusteringConfig::for_f(config.lambda, &config.f)
        .with_max_outer_iter(config.max_outer_iter)
        .with_max_inner_iter(config.max_inner_iter);
    if let Some(d) = config.delta {
        cfg = cfg.with_delta(d);
    }
    let r = fit(&config.f, &config.divergence, &data, &cfg)?;

    let mut centers = crate::matrix::Matrix::from_rows(&r.state.centers).expect("equal widths");
    if let Some(s) = &scales {
        scale_columns(&mut centers, s, true);
    }
    let mut blocks = original.blocks.clone();
    for (pos, &i) in order.iter().enumerate() {
        blocks.row_mut(i).copy_from_slice(centers.row(r.state.labels[pos]));
    }
    let rebuilt = deblockify(&ImageBlocks {
        blocks,
        grid: original.grid,
    });
    let recon = blockify(&rebuilt)?;
    let max_block_sse = original
        .blocks
        .iter_rows()
        .zip(recon.blocks.iter_rows())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .fold(0.0, f64::max);

    Ok(QuantizeResult {
        image: Some(rebuilt),
        k: r.state.k(),
        n_blocks: n,
        compression_ratio: compression_ratio(r.state.k(), n),
        avg_distortion: r.avg_distortion,
        max_distortion: r.max_distortion,
        max_block_sse,
        iterations: r.iterations,
        converged: r.converged,
        newton_failures: r.newton_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(w: usize, h: usize) -> RgbImage {
        let mut pixels = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                pixels.push((x * 255 / w) as u8);
                pixels.push((y * 255 / h) as u8);
                pixels.push(((x / 8 + y / 8) % 2 * 200) as u8);
            }
        }
        RgbImage {
            width: w,
            height: h,
            pixels,
        }
    }

    #[test]
    fn ratio_arithmetic() {
        assert!((compression_ratio(86, 1536) - 5.60).abs() < 0.02);
        assert_eq!(format!("{:.2}", compression_ratio(86, 1536)), "5.60");
        assert_eq!(384 / 8 * (256 / 8), 1536);
    }

    #[test]
    fn tiny_lambda_reproduces_image() {
        let img = test_image(32, 24);
        let mut cfg = QuantizeConfig::new(FSpec::Linear, 1e-9);
        cfg.seed = Some(3);
        let r = quantize(&img, &cfg).unwrap();
        assert_eq!(r.k, r.n_blocks);
        assert_eq!(r.image.unwrap(), img);
        assert_eq!(r.max_block_sse, 0.0);
    }

    #[test]
    fn huge_lambda_gives_one_color_block() {
        let img = test_image(16, 16);
        let r = quantize(&img, &QuantizeConfig::new(FSpec::Linear, 1e12)).unwrap();
        assert_eq!(r.k, 1);
        assert_eq!(r.compression_ratio, 25.0);
    }
}
