//! Loading tabular data, RMS scaling, seeded shuffles and 8×8 image blocks.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::Matrix;

/// Side length of the square image blocks.
pub const BLOCK: usize = 8;
/// Values per RGB block.
pub const BLOCK_DIMS: usize = BLOCK * BLOCK * 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("no usable rows ({dropped} dropped)")]
    EmptyDataset { dropped: usize },

    #[error("column {column} is identically zero")]
    ZeroVariance { column: usize },

    #[error("image is {width}x{height}; both sides must be positive multiples of {BLOCK}")]
    BadDimensions { width: usize, height: usize },

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("label column {0:?} not found")]
    LabelColumn(String),

    #[error("label map: {0}")]
    LabelMap(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: Matrix,
    /// Labels factorized in order of first appearance.
    pub true_labels: Option<Vec<usize>>,
    /// Original label strings, indexed by factorized label.
    pub label_names: Vec<String>,
    pub feature_names: Option<Vec<String>>,
    /// Rows dropped at load time because of missing or unparsable values.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn unlabeled(data: Matrix) -> Self {
        Self {
            data,
            true_labels: None,
            label_names: vec![],
            feature_names: None,
            dropped_rows: 0,
        }
    }

    pub fn labeled(data: Matrix, labels: Vec<usize>) -> Self {
        Self {
            true_labels: Some(labels),
            ..Self::unlabeled(data)
        }
    }

    /// Number of distinct true labels.
    pub fn n_classes(&self) -> Option<usize> {
        self.true_labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Header name or 0-based column index (negative counts from the end).
    pub label: Option<String>,
    /// Raw label value → replacement, applied before factorization.
    pub label_map: Option<HashMap<String, String>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn resolve_label(spec: &str, header: Option<&[String]>, width: usize) -> Result<usize, DataError> {
    if let Some(h) = header {
        if let Some(i) = h.iter().position(|c| c == spec) {
            return Ok(i);
        }
    }
    match spec.parse::<i64>() {
        Ok(i) if i >= 0 && (i as usize) < width => Ok(i as usize),
        Ok(i) if i < 0 && i.unsigned_abs() as usize <= width => Ok(width - i.unsigned_abs() as usize),
        _ => Err(DataError::LabelColumn(spec.to_string())),
    }
}

/// Reads a comma-separated file of numeric features with an optional
/// header and an optional label column.
///
/// The first row is taken as a header when it contains the label name or
/// when none of its cells is numeric. Rows with a missing or unparsable
/// feature (for example `?`) or an empty label are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut records = Vec::new();
    for r in rdr.records() {
        let r = r?;
        if r.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push(r.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let Some(first) = records.first() else {
        return Err(DataError::EmptyDataset { dropped: 0 });
    };
    let width = first.len();
    let is_header = first.iter().all(|c| parse_cell(c).is_none())
        || opts
            .label
            .as_ref()
            .is_some_and(|l| first.iter().any(|c| c == l) && l.parse::<i64>().is_err());
    let header = if is_header { Some(records.remove(0)) } else { None };
    let label_col = opts
        .label
        .as_deref()
        .map(|l| resolve_label(l, header.as_deref(), width))
        .transpose()?;

    let mut data = Matrix::default();
    let mut raw_labels = Vec::new();
    let mut dropped = 0;
    'rows: for rec in &records {
        if rec.len() != width {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(width);
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_col {
                continue;
            }
            match parse_cell(cell) {
                Some(v) => row.push(v),
                None => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        if let Some(j) = label_col {
            let raw = &rec[j];
            if raw.is_empty() || raw == "?" {
                dropped += 1;
                continue;
            }
            let mapped = opts
                .label_map
                .as_ref()
                .and_then(|m| m.get(raw))
                .unwrap_or(raw);
            raw_labels.push(mapped.clone());
        }
        data.push_row(&row).expect("rows have equal width");
    }
    if data.is_empty() {
        return Err(DataError::EmptyDataset { dropped });
    }

    let mut label_names: Vec<String> = Vec::new();
    let true_labels = label_col.map(|_| {
        let mut index: HashMap<String, usize> = HashMap::new();
        raw_labels
            .iter()
            .map(|l| {
                *index.entry(l.clone()).or_insert_with(|| {
                    label_names.push(l.clone());
                    label_names.len() - 1
                })
            })
            .collect()
    });
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|&(j, _)| Some(j) != label_col)
            .map(|(_, n)| n)
            .collect()
    });
    Ok(Dataset {
        data,
        true_labels,
        label_names,
        feature_names,
        dropped_rows: dropped,
    })
}

/// Reads a two-column `from_label,to_label` file. A header row is allowed.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<HashMap<String, String>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut map = HashMap::new();
    for (i, r) in rdr.records().enumerate() {
        let r = r?;
        if r.len() != 2 {
            return Err(DataError::LabelMap(format!("line {} has {} fields", i + 1, r.len())));
        }
        if i == 0 && (&r[0] == "from_label" || &r[0] == "from") {
            continue;
        }
        map.insert(r[0].to_string(), r[1].to_string());
    }
    Ok(map)
}

/// Root mean square of every column.
pub fn column_rms(data: &Matrix) -> Result<Vec<f64>, DataError> {
    let mut acc = vec![0.0; data.cols()];
    for r in data.iter_rows() {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a += v * v;
        }
    }
    let n = data.rows() as f64;
    acc.iter()
        .enumerate()
        .map(|(j, &s)| {
            if s == 0.0 {
                Err(DataError::ZeroVariance { column: j })
            } else {
                Ok((s / n).sqrt())
            }
        })
        .collect()
}

/// Divides (or, with `inverse`, multiplies) each column by `scales`.
pub fn scale_columns(data: &mut Matrix, scales: &[f64], inverse: bool) {
    for i in 0..data.rows() {
        for (v, &s) in data.row_mut(i).iter_mut().zip(scales) {
            if inverse {
                *v *= s;
            } else {
                *v /= s;
            }
        }
    }
}

/// Divides every column by its root mean square. Columns are not centered.
pub fn standardize(ds: &Dataset) -> Result<Dataset, DataError> {
    let scales = column_rms(&ds.data)?;
    let mut out = ds.clone();
    scale_columns(&mut out.data, &scales, false);
    Ok(out)
}

/// A seeded permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Reorders rows (and labels with them) by a seeded permutation.
pub fn shuffle(ds: &Dataset, seed: u64) -> Dataset {
    let perm = permutation(ds.data.rows(), seed);
    Dataset {
        data: ds.data.select_rows(&perm),
        true_labels: ds
            .true_labels
            .as_ref()
            .map(|l| perm.iter().map(|&i| l[i]).collect()),
        ..ds.clone()
    }
}

/// An 8-bit RGB image, pixels row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let img = image::load(BufReader::new(file), ImageFormat::Pnm)?.to_rgb8();
    Ok(RgbImage {
        width: img.width() as usize,
        height: img.height() as usize,
        pixels: img.into_raw(),
    })
}

/// Writes a binary (P6) PPM.
pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(
            &img.pixels,
            img.width as u32,
            img.height as u32,
            ExtendedColorType::Rgb8,
        )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBlocks {
    /// One row of 192 values per block.
    pub blocks: Matrix,
    /// Block grid as (rows, cols).
    pub grid: (usize, usize),
}

/// Cuts an image into 8×8 blocks scanned row-major. Each block becomes
/// the 64 pixels in row-major order, each contributing R, G, B.
pub fn blockify(img: &RgbImage) -> Result<ImageBlocks, DataError> {
    let (w, h) = (img.width, img.height);
    if w == 0 || h == 0 || w % BLOCK != 0 || h % BLOCK != 0 || img.pixels.len() != w * h * 3 {
        return Err(DataError::BadDimensions {
            width: w,
            height: h,
        });
    }
    let grid = (h / BLOCK, w / BLOCK);
    let mut values = Vec::with_capacity(w * h * 3);
    for br in 0..grid.0 {
        for bc in 0..grid.1 {
            for y in 0..BLOCK {
                let start = ((br * BLOCK + y) * w + bc * BLOCK) * 3;
                values.extend(img.pixels[start..start + BLOCK * 3].iter().map(|&p| f64::from(p)));
            }
        }
    }
    Ok(ImageBlocks {
        blocks: Matrix::new(BLOCK_DIMS, values).expect("whole blocks"),
        grid,
    })
}

/// Reassembles an image, rounding every value and clamping it to 0..=255.
pub fn deblockify(blocks: &ImageBlocks) -> RgbImage {
    let (rows, cols) = blocks.grid;
    let (w, h) = (cols * BLOCK, rows * BLOCK);
    let mut pixels = vec![0u8; w * h * 3];
    for (b, block) in blocks.blocks.iter_rows().enumerate() {
        let (br, bc) = (b / cols, b % cols);
        for y in 0..BLOCK {
            let start = ((br * BLOCK + y) * w + bc * BLOCK) * 3;
            for (dst, &v) in pixels[start..start + BLOCK * 3]
                .iter_mut()
                .zip(&block[y * BLOCK * 3..(y + 1) * BLOCK * 3])
            {
                *dst = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    RgbImage {
        width: w,
        height: h,
        pixels,
    }
}
