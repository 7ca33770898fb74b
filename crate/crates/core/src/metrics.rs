//! Clustering evaluation: normalized mutual information and distortion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{Divergence, DivergenceError};
use crate::matrix::Matrix;
use crate::solver::ClusterState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("labelings have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("empty labeling")]
    Empty,

    #[error("state does not match the data")]
    Inconsistent,

    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

/// Sums positive terms in ascending order so that the result does not
/// depend on the order in which the terms were produced.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn counts(labels: &[usize]) -> HashMap<usize, usize> {
    let mut m = HashMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Plug-in entropy of a labeling, in nats.
pub fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let terms = counts(labels)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    ordered_sum(terms)
}

/// Plug-in mutual information of two labelings, in nats.
pub fn mutual_information(c: &[usize], a: &[usize]) -> Result<f64, MetricsError> {
    if c.len() != a.len() {
        return Err(MetricsError::LengthMismatch(c.len(), a.len()));
    }
    if c.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = c.len() as f64;
    let (nc, na) = (counts(c), counts(a));
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in c.iter().zip(a) {
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    let terms = joint
        .iter()
        .map(|(&(x, y), &nxy)| {
            let nxy = nxy as f64;
            let ratio = n * nxy / (nc[&x] as f64 * na[&y] as f64);
            nxy / n * ratio.ln()
        })
        .collect();
    Ok(ordered_sum(terms).max(0.0))
}

/// True when two labelings induce the same partition of the points.
pub fn same_partition(c: &[usize], a: &[usize]) -> bool {
    if c.len() != a.len() {
        return false;
    }
    let (mut fwd, mut back) = (HashMap::new(), HashMap::new());
    c.iter()
        .zip(a)
        .all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// `I(C, A) / √(H(C) H(A))`.
///
/// When either labeling has zero entropy the ratio is undefined; the value
/// is then 1 if both describe the same partition and 0 otherwise.
pub fn nmi(c: &[usize], a: &[usize]) -> Result<f64, MetricsError> {
    let i = mutual_information(c, a)?;
    let (hc, ha) = (entropy(c), entropy(a));
    if hc == 0.0 || ha == 0.0 {
        return Ok(if same_partition(c, a) { 1.0 } else { 0.0 });
    }
    // the product is formed in a fixed order so nmi(c, a) == nmi(a, c)
    let denom = (hc.min(ha) * hc.max(ha)).sqrt();
    Ok((i / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionStats {
    pub avg: f64,
    pub max: f64,
}

/// Average and maximum divergence of each point to its assigned center.
pub fn distortion_stats(
    div: &Divergence,
    data: &Matrix,
    state: &ClusterState,
) -> Result<DistortionStats, MetricsError> {
    if state.labels.len() != data.rows() || state.labels.iter().any(|&c| c >= state.k()) {
        return Err(MetricsError::Inconsistent);
    }
    if data.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (i, &c) in state.labels.iter().enumerate() {
        let d = div.eval(data.row(i), &state.centers[c])?;
        sum += d;
        max = max.max(d);
    }
    Ok(DistortionStats {
        avg: sum / data.rows() as f64,
        max,
    })
}
