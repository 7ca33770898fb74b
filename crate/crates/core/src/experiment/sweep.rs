//! λ × β sweep over shuffled copies of a labeled data set.
//!
//! 1. The starting penalty is the largest maximum distortion of a
//!    single-cluster fit over the β grid.
//! 2. For every β, λ decays geometrically from there. At each λ the data
//!    is clustered once per shuffle and K, NMI and the maximum distortion
//!    are averaged over the shuffles.
//! 3. The λ chain of a β stops once the mean K exceeds a multiple of the
//!    true number of classes.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sig6, ExperimentError};
use crate::dataio::{permutation, Dataset};
use crate::divergence::Divergence;
use crate::fgen::{effective_beta, FSpec};
use crate::matrix::Matrix;
use crate::metrics::nmi;
use crate::par::{map_collect, Execution};
use crate::solver::{fit, fit_single_cluster, ClusteringConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FKind {
    PowerMean,
    LogSumExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for BetaGrid {
    fn default() -> Self {
        Self {
            min: -2.0,
            max: 5.0,
            step: 0.1,
        }
    }
}

impl BetaGrid {
    pub fn single(beta: f64) -> Self {
        Self {
            min: beta,
            max: beta,
            step: 1.0,
        }
    }

    /// Grid values, computed as `min + i·step` and rounded to 10 decimals
    /// so that, e.g., `1.0` appears exactly.
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.max < self.min {
            return vec![];
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| ((self.min + i as f64 * self.step) * 1e10).round() / 1e10)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    pub f_kind: FKind,
    /// Offset of the power mean.
    pub a: f64,
    pub divergence: Divergence,
    pub lambda_decay: f64,
    pub n_shuffles: usize,
    pub seed: u64,
    pub k_cap_multiplier: f64,
    pub max_lambda_steps: usize,
    /// Starting λ; computed from single-cluster fits when `None`.
    pub initial_lambda: Option<f64>,
    pub delta: Option<f64>,
    pub execution: Execution,
}

impl SweepConfig {
    pub fn new(betas: Vec<f64>, f_kind: FKind, divergence: Divergence) -> Self {
        Self {
            betas,
            f_kind,
            a: 0.0,
            divergence,
            lambda_decay: 1.01,
            n_shuffles: 10,
            seed: 0,
            k_cap_multiplier: 3.0,
            max_lambda_steps: 5000,
            initial_lambda: None,
            delta: None,
            execution: Execution::Parallel,
        }
    }

    /// The `f` used at grid value `beta`. For log-sum-exp over a
    /// dimension-averaged divergence the grid value is mapped through
    /// [`effective_beta`].
    pub fn f_for(&self, beta: f64, dims: usize) -> FSpec {
        match self.f_kind {
            FKind::PowerMean => FSpec::power_mean(beta, self.a),
            FKind::LogSumExp if self.divergence.dim_average => {
                FSpec::log_sum_exp(effective_beta(beta, dims))
            }
            FKind::LogSumExp => FSpec::log_sum_exp(beta),
        }
    }

    fn clustering(&self, f: &FSpec, lambda: f64) -> ClusteringConfig {
        let c = ClusteringConfig::for_f(lambda, f);
        match self.delta {
            Some(d) => c.with_delta(d),
            None => c,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.betas.is_empty() {
            return bad("beta grid is empty");
        }
        if !(self.lambda_decay > 1.0) {
            return bad("lambda decay must be greater than 1");
        }
        if self.n_shuffles == 0 {
            return bad("at least one shuffle is needed");
        }
        if !(self.k_cap_multiplier > 0.0) {
            return bad("k cap multiplier must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta: f64,
    pub lambda: f64,
    pub mean_k: f64,
    pub mean_nmi: f64,
    pub mean_max_distortion: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub initial_lambda: f64,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cells_for(&self, beta: f64) -> impl DoubleEndedIterator<Item = &SweepCell> + '_ {
        self.cells.iter().filter(move |c| c.beta == beta)
    }

    /// For every K that both β values reach with all shuffles agreeing
    /// (integral mean K), the smallest mean maximum distortion of each.
    /// Returns `(K, distortion at beta_a, distortion at beta_b)`.
    pub fn matched_k(&self, beta_a: f64, beta_b: f64) -> Vec<(usize, f64, f64)> {
        let best = |beta: f64| {
            let mut m = std::collections::BTreeMap::<usize, f64>::new();
            for c in self.cells_for(beta) {
                if c.mean_k.fract() == 0.0 {
                    let e = m.entry(c.mean_k as usize).or_insert(f64::INFINITY);
                    *e = e.min(c.mean_max_distortion);
                }
            }
            m
        };
        let (a, b) = (best(beta_a), best(beta_b));
        a.iter()
            .filter_map(|(&k, &da)| b.get(&k).map(|&db| (k, da, db)))
            .collect()
    }
}

/// Largest maximum distortion of a single-cluster fit over the β grid,
/// on the unshuffled data.
pub fn initial_lambda(data: &Matrix, config: &SweepConfig) -> Result<f64, ExperimentError> {
    let dims = data.cols();
    let results = map_collect(config.execution, &config.betas, |&beta| {
        let f = config.f_for(beta, dims);
        fit_single_cluster(&f, &config.divergence, data, &config.clustering(&f, 1.0))
            .map(|r| r.max_distortion)
    });
    let mut best: f64 = 0.0;
    for r in results {
        best = best.max(r?);
    }
    Ok(best)
}

struct Run {
    k: usize,
    nmi: f64,
    max_distortion: f64,
}

/// Runs the sweep, handing every finished cell to `sink` as soon as it is
/// aggregated (cells of one β in decreasing λ, β in grid order).
pub fn run_sweep(
    ds: &Dataset,
    config: &SweepConfig,
    mut sink: impl FnMut(&SweepCell) -> Result<(), ExperimentError>,
) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let labels = ds.true_labels.as_ref().ok_or(ExperimentError::MissingLabels)?;
    let k_true = ds.n_classes().unwrap_or(1);
    let data = &ds.data;
    let lambda0 = match config.initial_lambda {
        Some(l) => l,
        None => initial_lambda(data, config)?,
    };
    if !(lambda0 > 0.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "initial lambda must be positive, got {lambda0}"
        )));
    }

    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let shuffles: Vec<(Matrix, Vec<usize>)> = (0..config.n_shuffles)
        .map(|_| {
            let perm = permutation(data.rows(), seeder.random());
            let l = perm.iter().map(|&i| labels[i]).collect();
            (data.select_rows(&perm), l)
        })
        .collect();

    let cap = config.k_cap_multiplier * k_true as f64;
    let mut cells = Vec::new();
    for &beta in &config.betas {
        let f = config.f_for(beta, data.cols());
        let mut lambda = lambda0;
        for _ in 0..config.max_lambda_steps {
            let cfg = config.clustering(&f, lambda);
            let runs = map_collect(config.execution, &shuffles, |(x, l)| {
                let r = fit(&f, &config.divergence, x, &cfg)?;
                Ok::<_, ExperimentError>(Run {
                    k: r.state.k(),
                    nmi: nmi(&r.state.labels, l)?,
                    max_distortion: r.max_distortion,
                })
            });
            let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
            let n = runs.len() as f64;
            let cell = SweepCell {
                beta,
                lambda,
                mean_k: runs.iter().map(|r| r.k as f64).sum::<f64>() / n,
                mean_nmi: runs.iter().map(|r| r.nmi).sum::<f64>() / n,
                mean_max_distortion: runs.iter().map(|r| r.max_distortion).sum::<f64>() / n,
                runs: runs.len(),
            };
            sink(&cell)?;
            let done = cell.mean_k > cap;
            cells.push(cell);
            if done {
                break;
            }
            lambda /= config.lambda_decay;
        }
    }
    Ok(SweepResult {
        initial_lambda: lambda0,
        cells,
    })
}

pub const SWEEP_CSV_HEADER: &str = "beta,lambda,mean_k,mean_nmi,mean_max_distortion";

pub fn write_sweep_row(w: &mut impl Write, c: &SweepCell) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{}",
        sig6(c.beta),
        sig6(c.lambda),
        sig6(c.mean_k),
        sig6(c.mean_nmi),
        sig6(c.mean_max_distortion)
    )
}

pub fn write_sweep_csv(w: &mut impl Write, cells: &[SweepCell]) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for c in cells {
        write_sweep_row(w, c)?;
    }
    Ok(())
}
