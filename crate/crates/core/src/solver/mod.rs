//! Generalized DP-means.
//!
//! Minimizes `Σ_i f(d(x_i, θ_{c(i)})) + f(λ) K` by alternating a sequential
//! assignment pass, which opens a new cluster at any point farther than `λ`
//! from every center, with per-cluster center refinement. Concave and linear
//! `f` use the reweighted-mean update; convex `f` needs Newton steps.

mod newton;
mod weighted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{Divergence, DivergenceError};
use crate::fgen::{FError, FSpec, Shape};
use crate::matrix::Matrix;

pub use newton::{center_update_newton, NewtonStep};
pub use weighted::{center_update_weighted, resolve_overlap};

/// Distances below this count as a center sitting on a data point.
pub const OVERLAP_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Divergence(#[from] DivergenceError),

    #[error(transparent)]
    F(#[from] FError),

    #[error("data set is empty")]
    EmptyData,

    #[error("cluster state does not match the data: {0}")]
    InconsistentState(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("center of cluster {cluster} coincides with a member point where f' is infinite")]
    OverlapStall { cluster: usize },

    #[error("line search found no decrease for cluster {cluster}")]
    LineSearchFailure { cluster: usize },

    #[error("Newton system for cluster {cluster} could not be factorized")]
    SingularHessian { cluster: usize },

    #[error("center update for cluster {cluster} left the divergence domain")]
    OutOfDomain { cluster: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    WeightedMean,
    Newton,
}

impl Optimizer {
    /// Reweighted mean for linear and concave `f`, Newton for convex `f`.
    pub fn for_f(f: &FSpec) -> Self {
        match f.shape() {
            Shape::Convex => Optimizer::Newton,
            _ => Optimizer::WeightedMean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapPolicy {
    ShiftToClusterMean,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub lambda: f64,
    /// Threshold on the decrease of the objective; `None` means `1e-6 · n`.
    pub delta: Option<f64>,
    pub max_outer_iter: usize,
    pub max_inner_iter: usize,
    pub optimizer: Optimizer,
    pub overlap_policy: OverlapPolicy,
    /// When set, inner refinement also runs until the center moves by less
    /// than `center_tol · (1 + max_l |θ_l|)` in every coordinate. Needed for
    /// refits whose centers differ by less than the objective can resolve.
    #[serde(default)]
    pub center_tol: Option<f64>,
}

impl ClusteringConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            delta: None,
            max_outer_iter: 300,
            max_inner_iter: 100,
            optimizer: Optimizer::WeightedMean,
            overlap_policy: OverlapPolicy::ShiftToClusterMean,
            center_tol: None,
        }
    }

    /// Defaults with the optimizer matched to the shape of `f`.
    pub fn for_f(lambda: f64, f: &FSpec) -> Self {
        Self::new(lambda).with_optimizer(Optimizer::for_f(f))
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn with_overlap_policy(mut self, policy: OverlapPolicy) -> Self {
        self.overlap_policy = policy;
        self
    }

    pub fn with_max_outer_iter(mut self, n: usize) -> Self {
        self.max_outer_iter = n;
        self
    }

    pub fn with_center_tol(mut self, tol: f64) -> Self {
        self.center_tol = Some(tol);
        self
    }

    /// True when the move from `old` to `new` is within `center_tol`
    /// (always true when no tolerance is set).
    pub(crate) fn center_settled(&self, old: &[f64], new: &[f64]) -> bool {
        let Some(tol) = self.center_tol else {
            return true;
        };
        let scale = 1.0 + new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        old.iter().zip(new).all(|(a, b)| (a - b).abs() <= tol * scale)
    }

    pub fn with_max_inner_iter(mut self, n: usize) -> Self {
        self.max_inner_iter = n;
        self
    }

    pub fn delta_for(&self, n: usize) -> f64 {
        self.delta.unwrap_or(1e-6 * n as f64)
    }

    pub fn validate(&self, f: &FSpec) -> Result<(), SolverError> {
        if !(self.lambda > 0.0) || self.lambda.is_nan() {
            return Err(SolverError::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(SolverError::InvalidConfig(format!(
                    "delta must be positive, got {d}"
                )));
            }
        }
        if self.max_outer_iter == 0 || self.max_inner_iter == 0 {
            return Err(SolverError::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        if self.optimizer == Optimizer::WeightedMean && f.shape() == Shape::Convex {
            return Err(SolverError::InvalidConfig(
                "the weighted-mean update only decreases the objective for linear or concave f; use Newton".into(),
            ));
        }
        Ok(())
    }
}

/// Centers and 0-based assignment labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Member indices of every cluster, in data order.
    pub fn member_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.k()];
        for (i, &c) in self.labels.iter().enumerate() {
            if c < lists.len() {
                lists[c].push(i);
            }
        }
        lists
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == k)
            .map(|(i, _)| i)
            .collect()
    }

    fn check(&self, div: &Divergence, data: &Matrix) -> Result<(), SolverError> {
        if self.labels.len() != data.rows() {
            return Err(SolverError::InconsistentState(format!(
                "{} labels for {} points",
                self.labels.len(),
                data.rows()
            )));
        }
        if let Some(&c) = self.labels.iter().find(|&&c| c >= self.k()) {
            return Err(SolverError::InconsistentState(format!(
                "label {c} with only {} clusters",
                self.k()
            )));
        }
        for c in &self.centers {
            if c.len() != data.cols() {
                return Err(DivergenceError::DimensionMismatch {
                    expected: data.cols(),
                    got: c.len(),
                }
                .into());
            }
            div.check_param(c)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub state: ClusterState,
    pub objective: f64,
    pub avg_distortion: f64,
    pub max_distortion: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the initial refinement and after every assignment
    /// pass and refinement pass that followed.
    pub history: Vec<f64>,
    pub overlap_shifts: usize,
    pub newton_failures: usize,
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Counters {
    pub overlap_shifts: usize,
    pub newton_failures: usize,
}

/// The restricted objective `Σ f(d_i)` of one cluster together with its
/// f-mean. Comparisons go through the f-mean, computed in the log domain:
/// for steep `f` the sum saturates (overflow, or `f(z) ≈ −1/β` for every
/// `z < 1` when `β` is large) long before the f-mean stops resolving.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Measure {
    pub sum: f64,
    pub fmean: f64,
}

impl Measure {
    pub fn of(f: &FSpec, dists: &[f64]) -> Result<Self, FError> {
        let mut sum = 0.0;
        for &d in dists {
            sum += f.eval_extended(d)?;
        }
        let fmean = match f {
            FSpec::Linear => sum / dists.len() as f64,
            // the pole is only reachable at z = 0
            _ if sum == f64::NEG_INFINITY => 0.0,
            _ => f.mean(dists)?,
        };
        Ok(Self { sum, fmean })
    }

    pub fn fmean(&self) -> f64 {
        self.fmean
    }

    /// Strictly smaller than `other`.
    pub fn below(&self, other: &Measure) -> bool {
        if self.fmean == other.fmean {
            self.sum < other.sum
        } else {
            self.fmean < other.fmean
        }
    }

    /// True when moving from `self` to `new` lowered the sum by less than
    /// `delta` and the f-mean by less than `delta / n`. The second test
    /// matters when `f` maps distances to very small numbers, where every
    /// change of the sum is below any fixed threshold.
    pub fn small_decrease(&self, new: &Measure, delta: f64, n: usize) -> bool {
        if self.sum == f64::NEG_INFINITY {
            return true;
        }
        let by_mean = !(self.fmean - new.fmean >= delta / n as f64);
        if self.sum.is_finite() && new.sum.is_finite() {
            !(self.sum - new.sum >= delta) && by_mean
        } else {
            by_mean
        }
    }
}

pub(crate) fn member_distances(
    div: &Divergence,
    data: &Matrix,
    members: &[usize],
    theta: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend(members.iter().map(|&i| div.eval_unchecked(data.row(i), theta)));
}

pub(crate) fn has_overlap(f: &FSpec, dists: &[f64]) -> bool {
    f.infinite_slope_at_zero() && dists.iter().any(|&d| d < OVERLAP_EPS)
}

pub(crate) fn mean_of(data: &Matrix, members: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; data.cols()];
    for &i in members {
        for (a, &v) in m.iter_mut().zip(data.row(i)) {
            *a += v;
        }
    }
    let n = members.len() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

fn objective_unchecked(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    state: &ClusterState,
    lambda: f64,
) -> Result<f64, SolverError> {
    let mut sum = 0.0;
    for (i, &c) in state.labels.iter().enumerate() {
        sum += f.eval_extended(div.eval_unchecked(data.row(i), &state.centers[c]))?;
    }
    Ok(sum + f.eval(lambda)? * state.k() as f64)
}

/// `Σ_i f(d(x_i, θ_{c(i)})) + f(λ) K`.
///
/// Values of `f` at the pole of a power mean with `a = 0, β ≤ 0` are taken
/// as `−∞`, and overflow yields `+∞`.
pub fn objective_eval(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    state: &ClusterState,
    lambda: f64,
) -> Result<f64, SolverError> {
    state.check(div, data)?;
    for r in data.iter_rows() {
        div.check_data(r)?;
    }
    objective_unchecked(f, div, data, state, lambda)
}

fn assign_in_place(div: &Divergence, data: &Matrix, state: &mut ClusterState, lambda: f64) {
    for i in 0..data.rows() {
        let x = data.row(i);
        let mut best = (f64::INFINITY, 0);
        for (k, c) in state.centers.iter().enumerate() {
            let d = div.eval_unchecked(x, c);
            if d < best.0 {
                best = (d, k);
            }
        }
        if best.0 > lambda {
            state.centers.push(x.to_vec());
            state.labels[i] = state.centers.len() - 1;
        } else {
            state.labels[i] = best.1;
        }
    }
    prune_empty(state);
}

fn prune_empty(state: &mut ClusterState) {
    let mut counts = vec![0usize; state.k()];
    for &c in &state.labels {
        counts[c] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut remap = vec![usize::MAX; counts.len()];
    let mut next = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            remap[k] = next;
            next += 1;
        }
    }
    let mut k = 0;
    state.centers.retain(|_| {
        k += 1;
        counts[k - 1] > 0
    });
    for l in &mut state.labels {
        *l = remap[*l];
    }
}

/// One sequential assignment pass. Points are visited in order; a point
/// whose nearest center is farther than `λ` becomes the center of a new
/// cluster. Ties go to the lowest cluster index and clusters left without
/// members are removed afterwards, compacting the labels.
pub fn assign_step(
    div: &Divergence,
    data: &Matrix,
    state: &ClusterState,
    lambda: f64,
) -> Result<ClusterState, SolverError> {
    state.check(div, data)?;
    for r in data.iter_rows() {
        div.check_param(r)?;
    }
    let mut next = state.clone();
    if next.k() == 0 {
        return Err(SolverError::InconsistentState("no clusters".into()));
    }
    assign_in_place(div, data, &mut next, lambda);
    Ok(next)
}

/// Refines one center until the decrease of its restricted objective falls
/// below `delta` or the inner iteration cap is reached.
pub(crate) fn refine(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    members: &[usize],
    theta: Vec<f64>,
    config: &ClusteringConfig,
    delta: f64,
    cluster: usize,
    counters: &mut Counters,
) -> Result<Vec<f64>, SolverError> {
    if members.is_empty() {
        return Err(SolverError::EmptyCluster(cluster));
    }
    match config.optimizer {
        Optimizer::WeightedMean => {
            weighted::refine(f, div, data, members, theta, config, delta, cluster, counters)
        }
        Optimizer::Newton => {
            newton::refine(f, div, data, members, theta, config, delta, cluster, counters)
        }
    }
}

fn validate_inputs(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    config: &ClusteringConfig,
) -> Result<(), SolverError> {
    f.validate()?;
    div.validate()?;
    config.validate(f)?;
    if data.is_empty() || data.cols() == 0 {
        return Err(SolverError::EmptyData);
    }
    // every point may become a center, so all of them must be valid parameters
    for r in data.iter_rows() {
        div.check_param(r)?;
    }
    Ok(())
}

fn distortion(div: &Divergence, data: &Matrix, state: &ClusterState) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (i, &c) in state.labels.iter().enumerate() {
        let d = div.eval_unchecked(data.row(i), &state.centers[c]);
        sum += d;
        max = max.max(d);
    }
    (sum / data.rows() as f64, max)
}

/// Refines a single center over all rows of `data`, starting from `init`.
pub fn refine_center(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    init: &[f64],
    config: &ClusteringConfig,
) -> Result<Vec<f64>, SolverError> {
    validate_inputs(f, div, data, config)?;
    div.check_param(init)?;
    let members: Vec<usize> = (0..data.rows()).collect();
    let delta = config.delta_for(data.rows());
    refine(
        f,
        div,
        data,
        &members,
        init.to_vec(),
        config,
        delta,
        0,
        &mut Counters::default(),
    )
}

/// Runs the solver with `K` fixed at 1: the data mean, refined.
pub fn fit_single_cluster(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    config: &ClusteringConfig,
) -> Result<FitResult, SolverError> {
    validate_inputs(f, div, data, config)?;
    let n = data.rows();
    let members: Vec<usize> = (0..n).collect();
    let mut counters = Counters::default();
    let center = refine(
        f,
        div,
        data,
        &members,
        data.column_mean(),
        config,
        config.delta_for(n),
        0,
        &mut counters,
    )?;
    let state = ClusterState {
        centers: vec![center],
        labels: vec![0; n],
    };
    finish(f, div, data, state, config, 0, true, vec![], counters)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    state: ClusterState,
    config: &ClusteringConfig,
    iterations: usize,
    converged: bool,
    mut history: Vec<f64>,
    counters: Counters,
) -> Result<FitResult, SolverError> {
    let objective = objective_unchecked(f, div, data, &state, config.lambda)?;
    if history.last() != Some(&objective) {
        history.push(objective);
    }
    let (avg_distortion, max_distortion) = distortion(div, data, &state);
    Ok(FitResult {
        state,
        objective,
        avg_distortion,
        max_distortion,
        iterations,
        converged,
        history,
        overlap_shifts: counters.overlap_shifts,
        newton_failures: counters.newton_failures,
    })
}

/// Fits generalized DP-means.
///
/// Starts from one cluster at the data mean, refines it, then alternates
/// assignment and refinement of every center. Stops when an outer
/// iteration leaves the labels unchanged and lowers the objective by less
/// than `delta` (the objective test is skipped when it is not finite).
pub fn fit(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    config: &ClusteringConfig,
) -> Result<FitResult, SolverError> {
    validate_inputs(f, div, data, config)?;
    let n = data.rows();
    let delta = config.delta_for(n);
    let mut counters = Counters::default();

    let all: Vec<usize> = (0..n).collect();
    let first = refine(f, div, data, &all, data.column_mean(), config, delta, 0, &mut counters)?;
    let mut state = ClusterState {
        centers: vec![first],
        labels: vec![0; n],
    };
    let mut obj = objective_unchecked(f, div, data, &state, config.lambda)?;
    let mut history = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_outer_iter {
        iterations += 1;
        let prev_labels = state.labels.clone();
        let prev_k = state.k();

        assign_in_place(div, data, &mut state, config.lambda);
        history.push(objective_unchecked(f, div, data, &state, config.lambda)?);

        let lists = state.member_lists();
        for (k, members) in lists.iter().enumerate() {
            let theta = std::mem::take(&mut state.centers[k]);
            state.centers[k] =
                refine(f, div, data, members, theta, config, delta, k, &mut counters)?;
        }
        let next = objective_unchecked(f, div, data, &state, config.lambda)?;
        history.push(next);

        let stable = state.k() == prev_k && state.labels == prev_labels;
        let stop = stable && !(obj.is_finite() && next.is_finite() && obj - next >= delta);
        obj = next;
        if stop {
            converged = true;
            break;
        }
    }
    finish(f, div, data, state, config, iterations, converged, history, counters)
}
