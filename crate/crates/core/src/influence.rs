//! Influence of a single outlier on a cluster center.
//!
//! Appending one point `x*` to a cluster of `m` points shifts the minimizer
//! of `Σ f(d(x_i, θ))` by approximately `−G⁻¹ f'(d(x*, θ)) ∇_θ d(x*, θ)`,
//! where `G = Σ ∇²_θ f(d(x_i, θ))`. Scaled by `m` this is the influence
//! function. An estimator is robust when the influence stays bounded as
//! `‖x*‖ → ∞`, and strongly robust (redescending) when it vanishes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{Divergence, DivergenceError, Generator};
use crate::fgen::{FError, FSpec, Shape};
use crate::matrix::Matrix;
use crate::par::{self, Execution};
use crate::solver::{self, ClusteringConfig, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfluenceError {
    #[error(transparent)]
    Divergence(#[from] DivergenceError),

    #[error(transparent)]
    F(#[from] FError),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("the curvature matrix G is singular")]
    SingularG,

    #[error("no robustness rule for f = {f} with the {generator} divergence")]
    Unsupported { f: String, generator: &'static str },

    #[error("influence curves are one-dimensional, got {0} dimensions")]
    NotOneDimensional(usize),

    #[error("empty cluster")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RobustnessClass {
    Redescending,
    Bounded,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub analytic_if: Vec<f64>,
    pub empirical_if: Vec<f64>,
    pub robustness_class: RobustnessClass,
    /// `(x*, value)` pairs of the one-dimensional curve, if requested.
    pub curve: Vec<(f64, f64)>,
}

/// `−m G⁻¹ f'(d(x*, θ)) ∇_θ d(x*, θ)` with
/// `G = Σ_i [f''(d_i) ∇d_i ∇d_iᵀ + f'(d_i) ∇²d_i]`.
pub fn analytic_influence(
    f: &FSpec,
    div: &Divergence,
    cluster: &Matrix,
    theta: &[f64],
    x_star: &[f64],
) -> Result<Vec<f64>, InfluenceError> {
    if cluster.is_empty() {
        return Err(InfluenceError::Empty);
    }
    let dim = theta.len();
    let star = div.derivatives(x_star, theta)?;
    if star.grad.iter().all(|&g| g == 0.0) {
        return Ok(vec![0.0; dim]);
    }
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for x in cluster.iter_rows() {
        let der = div.derivatives(x, theta)?;
        let (p, s) = (f.prime(der.value)?, f.second(der.value)?);
        for a in 0..dim {
            g[(a, a)] += p * der.hess_diag[a];
            for b in 0..dim {
                g[(a, b)] += s * der.grad[a] * der.grad[b];
            }
        }
    }
    let p_star = f.prime(star.value)?;
    let rhs = DVector::from_iterator(dim, star.grad.iter().map(|&v| v * p_star));
    let sol = g.lu().solve(&rhs).ok_or(InfluenceError::SingularG)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(InfluenceError::SingularG);
    }
    let m = cluster.rows() as f64;
    Ok(sol.iter().map(|&v| -m * v).collect())
}

/// Solver settings for the tight refits used by [`empirical_influence`].
pub fn tight_config(f: &FSpec) -> ClusteringConfig {
    ClusteringConfig::for_f(1.0, f)
        .with_delta(1e-12)
        .with_center_tol(1e-13)
        .with_max_inner_iter(20_000)
}

/// `m (θ̃ − θ)` where `θ` is the refined center of the cluster and `θ̃` that
/// of the cluster with `x*` appended. Returns `(θ, m (θ̃ − θ))`.
pub fn empirical_influence(
    f: &FSpec,
    div: &Divergence,
    cluster: &Matrix,
    x_star: &[f64],
    config: &ClusteringConfig,
) -> Result<(Vec<f64>, Vec<f64>), InfluenceError> {
    if cluster.is_empty() {
        return Err(InfluenceError::Empty);
    }
    let theta = solver::refine_center(f, div, cluster, &cluster.column_mean(), config)?;
    let mut extended = cluster.clone();
    extended
        .push_row(x_star)
        .map_err(|_| DivergenceError::DimensionMismatch {
            expected: cluster.cols(),
            got: x_star.len(),
        })?;
    let tilde = solver::refine_center(f, div, &extended, &theta, config)?;
    let m = cluster.rows() as f64;
    let shift = tilde.iter().zip(&theta).map(|(a, b)| m * (a - b)).collect();
    Ok((theta, shift))
}

fn unsupported(f: &FSpec, g: &Generator) -> InfluenceError {
    InfluenceError::Unsupported {
        f: format!("{f:?}"),
        generator: g.name(),
    }
}

/// Asymptotic behavior of the influence function as `‖x*‖ → ∞`, from the
/// closed-form rules for each `(f, divergence)` family.
///
/// For the exponential loss the data can escape towards `−∞`, where the
/// divergence only grows linearly; the label reported is the worst case
/// over both directions.
pub fn classify_robustness(f: &FSpec, div: &Divergence) -> Result<RobustnessClass, InfluenceError> {
    use RobustnessClass::*;
    let g = &div.generator;
    if let Generator::Binomial(_) = g {
        return Err(unsupported(f, g));
    }
    if div.is_total() {
        return Ok(match f.shape() {
            Shape::Convex => Divergent,
            _ if f.slope_vanishes() => Redescending,
            _ => Bounded,
        });
    }
    let beta = match *f {
        FSpec::Linear => return Ok(Divergent),
        FSpec::LogSumExp { beta } => return Ok(if beta < 1.0 { Redescending } else { Divergent }),
        FSpec::PowerMean { beta, .. } => beta,
    };
    let by_threshold = |edge: f64| {
        if beta > edge {
            Divergent
        } else if beta == edge {
            Bounded
        } else {
            Redescending
        }
    };
    Ok(match *g {
        Generator::SquaredDistance => by_threshold(0.5),
        Generator::Alpha(alpha) if alpha < 1.0 => by_threshold(0.0),
        Generator::Alpha(alpha) if alpha == 1.0 => {
            if beta > 0.0 {
                Divergent
            } else {
                Redescending
            }
        }
        Generator::Alpha(alpha) => by_threshold(1.0 - 1.0 / alpha),
        Generator::ExpLoss => by_threshold(0.0),
        Generator::Binomial(_) => unreachable!(),
    })
}

/// `−f'(d(x*, θ)) ∂_θ d(x*, θ)`, the one-dimensional influence without the
/// `G⁻¹` factor. For a Bregman divergence this is `f'(d) φ''(θ) (x* − θ)`.
pub fn influence_factor(f: &FSpec, div: &Divergence, theta: f64, x: f64) -> Result<f64, InfluenceError> {
    let der = div.derivatives(&[x], &[theta])?;
    let slope = f.prime(der.value)?;
    if der.grad[0] == 0.0 {
        return Ok(0.0);
    }
    Ok(-slope * der.grad[0])
}

/// Evaluates [`influence_factor`] over `grid`. Points where `f'` is infinite
/// (a center coinciding with `x*` under a power mean with `a = 0, β < 1`)
/// are left out.
pub fn influence_curve_1d(
    f: &FSpec,
    div: &Divergence,
    theta: f64,
    grid: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, f64)>, InfluenceError> {
    let values = par::map_collect(exec, grid, |&x| match influence_factor(f, div, theta, x) {
        Err(InfluenceError::F(FError::InfiniteWeight)) => Ok(None),
        Err(e) => Err(e),
        Ok(v) => Ok(Some((x, v))),
    });
    let mut out = Vec::with_capacity(grid.len());
    for v in values {
        if let Some(p) = v? {
            out.push(p);
        }
    }
    Ok(out)
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Reference offset `x* − θ` against which the far tail is compared.
pub const TRACE_REFERENCE_OFFSET: f64 = 1e2;
/// Largest offset probed.
pub const TRACE_MAX_OFFSET: f64 = 1e300;

/// Classifies a traced influence curve numerically.
///
/// Probes offsets `x* − θ = 10^(k/4)` outwards in every direction in which
/// the domain is unbounded, up to `1e300` or the last offset with a finite
/// divergence, and compares the magnitude there with the magnitude at an
/// offset of 100: a ratio above 2 is divergent, below 0.5 redescending,
/// anything else bounded. Returns the worst case over directions.
///
/// Slowly varying tails (logarithmic factors such as `1/ln x*`) need the
/// long range; a one-decade ratio cannot separate them from a constant.
pub fn trace_robustness(f: &FSpec, div: &Divergence, theta: f64) -> Result<RobustnessClass, InfluenceError> {
    let directions: &[f64] = if div.generator.real_domain() {
        &[1.0, -1.0]
    } else {
        &[1.0]
    };
    let mut worst = RobustnessClass::Redescending;
    for &dir in directions {
        let reference = influence_factor(f, div, theta, theta + dir * TRACE_REFERENCE_OFFSET)?.abs();
        let mut far = reference;
        let mut k = 9;
        loop {
            let off = 10f64.powf(k as f64 / 4.0);
            if off > TRACE_MAX_OFFSET {
                break;
            }
            let x = theta + dir * off;
            let d = div.eval(&[x], &[theta])?;
            if !d.is_finite() {
                break;
            }
            far = influence_factor(f, div, theta, x)?.abs();
            k += 1;
        }
        let ratio = far / reference;
        // fast-decaying tails can underflow to zero already at the reference
        let class = if far == 0.0 {
            RobustnessClass::Redescending
        } else if ratio.is_nan() || ratio > 2.0 {
            RobustnessClass::Divergent
        } else if ratio < 0.5 {
            RobustnessClass::Redescending
        } else {
            RobustnessClass::Bounded
        };
        worst = worst.max(class);
    }
    Ok(worst)
}

/// Analytic and empirical influence at `x_star`, the closed-form class and,
/// for one-dimensional data, the curve over `grid`.
pub fn influence_report(
    f: &FSpec,
    div: &Divergence,
    cluster: &Matrix,
    x_star: &[f64],
    grid: &[f64],
    config: &ClusteringConfig,
) -> Result<InfluenceReport, InfluenceError> {
    let (theta, empirical_if) = empirical_influence(f, div, cluster, x_star, config)?;
    let analytic_if = analytic_influence(f, div, cluster, &theta, x_star)?;
    let robustness_class = classify_robustness(f, div)?;
    let curve = if grid.is_empty() {
        vec![]
    } else if theta.len() != 1 {
        return Err(InfluenceError::NotOneDimensional(theta.len()));
    } else {
        influence_curve_1d(f, div, theta[0], grid, Execution::Parallel)?
    };
    Ok(InfluenceReport {
        analytic_if,
        empirical_if,
        robustness_class,
        curve,
    })
}
