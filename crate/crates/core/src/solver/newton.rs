//! Damped Newton center update, required when `f` is convex.
//!
//! The gradient and Hessian of `L̄(θ) = Σ f(d(x_i, θ))` are
//!
//! ```text
//! ∇L̄  = Σ f'(d_i) ∇d_i
//! ∇²L̄ = Σ [ f''(d_i) ∇d_i ∇d_iᵀ + f'(d_i) ∇²d_i ]
//! ```
//!
//! The step is taken on the f-mean `M = f⁻¹(L̄ / n)`, a monotone transform
//! of `L̄` whose Hessian differs by the rank-one term
//! `−(f''(M) / f'(M)) ∇L̄ ∇L̄ᵀ / (n f'(M))`. For power-type `f` with large β,
//! plain Newton on `L̄` contracts by only about `1 − 1/(2β)` per step, while
//! the f-mean is close to quadratic and converges in a few steps. Since `M`
//! and `L̄` order centers identically, the line search still enforces a
//! strict decrease of `L̄`.
//!
//! A Hessian that is not positive definite is shifted by `τI` with doubling
//! `τ`, and the step is halved until the objective strictly decreases.

use nalgebra::{DMatrix, DVector};

use super::{
    has_overlap, mean_of, member_distances, ClusterState, ClusteringConfig, Counters, Measure,
    OverlapPolicy, SolverError,
};
use crate::divergence::Divergence;
use crate::fgen::{FSpec, Shape};
use crate::matrix::Matrix;

const MAX_HALVINGS: usize = 60;
const MIN_STEP: f64 = 1e-14;
const MAX_REGULARIZATIONS: usize = 200;
/// Terms with normalized weight below this are dropped from the Hessian.
const WEIGHT_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub center: Vec<f64>,
    /// Fraction of the full Newton step that was accepted.
    pub step_size: f64,
    /// Diagonal shift that made the Hessian factorizable (0 if none).
    pub regularization: f64,
    /// False when the step was negligible and the center did not move.
    pub moved: bool,
}

pub(crate) enum Outcome {
    Moved(NewtonStep, Measure, Vec<f64>),
    Stalled,
}

fn solve_regularized(
    mut h: DMatrix<f64>,
    g: &DVector<f64>,
    cluster: usize,
) -> Result<(DVector<f64>, f64), SolverError> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok((ch.solve(&(-g)), 0.0));
    }
    let scale = (0..h.nrows()).map(|l| h[(l, l)].abs()).fold(0.0, f64::max);
    let mut tau = if scale > 0.0 { 1e-8 * scale } else { 1e-8 };
    let mut added = 0.0;
    for _ in 0..MAX_REGULARIZATIONS {
        for l in 0..h.nrows() {
            h[(l, l)] += tau - added;
        }
        added = tau;
        if let Some(ch) = h.clone().cholesky() {
            return Ok((ch.solve(&(-g)), tau));
        }
        tau *= 2.0;
    }
    Err(SolverError::SingularHessian { cluster })
}

pub(crate) fn newton_step(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    members: &[usize],
    theta: &[f64],
    dists: &[f64],
    current: &Measure,
    cluster: usize,
) -> Result<Outcome, SolverError> {
    if has_overlap(f, dists) {
        return Err(SolverError::OverlapStall { cluster });
    }
    let dim = theta.len();
    let n = members.len();

    let mut lw = Vec::with_capacity(n);
    for &d in dists {
        lw.push(f.ln_prime(d)?);
    }
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        // f' vanishes at every member, so all of them sit on the center
        return Ok(Outcome::Stalled);
    }

    let mut g = DVector::<f64>::zeros(dim);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for ((&i, &d), &l) in members.iter().zip(dists).zip(&lw) {
        let w = (l - top).exp();
        if w < WEIGHT_FLOOR {
            continue;
        }
        let der = div.derivatives_unchecked(data.row(i), theta);
        let r = w * f.curvature_ratio(d);
        for a in 0..dim {
            g[a] += w * der.grad[a];
            h[(a, a)] += w * der.hess_diag[a];
            if r != 0.0 {
                let ra = r * der.grad[a];
                for b in 0..dim {
                    h[(a, b)] += ra * der.grad[b];
                }
            }
        }
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok(Outcome::Stalled);
    }

    if f.shape() == Shape::Convex {
        let m = current.fmean();
        if let (Ok(lp), true) = (f.ln_prime(m), m.is_finite()) {
            let rel = (lp - top).exp();
            if rel > 0.0 && rel.is_finite() {
                let kappa = f.curvature_ratio(m) / (n as f64 * rel);
                h -= (&g * g.transpose()) * kappa;
            }
        }
    }

    let (p, tau) = solve_regularized(h, &g, cluster)?;
    let p_norm = p.norm();
    let mut t = 1.0;
    let mut trial = vec![0.0; dim];
    let mut trial_dists = Vec::with_capacity(n);
    for _ in 0..=MAX_HALVINGS {
        if t * p_norm < MIN_STEP {
            return Ok(Outcome::Stalled);
        }
        for a in 0..dim {
            trial[a] = theta[a] + t * p[a];
        }
        if div.check_param(&trial).is_ok() {
            member_distances(div, data, members, &trial, &mut trial_dists);
            let m = Measure::of(f, &trial_dists)?;
            if m.below(current) {
                let step = NewtonStep {
                    center: trial,
                    step_size: t,
                    regularization: tau,
                    moved: true,
                };
                return Ok(Outcome::Moved(step, m, trial_dists));
            }
        }
        t *= 0.5;
    }
    Err(SolverError::LineSearchFailure { cluster })
}

pub(crate) fn refine(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    members: &[usize],
    mut theta: Vec<f64>,
    config: &ClusteringConfig,
    delta: f64,
    cluster: usize,
    counters: &mut Counters,
) -> Result<Vec<f64>, SolverError> {
    let n = members.len();
    let mut dists = Vec::with_capacity(n);
    member_distances(div, data, members, &theta, &mut dists);
    let mut current = Measure::of(f, &dists)?;
    let mut shifted = false;

    for _ in 0..config.max_inner_iter {
        match newton_step(f, div, data, members, &theta, &dists, &current, cluster) {
            Ok(Outcome::Moved(step, m, d)) => {
                let small =
                    current.small_decrease(&m, delta, n) && config.center_settled(&theta, &step.center);
                theta = step.center;
                dists = d;
                current = m;
                if small {
                    break;
                }
            }
            Ok(Outcome::Stalled) => break,
            Err(SolverError::LineSearchFailure { .. }) => {
                counters.newton_failures += 1;
                break;
            }
            Err(SolverError::OverlapStall { .. }) => {
                if n == 1 {
                    return Ok(data.row(members[0]).to_vec());
                }
                if config.overlap_policy == OverlapPolicy::Error {
                    return Err(SolverError::OverlapStall { cluster });
                }
                if shifted {
                    break;
                }
                shifted = true;
                counters.overlap_shifts += 1;
                theta = mean_of(data, members);
                member_distances(div, data, members, &theta, &mut dists);
                current = Measure::of(f, &dists)?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(theta)
}

/// One damped Newton step for cluster `k`.
///
/// Fails with [`SolverError::LineSearchFailure`] when no step length up to
/// 60 halvings decreases the restricted objective; the center is then left
/// where it was.
pub fn center_update_newton(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    state: &ClusterState,
    k: usize,
) -> Result<NewtonStep, SolverError> {
    state.check(div, data)?;
    let members = state.members(k);
    if members.is_empty() {
        return Err(SolverError::EmptyCluster(k));
    }
    let theta = &state.centers[k];
    let mut dists = Vec::new();
    for &i in &members {
        dists.push(div.eval(data.row(i), theta)?);
    }
    let current = Measure::of(f, &dists)?;
    match newton_step(f, div, data, &members, theta, &dists, &current, k)? {
        Outcome::Moved(step, _, _) => Ok(step),
        Outcome::Stalled => Ok(NewtonStep {
            center: theta.clone(),
            step_size: 0.0,
            regularization: 0.0,
            moved: false,
        }),
    }
}
