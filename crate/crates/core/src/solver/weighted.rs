//! Reweighted-mean center update for linear and concave `f`.
//!
//! Each step replaces `θ` by the mean of the members weighted by
//! `f'(d(x_i, θ))`; for a total Bregman divergence the weighted average is
//! taken over `∇φ(x_i)` and mapped back through `(∇φ)⁻¹`, with the extra
//! factor `1/√(1 + c²‖∇φ(x_i)‖²)` in the weights. With concave `f` this is a
//! majorize-minimize step, so the restricted objective never increases.

use super::{
    has_overlap, mean_of, member_distances, ClusterState, ClusteringConfig, Counters, Measure,
    OverlapPolicy, SolverError,
};
use crate::divergence::Divergence;
use crate::fgen::FSpec;
use crate::matrix::Matrix;

/// Normalized weights `w_i / max w`, computed from `ln f'` so that extreme
/// slopes neither overflow nor underflow to all-zero.
pub(crate) fn log_weights(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    members: &[usize],
    dists: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let mut lw = Vec::with_capacity(dists.len());
    for (&i, &d) in members.iter().zip(dists) {
        let mut v = f.ln_prime(d)?;
        if div.is_total() {
            v += div.total_factor(data.row(i)).ln();
        }
        lw.push(v);
    }
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lw.iter_mut().for_each(|v| *v = (*v - m).exp());
    Ok(lw)
}

pub(crate) fn weighted_step(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    members: &[usize],
    dists: &[f64],
    cluster: usize,
) -> Result<Vec<f64>, SolverError> {
    let w = log_weights(f, div, data, members, dists)?;
    let total: f64 = w.iter().sum();
    let mut acc = vec![0.0; data.cols()];
    let g = &div.generator;
    for (&i, &wi) in members.iter().zip(&w) {
        if wi == 0.0 {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(data.row(i)) {
            *a += wi * if div.is_total() { g.dphi(x) } else { x };
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    if div.is_total() {
        for a in acc.iter_mut() {
            *a = g
                .dphi_inverse(*a)
                .ok_or(SolverError::OutOfDomain { cluster })?;
        }
    }
    if div.check_param(&acc).is_err() {
        return Err(SolverError::OutOfDomain { cluster });
    }
    Ok(acc)
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
    let mut next_dists = Vec::with_capacity(n);

    for _ in 0..config.max_inner_iter {
        if has_overlap(f, &dists) {
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
            continue;
        }
        let next = weighted_step(f, div, data, members, &dists, cluster)?;
        member_distances(div, data, members, &next, &mut next_dists);
        let m = Measure::of(f, &next_dists)?;
        if current.below(&m) && config.center_tol.is_none() {
            // rounding noise around a fixed point
            break;
        }
        let small = current.small_decrease(&m, delta, n) && config.center_settled(&theta, &next);
        theta = next;
        std::mem::swap(&mut dists, &mut next_dists);
        current = m;
        if small {
            break;
        }
    }
    Ok(theta)
}

/// One reweighted-mean update of cluster `k`.
///
/// Returns [`SolverError::OverlapStall`] when `f'` is infinite at zero and the
/// center sits on a member, since the update cannot move it then.
pub fn center_update_weighted(
    f: &FSpec,
    div: &Divergence,
    data: &Matrix,
    state: &ClusterState,
    k: usize,
) -> Result<Vec<f64>, SolverError> {
    state.check(div, data)?;
    let members = state.members(k);
    if members.is_empty() {
        return Err(SolverError::EmptyCluster(k));
    }
    let mut dists = Vec::new();
    for &i in &members {
        dists.push(div.eval(data.row(i), &state.centers[k])?);
    }
    if has_overlap(f, &dists) {
        return Err(SolverError::OverlapStall { cluster: k });
    }
    weighted_step(f, div, data, &members, &dists, k)
}

/// Moves a stalled center off the data point: to the plain mean of its
/// members, or onto the member itself for a singleton.
pub fn resolve_overlap(
    data: &Matrix,
    state: &ClusterState,
    k: usize,
) -> Result<Vec<f64>, SolverError> {
    let members = state.members(k);
    match members.len() {
        0 => Err(SolverError::EmptyCluster(k)),
        1 => Ok(data.row(members[0]).to_vec()),
        _ => Ok(mean_of(data, &members)),
    }
}
