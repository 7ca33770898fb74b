mod common;

use gdpmeans::solver::{center_update_newton, center_update_weighted, resolve_overlap};
use gdpmeans::{
    fit, fit_single_cluster, objective_eval, ClusterState, ClusteringConfig, Divergence, FSpec,
    Generator, Matrix, OverlapPolicy, SolverError,
};
use proptest::prelude::*;

use common::*;

fn sq() -> Divergence {
    Divergence::squared_distance()
}

#[test]
fn identical_points_form_one_cluster() {
    let data = Matrix::new(2, [1.5, -2.0].repeat(7)).unwrap();
    for f in [FSpec::Linear, FSpec::power_mean(0.5, 0.0), FSpec::power_mean(3.0, 0.0), FSpec::log_sum_exp(-1.0)] {
        let r = fit(&f, &sq(), &data, &ClusteringConfig::for_f(0.1, &f)).unwrap();
        assert_eq!(r.state.k(), 1, "{f:?}");
        assert_eq!(r.state.centers[0], vec![1.5, -2.0]);
        assert_eq!(r.avg_distortion, 0.0);
        assert_eq!(r.max_distortion, 0.0);
    }
}

#[test]
fn separated_groups() {
    let data = Matrix::column(&[0.0, 0.1, 100.0, 100.1]);
    let r = fit(&FSpec::Linear, &sq(), &data, &ClusteringConfig::new(1.0)).unwrap();
    assert_eq!(r.state.k(), 2);
    assert_eq!(r.state.labels, vec![0, 0, 1, 1]);
    assert!((r.state.centers[0][0] - 0.05).abs() < 1e-12);
    assert!((r.state.centers[1][0] - 100.05).abs() < 1e-12);
    assert!(r.converged);
}

#[test]
fn lambda_above_single_cluster_distortion_keeps_one_cluster() {
    let mut r = rng(1);
    let data = blobs(&mut r, 80, 3, 4, -5.0, 5.0, 1.0);
    let m = data.column_mean();
    let max_d = data.iter_rows().map(|x| sq().eval(x, &m).unwrap()).fold(0.0, f64::max);
    let res = fit(&FSpec::Linear, &sq(), &data, &ClusteringConfig::new(max_d)).unwrap();
    assert_eq!(res.state.k(), 1);
}

#[test]
fn fit_is_deterministic() {
    let mut r = rng(2);
    let data = blobs(&mut r, 150, 2, 3, -8.0, 8.0, 1.0);
    let f = FSpec::power_mean(0.5, 1.0);
    let cfg = ClusteringConfig::for_f(4.0, &f);
    let a = fit(&f, &sq(), &data, &cfg).unwrap();
    let b = fit(&f, &sq(), &data, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn returned_objective_matches_evaluation() {
    let mut r = rng(3);
    let data = positive_blobs(&mut r, 60, 2, 3);
    let div = Divergence::bregman(Generator::Alpha(1.0)).total(1.0);
    for f in [FSpec::Linear, FSpec::log_sum_exp(0.5), FSpec::power_mean(2.0, 0.0)] {
        let cfg = ClusteringConfig::for_f(0.5, &f);
        let res = fit(&f, &div, &data, &cfg).unwrap();
        let again = objective_eval(&f, &div, &data, &res.state, cfg.lambda).unwrap();
        assert_eq!(res.objective.to_bits(), again.to_bits(), "{f:?}");
        assert_eq!(res.history.last(), Some(&res.objective));
    }
}

#[test]
fn convex_f_lowers_worst_case_distortion() {
    let data = Matrix::column(&[0.0, 0.2, 0.4, 0.6, 10.0]);
    let lin = fit_single_cluster(&FSpec::Linear, &sq(), &data, &ClusteringConfig::new(1.0)).unwrap();
    let f = FSpec::power_mean(50.0, 0.0);
    let hi = fit_single_cluster(&f, &sq(), &data, &ClusteringConfig::for_f(1.0, &f)).unwrap();
    assert!(hi.max_distortion < lin.max_distortion);
    // the worst-case center approaches the midrange
    assert!((hi.state.centers[0][0] - 5.0).abs() < 0.5);
}

#[test]
fn robust_f_ignores_an_outlier() {
    let data = Matrix::column(&[0.0, 0.1, -0.1, 0.2, -0.2, 50.0]);
    let f = FSpec::power_mean(-1.0, 1.0);
    let r = fit_single_cluster(&f, &sq(), &data, &ClusteringConfig::new(1e9)).unwrap();
    assert!(r.state.centers[0][0].abs() < 0.05, "{:?}", r.state.centers);
}

#[test]
fn weighted_update_examples() {
    let data = Matrix::column(&[0.0, 2.0]);
    let st = ClusterState {
        centers: vec![vec![5.0]],
        labels: vec![0, 0],
    };
    assert_eq!(center_update_weighted(&FSpec::Linear, &sq(), &data, &st, 0).unwrap(), vec![1.0]);
    let tbd = sq().total(0.0);
    assert_eq!(center_update_weighted(&FSpec::Linear, &tbd, &data, &st, 0).unwrap(), vec![1.0]);

    let single = Matrix::column(&[3.0]);
    let st1 = ClusterState {
        centers: vec![vec![-4.0]],
        labels: vec![0],
    };
    let next = center_update_weighted(&FSpec::log_sum_exp(0.5), &sq(), &single, &st1, 0).unwrap();
    assert_eq!(next, vec![3.0]);
}

#[test]
fn overlap_is_shifted_or_reported() {
    let data = Matrix::column(&[0.0, 2.0]);
    let st = ClusterState {
        centers: vec![vec![0.0]],
        labels: vec![0, 0],
    };
    let f = FSpec::power_mean(0.5, 0.0);
    assert_eq!(
        center_update_weighted(&f, &sq(), &data, &st, 0),
        Err(SolverError::OverlapStall { cluster: 0 })
    );
    assert_eq!(resolve_overlap(&data, &st, 0).unwrap(), vec![1.0]);
    // with a > 0 the slope at zero is finite and the update proceeds
    assert!(center_update_weighted(&FSpec::power_mean(0.5, 1.0), &sq(), &data, &st, 0).is_ok());

    let data = Matrix::column(&[0.0, 2.0, 0.0]);
    let cfg = ClusteringConfig::new(100.0).with_overlap_policy(OverlapPolicy::Error);
    assert!(fit(&f, &sq(), &data, &cfg).is_ok());
    let shifted = fit(&f, &sq(), &Matrix::column(&[1.0, 0.0, 2.0]), &ClusteringConfig::new(100.0)).unwrap();
    assert!(shifted.overlap_shifts >= 1);
    assert_eq!(
        fit(&f, &sq(), &Matrix::column(&[1.0, 0.0, 2.0]), &cfg),
        Err(SolverError::OverlapStall { cluster: 0 })
    );
}

#[test]
fn newton_step_linear_is_exact() {
    let data = Matrix::column(&[1.0, 2.0, 6.0]);
    let st = ClusterState {
        centers: vec![vec![-7.0]],
        labels: vec![0; 3],
    };
    let step = center_update_newton(&FSpec::Linear, &sq(), &data, &st, 0).unwrap();
    assert!((step.center[0] - 3.0).abs() < 1e-12);
    assert_eq!(step.step_size, 1.0);
}

#[test]
fn steep_power_mean_finds_midpoint() {
    let data = Matrix::column(&[0.0, 1.0]);
    let f = FSpec::power_mean(200.0, 0.0);
    let cfg = ClusteringConfig::for_f(1e9, &f).with_max_inner_iter(1000);
    let r = gdpmeans::refine_center(&f, &sq(), &data, &[0.1], &cfg).unwrap();
    assert!((r[0] - 0.5).abs() < 1e-6, "{r:?}");
}

#[test]
fn out_of_domain_data_is_rejected() {
    let data = Matrix::column(&[1.0, -1.0]);
    let kl = Divergence::bregman(Generator::Alpha(1.0));
    assert!(matches!(
        fit(&FSpec::Linear, &kl, &data, &ClusteringConfig::new(1.0)),
        Err(SolverError::Divergence(_))
    ));
    // convex f needs the Newton optimizer
    assert!(matches!(
        fit(&FSpec::power_mean(2.0, 0.0), &sq(), &data, &ClusteringConfig::new(1.0)),
        Err(SolverError::InvalidConfig(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fitted_states_are_consistent(seed in 0u64..10_000, beta in prop::sample::select(vec![-1.0, 0.0, 0.5, 1.0, 2.0]), scale in 0.1f64..5.0) {
        let mut r = rng(seed);
        let data = blobs(&mut r, 40, 2, 3, -6.0, 6.0, 1.0);
        let f = FSpec::power_mean(beta, 1.0);
        let lambda = spread(&sq(), &data) * scale;
        let res = fit(&f, &sq(), &data, &ClusteringConfig::for_f(lambda, &f)).unwrap();
        let k = res.state.k();
        prop_assert!(k >= 1);
        let mut used = vec![false; k];
        for &l in &res.state.labels {
            prop_assert!(l < k);
            used[l] = true;
        }
        prop_assert!(used.iter().all(|&u| u));
        prop_assert!(res.iterations <= 300);
    }
}
