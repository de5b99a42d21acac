use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rpcr_core::estimators::{fit_l1pcr_design, fit_rpcr_design};
use rpcr_core::linalg::soft_threshold;
use rpcr_core::tuning::refit_on_support;
use rpcr_core::{
    fit_l1pcr, fit_lasso, fit_rpcr, predict, solve_weighted_rank_l1, Dataset, LambdaRule,
    MethodTag, PcBasis, RankProblem, RpcrConfig, SolveOptions,
};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

fn noisy(n: usize, p: usize, seed: u64) -> Dataset {
    let z = gaussian(n, p, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let y = Array1::from_shape_fn(n, |i| 2.0 * z[[i, 0]] - z[[i, 1]] + rng.sample::<f64, _>(StandardNormal));
    Dataset::new(z, y).unwrap()
}

fn tight() -> RpcrConfig {
    RpcrConfig {
        solve: SolveOptions {
            obj_tol: 1e-10,
            ..SolveOptions::default()
        },
        ..RpcrConfig::default()
    }
}

fn max_abs(a: &Array1<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn noiseless_one_sparse_recovery() {
    let z = gaussian(30, 12, 3);
    let y0 = Array1::zeros(30);
    let (basis, _) = PcBasis::from_raw(&Dataset::new(z.clone(), y0).unwrap()).unwrap();
    let y = basis.utilde.column(2).mapv(|v| 3.0 * v) + 5.0;
    let data = Dataset::new(z.clone(), y.clone()).unwrap();
    let (basis, fit) = fit_rpcr(&data, &RpcrConfig::default()).unwrap();
    assert!(fit.support.contains(&2));
    let pred = predict(&fit, &basis, z.view()).unwrap();
    let err = (&pred - &y).mapv(|e| e * e).mean().unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn fitted_mean_and_support_invariants() {
    let data = noisy(40, 15, 8);
    let (basis, fit) = fit_rpcr(&data, &RpcrConfig::default()).unwrap();
    assert_eq!(fit.method_tag, MethodTag::Rpcr);
    let direct = basis.utilde.dot(&fit.theta_hat);
    assert!(max_abs(&(&direct - &fit.fitted_mean)) < 1e-10);
    let support: Vec<usize> = (0..fit.theta_hat.len())
        .filter(|&j| fit.theta_hat[j].abs() > 1e-8)
        .collect();
    assert_eq!(fit.support, support);
    assert!(fit.lambda_used.lambda0.unwrap() > 0.0);
    assert_eq!(fit.diagnostics.stages.len(), 2);
}

#[test]
fn as_many_components_as_observations() {
    let data = noisy(12, 30, 5);
    let (basis, fit) = fit_rpcr(&data, &RpcrConfig::default()).unwrap();
    assert_eq!(basis.m(), 12);
    assert_eq!(fit.theta_hat.len(), 12);
    assert!(fit.fitted_mean.iter().all(|v| v.is_finite()));
}

#[test]
fn prediction_on_training_rows_is_self_consistent() {
    let data = noisy(35, 10, 21);
    let (basis, rpcr) = fit_rpcr(&data, &RpcrConfig::default()).unwrap();
    let (basis_ls, l1) = fit_l1pcr(&data, &LambdaRule::Fixed(0.05), &SolveOptions::default()).unwrap();
    for (b, fit) in [(&basis, &rpcr), (&basis_ls, &l1)] {
        let pred = predict(fit, b, data.z.view()).unwrap();
        assert!(max_abs(&(&pred - &fit.fitted_values())) < 1e-10);
    }
}

#[test]
fn duplicated_row_gets_identical_prediction() {
    let data = noisy(30, 8, 2);
    let (basis, fit) = fit_rpcr(&data, &RpcrConfig::default()).unwrap();
    let rows = ndarray::stack![Axis(0), data.z.row(4), data.z.row(4)];
    let pred = predict(&fit, &basis, rows.view()).unwrap();
    assert_eq!(pred[0], pred[1]);
}

#[test]
fn huge_lambda_gives_zero_and_constant_prediction() {
    let data = noisy(25, 6, 4);
    let (basis, fit) = fit_l1pcr(&data, &LambdaRule::Fixed(1e6), &SolveOptions::default()).unwrap();
    assert!(fit.theta_hat.iter().all(|t| *t == 0.0));
    assert!(fit.fitted_mean.iter().all(|t| *t == 0.0));
    let pred = predict(&fit, &basis, gaussian(5, 6, 99).view()).unwrap();
    let level = data.y.mean().unwrap();
    assert!(pred.iter().all(|p| (p - level).abs() < 1e-12));
}

#[test]
fn l1pcr_is_soft_thresholding_on_the_basis() {
    let data = noisy(40, 10, 6);
    let lambda = 0.2;
    let (basis, fit) = fit_l1pcr(&data, &LambdaRule::Fixed(lambda), &SolveOptions::default()).unwrap();
    let yc = &data.y - data.y.mean().unwrap();
    let corr = basis.utilde.t().dot(&yc) / 40.0;
    for j in 0..basis.m() {
        assert!((fit.theta_hat[j] - soft_threshold(corr[j], lambda)).abs() < 1e-10);
    }
}

#[test]
fn cross_validated_lambda_is_reproducible() {
    let data = noisy(50, 12, 13);
    let rule = LambdaRule::cv(7);
    let a = fit_l1pcr(&data, &rule, &SolveOptions::default()).unwrap().1;
    let b = fit_l1pcr(&data, &rule, &SolveOptions::default()).unwrap().1;
    assert_eq!(a.lambda_used.lambda_hat, b.lambda_used.lambda_hat);
    assert!(a.diagnostics.cv.is_some());
    let c = fit_lasso(&data, &rule, &SolveOptions::default()).unwrap();
    assert_eq!(c.method_tag, MethodTag::Lasso);
    assert_eq!(c.theta_hat.len(), 12);
}

#[test]
fn column_sign_flip_equivariance() {
    let data = noisy(30, 10, 31);
    let (basis, _) = PcBasis::from_raw(&data).unwrap();
    let mut flipped = basis.utilde.clone();
    flipped.column_mut(1).mapv_inplace(|v| -v);
    let cfg = tight();
    let a = fit_rpcr_design(basis.utilde.view(), data.y.view(), &cfg).unwrap();
    let b = fit_rpcr_design(flipped.view(), data.y.view(), &cfg).unwrap();
    assert!((a.theta_hat[1] + b.theta_hat[1]).abs() < 1e-8);
    assert!(max_abs(&(&a.fitted_mean - &b.fitted_mean)) < 1e-8);

    let rule = LambdaRule::Fixed(0.1);
    let a = fit_l1pcr_design(basis.utilde.view(), data.y.view(), &rule, &cfg.solve).unwrap();
    let b = fit_l1pcr_design(flipped.view(), data.y.view(), &rule, &cfg.solve).unwrap();
    assert!((a.theta_hat[1] + b.theta_hat[1]).abs() < 1e-8);
    assert!(max_abs(&(&a.fitted_mean - &b.fitted_mean)) < 1e-8);
}

#[test]
fn response_location_equivariance() {
    let data = noisy(30, 9, 17);
    let shifted = Dataset::new(data.z.clone(), &data.y + 4.25).unwrap();
    let probe = gaussian(4, 9, 77);

    let (ba, a) = fit_rpcr(&data, &tight()).unwrap();
    let (bb, b) = fit_rpcr(&shifted, &tight()).unwrap();
    assert!(max_abs(&(&a.theta_hat - &b.theta_hat)) < 1e-8);
    let pa = predict(&a, &ba, probe.view()).unwrap();
    let pb = predict(&b, &bb, probe.view()).unwrap();
    assert!(max_abs(&(&pb - &pa).mapv(|d| d - 4.25)) < 1e-8);

    let a = fit_lasso(&data, &LambdaRule::Fixed(0.1), &SolveOptions::default()).unwrap();
    let b = fit_lasso(&shifted, &LambdaRule::Fixed(0.1), &SolveOptions::default()).unwrap();
    assert!(max_abs(&(&a.theta_hat - &b.theta_hat)) < 1e-12);
    let pa = a.predict_design(probe.view()).unwrap();
    let pb = b.predict_design(probe.view()).unwrap();
    assert!(max_abs(&(&pb - &pa).mapv(|d| d - 4.25)) < 1e-10);
}

#[test]
fn separated_weights_reproduce_the_oracle_refit() {
    let opts = SolveOptions::default();
    for seed in 0..4 {
        let x = gaussian(30, 6, 40 + seed);
        let beta = Array1::from(vec![1.5, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = x.dot(&beta) + Array1::from_shape_fn(30, |_| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let prob = RankProblem::from_uncentered(y.view(), x.view()).unwrap();
        let weights = Array1::from(vec![0.0, 0.0, 10.0, 10.0, 10.0, 10.0]);
        let rep = solve_weighted_rank_l1(&prob, &weights, &opts).unwrap();
        let (_, refit_loss) = refit_on_support(&prob, &[0, 1], &opts).unwrap();
        assert!((rep.objective - refit_loss).abs() <= 10.0 * opts.obj_tol);
        assert!(rep.theta_hat.slice(s![2..]).iter().all(|t| *t == 0.0));
    }
}

#[test]
fn rejects_mismatched_prediction_rows() {
    let data = noisy(20, 5, 1);
    let (basis, fit) = fit_rpcr(&data, &RpcrConfig::default()).unwrap();
    assert!(predict(&fit, &basis, gaussian(2, 4, 0).view()).is_err());
    let lasso = fit_lasso(&data, &LambdaRule::Fixed(0.1), &SolveOptions::default()).unwrap();
    assert!(predict(&lasso, &basis, data.z.view()).is_err());
}

#[test]
fn method_tags_round_trip() {
    for tag in MethodTag::ALL {
        assert_eq!(tag.to_string().parse::<MethodTag>().unwrap(), tag);
    }
    assert_eq!("l1pcr".parse::<MethodTag>().unwrap(), MethodTag::L1pcr);
    assert!("ridge".parse::<MethodTag>().is_err());
}

#[test]
fn strong_signal_selects_the_true_support() {
    let mut hits = 0;
    for seed in 0..100 {
        let (basis, _) = PcBasis::from_raw(&Dataset::new(gaussian(100, 40, seed), Array1::zeros(100)).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
        let y = basis.utilde.column(3).mapv(|v| 4.0 * v)
            + Array1::from_shape_fn(100, |_| 0.01 * rng.sample::<f64, _>(StandardNormal));
        let mut cfg = RpcrConfig::default();
        cfg.lambda0.seed = seed;
        let fit = fit_rpcr_design(basis.utilde.view(), y.view(), &cfg).unwrap();
        if fit.support == vec![3] {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits} of 100");
}
