use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rpcr_bench::{paired_summary, prediction_error, screen_predictors};

fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|k| {
        (
            prop::collection::vec(-50.0..50.0f64, k),
            prop::collection::vec(-50.0..50.0f64, k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_error_is_a_mean_square((a, b) in vec_pair()) {
        let a = Array1::from(a);
        let b = Array1::from(b);
        let e = prediction_error(a.view(), b.view()).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(prediction_error(a.view(), a.view()).unwrap(), 0.0);
        let back = prediction_error(b.view(), a.view()).unwrap();
        prop_assert!((e - back).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn paired_mean_is_difference_of_means((a, b) in vec_pair()) {
        let s = paired_summary(&a, &b).unwrap();
        let k = a.len() as f64;
        let expected = a.iter().sum::<f64>() / k - b.iter().sum::<f64>() / k;
        prop_assert!((s.mean_diff - expected).abs() <= 1e-9);
        prop_assert!(s.se_diff >= 0.0);
        prop_assert_eq!(s.units, a.len());
    }

    #[test]
    fn screening_keeps_the_most_correlated_columns(
        cells in prop::collection::vec(-5.0..5.0f64, 12 * 8),
        y in prop::collection::vec(-5.0..5.0f64, 12),
        k in 0usize..=8,
    ) {
        let x = Array2::from_shape_vec((12, 8), cells).unwrap();
        let y = Array1::from(y);
        let keep = screen_predictors(x.view(), y.view(), k).unwrap();
        prop_assert_eq!(keep.len(), k);
        let corr = |j: usize| {
            let c = x.column(j).to_owned() - x.column(j).mean().unwrap();
            let yc = &y - y.mean().unwrap();
            let d = (c.dot(&c) * yc.dot(&yc)).sqrt();
            if d > 0.0 { (c.dot(&yc) / d).abs() } else { 0.0 }
        };
        let worst_kept = keep.iter().map(|&j| corr(j)).fold(f64::INFINITY, f64::min);
        for j in (0..8).filter(|j| !keep.contains(j)) {
            prop_assert!(corr(j) <= worst_kept + 1e-12);
        }
    }
}
