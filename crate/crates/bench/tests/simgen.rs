use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpcr_bench::simgen::{
    block_scales, distinct_singular_values, draw_contamination, draw_error, gen_design,
    gen_design_seeded, gen_noise, theta_star, Contamination, ErrorLaw, Model, NoiseSpec,
};

fn sample_variance(law: ErrorLaw, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..draws).map(|_| draw_error(law, &mut rng)).collect();
    let m = xs.iter().sum::<f64>() / draws as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws - 1) as f64
}

#[test]
fn model_one_block_scales() {
    let (a, b, active) = block_scales(Model::M1, 100, 500, None).unwrap();
    assert!((a - 80.178).abs() < 1e-3, "{a}");
    assert!((b - 7.332).abs() < 1e-3, "{b}");
    assert_eq!(active, (0..7).collect::<Vec<_>>());
}

#[test]
fn model_two_block_scales_and_eigengap() {
    let (a, b, active) = block_scales(Model::M2, 50, 400, Some(1.0)).unwrap();
    assert!((a - 20.0).abs() < 1e-12);
    assert!((b - 800f64.sqrt()).abs() < 1e-12);
    assert_eq!(active, (44..50).collect::<Vec<_>>());

    let d = gen_design_seeded(Model::M2, 50, 400, Some(1.0), 3).unwrap();
    let x = DMatrix::from_row_iterator(50, 400, d.x.iter().copied());
    let gram = &x * x.transpose() / 400.0;
    let mut eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    // Six active eigenvalues at κ, the rest at 2κ.
    assert!(eig[..6].iter().all(|e| (e - 1.0).abs() < 1e-6));
    assert!(eig[6..].iter().all(|e| (e - 2.0).abs() < 1e-6));
    assert!((eig[6] - eig[5] - 1.0).abs() < 1e-6);
}

#[test]
fn design_has_two_singular_values() {
    for (model, n, p, kappa) in [(Model::M1, 40, 60, None), (Model::M1, 30, 20, None), (Model::M2, 25, 80, Some(0.5))] {
        let d = gen_design_seeded(model, n, p, kappa, 11).unwrap();
        let sv = distinct_singular_values(&d.x, 1e-8).unwrap();
        let mut expected = vec![d.a, d.b];
        expected.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(sv.len(), 2, "{sv:?}");
        for (s, e) in sv.iter().zip(&expected) {
            assert!((s - e).abs() < 1e-8 * e, "{s} vs {e}");
        }
    }
}

#[test]
fn coefficient_vectors() {
    let t = theta_star(Model::M1, 10);
    assert_eq!(t.to_vec(), vec![0.483, 0.0, 0.029, 0.019, 0.0, 0.126, 0.009, 0.0, 0.0, 0.0]);
    let t = theta_star(Model::M2, 8);
    assert_eq!(t.to_vec(), vec![0.003, 0.003, 0.009, 0.125, 0.003, 0.019, 0.029, 0.482]);
}

#[test]
fn latent_mean_norm() {
    let d = gen_design_seeded(Model::M1, 60, 90, None, 5).unwrap();
    let lhs = d.y_star.dot(&d.y_star);
    let rhs = 60.0 * d.theta_star.dot(&d.theta_star);
    assert!((lhs - rhs).abs() <= 1e-8 * rhs);
}

#[test]
fn rejects_small_dimensions() {
    assert!(block_scales(Model::M1, 7, 100, None).is_err());
    assert!(block_scales(Model::M2, 5, 100, Some(1.0)).is_err());
    assert!(block_scales(Model::M2, 50, 100, None).is_err());
    assert!(block_scales(Model::M2, 50, 100, Some(0.0)).is_err());
}

#[test]
fn no_contamination_leaves_the_design() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = gen_design(Model::M1, 20, 30, None, &mut rng).unwrap();
    let spec = NoiseSpec {
        error_law: ErrorLaw::Normal,
        contamination: Contamination::None,
    };
    let data = gen_noise(&d, &spec, &mut rng).unwrap();
    assert_eq!(data.z, d.x);
}

#[test]
fn standardized_error_laws_have_unit_variance() {
    let v = sample_variance(ErrorLaw::MixnormStd, 1_000_000, 8);
    assert!((0.98..=1.02).contains(&v), "mixture {v}");
    let v = sample_variance(ErrorLaw::Normal, 1_000_000, 9);
    assert!((0.99..=1.01).contains(&v), "normal {v}");
    // Unscaled mixture variance 0.9·1 + 0.1·100.
    assert!((0.9 * 1.0 + 0.1 * 100.0 - 10.9_f64).abs() < 1e-12);
}

#[test]
fn standardized_t3_matches_its_distribution_function() {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let t3 = StudentsT::new(0.0, 1.0, 3.0).unwrap();
    let draws = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<f64> = (0..draws).map(|_| draw_error(ErrorLaw::T3Std, &mut rng)).collect();
    for x in [-2.0, -1.0, -0.3, 0.0, 0.5, 1.0, 2.5] {
        let empirical = xs.iter().filter(|v| **v <= x).count() as f64 / draws as f64;
        let exact = t3.cdf(x * 3f64.sqrt());
        assert!((empirical - exact).abs() < 0.005, "x = {x}: {empirical} vs {exact}");
    }
}

#[test]
fn ar_contamination_lag_one_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = draw_contamination(Contamination::ArCorr, 100_000, 6, &mut rng);
    let (mut num, mut den_a, mut den_b) = (0.0, 0.0, 0.0);
    for row in w.rows() {
        for j in 1..row.len() {
            num += row[j] * row[j - 1];
            den_a += row[j] * row[j];
            den_b += row[j - 1] * row[j - 1];
        }
    }
    let rho = num / (den_a * den_b).sqrt();
    assert!((rho - 0.5).abs() < 0.02, "{rho}");
    let lag2: f64 = w.rows().into_iter().map(|r| r[2] * r[0]).sum::<f64>() / 100_000.0;
    assert!((lag2 - 0.25).abs() < 0.02, "{lag2}");
}

#[test]
fn generation_is_reproducible() {
    let spec = NoiseSpec {
        error_law: ErrorLaw::T3Std,
        contamination: Contamination::ArCorr,
    };
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = gen_design(Model::M2, 30, 40, Some(2.0), &mut rng).unwrap();
        gen_noise(&d, &spec, &mut rng).unwrap()
    };
    let a = draw(99);
    let b = draw(99);
    assert_eq!(a.z, b.z);
    assert_eq!(a.y, b.y);
    assert_ne!(a.y, draw(100).y);
    assert!(a.y.iter().all(|v| v.is_finite()));
}

#[test]
fn text_forms_round_trip() {
    for law in [ErrorLaw::Normal, ErrorLaw::T3Std, ErrorLaw::MixnormStd] {
        assert_eq!(law.to_string().parse::<ErrorLaw>().unwrap(), law);
    }
    for c in [Contamination::None, Contamination::Indep, Contamination::ArCorr] {
        assert_eq!(c.to_string().parse::<Contamination>().unwrap(), c);
    }
    assert_eq!("M2".parse::<Model>().unwrap(), Model::M2);
    assert!("M3".parse::<Model>().is_err());
}
