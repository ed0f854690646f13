use emspec_core::garch::{
    fit_indicator_volatility, garch11_fit, garch_filter, garch_simulate, gaussian_log_likelihood,
    prepare_series, GarchFitConfig, GarchParams, SeriesTransform,
};
use emspec_core::stats::{median, moments};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Straight-line recursion and likelihood with no shared code.
fn oracle_log_likelihood(x: &[f64], a0: f64, a1: f64, b1: f64, init: f64) -> f64 {
    let mut s2_prev = init;
    let mut x2_prev = init;
    let mut ll = 0.0;
    for &xt in x {
        let s2 = a0 + a1 * x2_prev + b1 * s2_prev;
        ll += -0.5 * ((2.0 * std::f64::consts::PI).ln() + s2.ln() + xt * xt / s2);
        s2_prev = s2;
        x2_prev = xt * xt;
    }
    ll
}

#[test]
fn reported_likelihood_matches_recomputation() {
    let p = GarchParams::garch11(0.1, 0.1, 0.8).unwrap();
    for seed in [1u64, 2, 3] {
        let x = garch_simulate(&p, 2000, seed).unwrap();
        let fit = garch11_fit(&x, GarchFitConfig::default()).unwrap();
        let want = oracle_log_likelihood(
            &x,
            fit.params.alpha0(),
            fit.alpha1(),
            fit.beta1(),
            fit.sigma2_init,
        );
        assert!((fit.log_likelihood - want).abs() <= 1e-8 * want.abs().max(1.0));
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
        assert!(fit.converged);
        assert!(!fit.boundary);
    }
}

#[test]
fn long_run_variance_matches_stationary_formula() {
    let p = GarchParams::garch11(0.1, 0.1, 0.8).unwrap();
    let x = garch_simulate(&p, 200_000, 42).unwrap();
    let path = garch_filter(&x, &p, p.unconditional_variance()).unwrap();
    let mean_s2 = path.iter().sum::<f64>() / path.len() as f64;
    let want = 0.1 / (1.0 - 0.1 - 0.8);
    assert!((mean_s2 / want - 1.0).abs() < 0.05, "{mean_s2} vs {want}");
}

#[test]
fn volatility_clustering_fattens_tails() {
    let p = GarchParams::garch11(0.1, 0.1, 0.8).unwrap();
    let x = garch_simulate(&p, 100_000, 5).unwrap();
    let k = moments(&x).unwrap().excess_kurtosis + 3.0;
    assert!(k > 3.0, "kurtosis {k}");
}

#[test]
fn no_dynamics_simulates_iid_noise() {
    let p = GarchParams::garch11(0.3, 0.0, 0.0).unwrap();
    let x = garch_simulate(&p, 10_000, 9).unwrap();
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((var / 0.3 - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn simulation_is_seeded() {
    let p = GarchParams::garch11(0.1, 0.1, 0.8).unwrap();
    assert_eq!(
        garch_simulate(&p, 300, 7).unwrap(),
        garch_simulate(&p, 300, 7).unwrap()
    );
    assert_ne!(
        garch_simulate(&p, 300, 7).unwrap(),
        garch_simulate(&p, 300, 8).unwrap()
    );
}

#[test]
fn fit_scales_with_the_data() {
    let p = GarchParams::garch11(0.05, 0.15, 0.7).unwrap();
    let x = garch_simulate(&p, 3000, 11).unwrap();
    let c = 10.0;
    let y: Vec<f64> = x.iter().map(|v| c * v).collect();
    let fx = garch11_fit(&x, GarchFitConfig::default()).unwrap();
    let fy = garch11_fit(&y, GarchFitConfig::default()).unwrap();
    assert!((fy.params.alpha0() / (c * c) - fx.params.alpha0()).abs() < 1e-3 * fx.params.alpha0());
    assert!((fy.alpha1() - fx.alpha1()).abs() < 1e-3);
    assert!((fy.beta1() - fx.beta1()).abs() < 1e-3);
    let shift = -(x.len() as f64) * c.ln();
    assert!((fy.log_likelihood - (fx.log_likelihood + shift)).abs() < 1e-3);
}

#[test]
fn iid_noise_fit_nests_the_constant_variance_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..3000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let fit = garch11_fit(&x, GarchFitConfig::default()).unwrap();
    let n = x.len() as f64;
    let s2 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let const_ll = gaussian_log_likelihood(&x, &vec![s2; x.len()]);
    assert!(
        fit.log_likelihood >= const_ll - 1e-3,
        "{} vs {}",
        fit.log_likelihood,
        const_ll
    );
    assert!(fit.log_likelihood - const_ll < 10.0);
}

#[test]
fn regime_switch_shows_in_the_sigma_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let series: Vec<f64> = (0..1000)
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if t < 500 {
                0.01 * z
            } else {
                0.05 * z
            }
        })
        .collect();
    let fit = fit_indicator_volatility(&series, SeriesTransform::Level, GarchFitConfig::default())
        .unwrap();
    let sigma = fit.sigma_path();
    let lo = median(&sigma[..500]).unwrap();
    let hi = median(&sigma[500..]).unwrap();
    assert!(hi > 2.0 * lo, "{hi} vs {lo}");
}

#[test]
fn differencing_shortens_and_demeans() {
    let s: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
    let d = prepare_series(&s, SeriesTransform::Difference).unwrap();
    assert_eq!(d.len(), 9);
    assert!(d.iter().sum::<f64>().abs() < 1e-12);
    let l = prepare_series(&s, SeriesTransform::Level).unwrap();
    assert_eq!(l.len(), 10);
    assert!(l.iter().sum::<f64>().abs() < 1e-12);
}
