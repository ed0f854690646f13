use emspec_core::lagreg::{is_significant, lagged_design, ols_fit, Series, T_THRESHOLD};
use emspec_core::linalg::Matrix;
use emspec_core::{Error, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// `beta = (X'X)^-1 X'y`, `se_j = sqrt(s^2 [(X'X)^-1]_jj)`, `s^2 = RSS/(n-k)`.
fn normal_equations(y: &[f64], x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, k) = (x.rows(), x.cols());
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (0..n).map(|i| x[(i, a)] * x[(i, b)]).sum())
                .collect()
        })
        .collect();
    let xty: Vec<f64> = (0..k)
        .map(|a| (0..n).map(|i| x[(i, a)] * y[i]).sum())
        .collect();
    let inv = invert(xtx);
    let beta: Vec<f64> = (0..k)
        .map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum())
        .collect();
    let rss: f64 = (0..n)
        .map(|i| {
            let fit: f64 = (0..k).map(|a| x[(i, a)] * beta[a]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    let s2 = rss / (n - k) as f64;
    let se = (0..k).map(|a| (s2 * inv[a][a]).sqrt()).collect();
    (beta, se)
}

fn random_regression(rng: &mut ChaCha8Rng) -> (Vec<f64>, Matrix) {
    let k = rng.random_range(2..=5);
    let n = rng.random_range(k + 3..=40);
    let x = Matrix::from_fn(n, k, |_, c| {
        if c == 0 {
            1.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    let truth: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..n)
        .map(|i| (0..k).map(|c| x[(i, c)] * truth[c]).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    (y, x)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn hundred_random_regressions_match_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let (y, x) = random_regression(&mut rng);
        let fit = ols_fit(&y, &x).unwrap();
        let (beta, se) = normal_equations(&y, &x);
        for j in 0..x.cols() {
            assert!(close(fit.beta[j], beta[j], 1e-8), "case {case} beta[{j}]");
            assert!(close(fit.se[j], se[j], 1e-8), "case {case} se[{j}]");
            let t = beta[j] / se[j];
            assert_eq!(
                is_significant(fit.t_value(j)),
                t.abs() > 2.0,
                "case {case} t[{j}]"
            );
        }
    }
}

#[test]
fn significance_rule_is_strict() {
    assert_eq!(T_THRESHOLD, 2.0);
    assert!(!is_significant(2.0));
    assert!(!is_significant(-2.0));
    assert!(is_significant(2.000_000_1));
    assert!(is_significant(-2.5));
    assert!(is_significant(f64::INFINITY));
}

#[test]
fn collinear_design_names_the_column() {
    let x = Matrix::from_fn(10, 3, |i, c| match c {
        0 => 1.0,
        1 => i as f64,
        _ => 2.0 * i as f64 + 1.0,
    });
    let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
    match ols_fit(&y, &x) {
        Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 2),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

fn day(k: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2001, 1, 1).unwrap() + chrono::Days::new(k as u64)
}

#[test]
fn lagged_design_rows_hold_previous_values() {
    let dates: Vec<NaiveDate> = (0..8).map(day).collect();
    let mu = Series::new(dates.clone(), (0..8).map(|v| 100.0 + v as f64).collect()).unwrap();
    let lm = Series::new(dates.clone(), (0..8).map(|v| v as f64).collect()).unwrap();
    let d = lagged_design(&mu, &lm, 3).unwrap();
    assert_eq!(d.y.len(), 5);
    for r in 0..5 {
        let t = r + 3;
        assert_eq!(d.y[r], 100.0 + t as f64);
        assert_eq!(d.dates[r], dates[t]);
        assert_eq!(
            d.x.row(r),
            &[1.0, (t - 1) as f64, (t - 2) as f64, (t - 3) as f64]
        );
    }
}

proptest! {
    #[test]
    fn residuals_are_orthogonal_to_the_design(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (y, x) = random_regression(&mut rng);
        let fit = ols_fit(&y, &x).unwrap();
        let fitted = x.mul_vec(&fit.beta);
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        for c in 0..x.cols() {
            let dot: f64 = (0..x.rows()).map(|i| x[(i, c)] * resid[i]).sum();
            prop_assert!(dot.abs() < 1e-10);
        }
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        prop_assert!(fit.se.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn shifting_the_response_moves_only_the_intercept(seed in any::<u64>(), c in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (y, x) = random_regression(&mut rng);
        let a = ols_fit(&y, &x).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let b = ols_fit(&shifted, &x).unwrap();
        prop_assert!(close(b.beta[0], a.beta[0] + c, 1e-9));
        for j in 1..x.cols() {
            prop_assert!(close(b.beta[j], a.beta[j], 1e-8));
            prop_assert!(close(b.t_value(j), a.t_value(j), 1e-7));
        }
    }

    #[test]
    fn scaling_the_response_leaves_t_values_unchanged(seed in any::<u64>(), s in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (y, x) = random_regression(&mut rng);
        let a = ols_fit(&y, &x).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| v * s).collect();
        let b = ols_fit(&scaled, &x).unwrap();
        for j in 0..x.cols() {
            prop_assert!(close(b.beta[j], s * a.beta[j], 1e-9 * (1.0 + s)));
            prop_assert!(close(b.t_value(j), a.t_value(j), 1e-8));
        }
    }
}
