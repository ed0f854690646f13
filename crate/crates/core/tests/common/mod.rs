#![allow(dead_code)]

use emspec_core::linalg::Matrix;
use emspec_core::panel::ReturnPanel;
use emspec_core::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn days(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2005, 3, 1).unwrap();
    (0..n)
        .map(|k| start + chrono::Days::new(k as u64))
        .collect()
}

pub fn tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("X{i}")).collect()
}

pub fn gaussian_returns(rows: usize, n: usize, seed: u64) -> ReturnPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::from_fn(rows, n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        0.01 * z
    });
    ReturnPanel::new(days(rows), tickers(n), m).unwrap()
}

pub fn panel_from(m: Matrix) -> ReturnPanel {
    ReturnPanel::new(days(m.rows()), tickers(m.cols()), m).unwrap()
}
