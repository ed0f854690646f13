//! Seeded synthetic panels: one-factor returns, a two-regime price panel with
//! injected anti-correlated pairs, and business-day calendars.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::PricePanel;
use crate::rng::{substream, StreamRng, LABEL_PANEL};

/// `n` consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}

pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).unwrap()
}

/// `r[t][i] = vol (sqrt(rho) f[t] + sqrt(1 - rho) e[t][i])`, all draws
/// standard normal. Population correlation between instruments is `rho`.
pub fn factor_returns(rng: &mut StreamRng, rows: usize, n: usize, rho: f64, vol: f64) -> Matrix {
    let a = libm::sqrt(rho);
    let b = libm::sqrt(1.0 - rho);
    let mut m = Matrix::zeros(rows, n);
    for t in 0..rows {
        let f: f64 = rng.sample(StandardNormal);
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            m[(t, i)] = vol * (a * f + b * e);
        }
    }
    m
}

/// Prices starting at 100 on `dates[0]` and compounding `returns` row by row.
pub fn prices_from_returns(
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: &Matrix,
) -> Result<PricePanel> {
    if dates.len() != returns.rows() + 1 {
        return Err(Error::InvalidPanel(format!(
            "{} dates for {} return rows",
            dates.len(),
            returns.rows()
        )));
    }
    let n = returns.cols();
    let mut cells = Vec::with_capacity(dates.len() * n);
    let mut log_level = alloc::vec![libm::log(100.0); n];
    cells.extend(log_level.iter().map(|&l| Some(libm::exp(l))));
    for t in 0..returns.rows() {
        for (i, l) in log_level.iter_mut().enumerate() {
            *l += returns[(t, i)];
        }
        cells.extend(log_level.iter().map(|&l| Some(libm::exp(l))));
    }
    PricePanel::new(dates, tickers, cells)
}

pub fn ticker_names(n: usize) -> Vec<String> {
    let width = format!("{}", n.saturating_sub(1)).len().max(2);
    (0..n).map(|i| format!("S{i:0width$}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoRegimeSpec {
    pub instruments: usize,
    /// Number of return rows; the panel has one more price date.
    pub return_days: usize,
    pub rho_low: f64,
    pub rho_high: f64,
    /// First return row of the high-correlation regime.
    pub switch_row: usize,
    pub vol: f64,
    /// Return rows `[start, start + len)` that receive anti-correlated pairs.
    pub injection: Option<Injection>,
    pub start: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub start_row: usize,
    pub len: usize,
    pub pairs: usize,
    /// Weight of the pair-specific shock `z`.
    pub gain: f64,
    /// Weight of the common factor `f`.
    pub loading: f64,
    /// Weight of the idiosyncratic noise `e`.
    pub noise: f64,
}

impl Default for TwoRegimeSpec {
    fn default() -> Self {
        Self {
            instruments: 100,
            return_days: 400,
            rho_low: 0.1,
            rho_high: 0.7,
            switch_row: 200,
            vol: 0.01,
            injection: Some(Injection {
                start_row: 300,
                len: 20,
                pairs: 1,
                gain: 3.0,
                loading: 0.6,
                noise: 0.3,
            }),
            start: default_start(),
        }
    }
}

/// Returns alongside the generated prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub prices: PricePanel,
    pub returns: Matrix,
}

/// Low-correlation factor returns before `switch_row`, high-correlation
/// after. Inside the injection window, instrument pairs `(2k, 2k+1)` are
/// replaced by `loading f +- gain z + noise e`, which pushes an eigenvalue of the
/// power-mapped correlation well below the rest of the emerging spectrum.
pub fn two_regime_panel(spec: &TwoRegimeSpec, seed: u64) -> Result<SyntheticPanel> {
    let n = spec.instruments;
    if n < 2 {
        return Err(Error::param("instruments", "need at least 2"));
    }
    for (name, rho) in [("rho_low", spec.rho_low), ("rho_high", spec.rho_high)] {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::param(name, "must lie in [0, 1)"));
        }
    }
    if spec.switch_row > spec.return_days {
        return Err(Error::param("switch_row", "beyond the last return row"));
    }
    if let Some(inj) = spec.injection {
        if inj.start_row + inj.len > spec.return_days || 2 * inj.pairs > n {
            return Err(Error::param("injection", "does not fit in the panel"));
        }
    }
    let mut rng = substream(seed, LABEL_PANEL, 0);
    let mut returns = Matrix::zeros(spec.return_days, n);
    for t in 0..spec.return_days {
        let rho = if t < spec.switch_row {
            spec.rho_low
        } else {
            spec.rho_high
        };
        let a = libm::sqrt(rho);
        let b = libm::sqrt(1.0 - rho);
        let f: f64 = rng.sample(StandardNormal);
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            returns[(t, i)] = spec.vol * (a * f + b * e);
        }
        if let Some(inj) = spec.injection {
            if (inj.start_row..inj.start_row + inj.len).contains(&t) {
                for k in 0..inj.pairs {
                    let z: f64 = rng.sample(StandardNormal);
                    for (col, sign) in [(2 * k, 1.0), (2 * k + 1, -1.0)] {
                        let e: f64 = rng.sample(StandardNormal);
                        returns[(t, col)] =
                            spec.vol * (inj.loading * f + sign * inj.gain * z + inj.noise * e);
                    }
                }
            }
        }
    }
    let dates = business_days(spec.start, spec.return_days + 1);
    let prices = prices_from_returns(dates, ticker_names(n), &returns)?;
    Ok(SyntheticPanel { prices, returns })
}

/// One-factor price panel with constant correlation `rho`.
pub fn factor_panel(
    n: usize,
    return_days: usize,
    rho: f64,
    vol: f64,
    seed: u64,
) -> Result<SyntheticPanel> {
    two_regime_panel(
        &TwoRegimeSpec {
            instruments: n,
            return_days,
            rho_low: rho,
            rho_high: rho,
            switch_row: return_days,
            vol,
            injection: None,
            start: default_start(),
        },
        seed,
    )
}

/// Random draws in `[lo, hi)` used by generators that need uniform noise.
pub fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::to_returns;

    #[test]
    fn weekdays_only() {
        let d = business_days(NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(), 4);
        let want: Vec<NaiveDate> = [5, 8, 9, 10]
            .iter()
            .map(|&day| NaiveDate::from_ymd_opt(2024, 1, day).unwrap())
            .collect();
        assert_eq!(d, want);
    }

    #[test]
    fn prices_round_trip_to_returns() {
        let panel = factor_panel(5, 30, 0.3, 0.01, 11).unwrap();
        let back = to_returns(&panel.prices).unwrap();
        for t in 0..30 {
            for i in 0..5 {
                assert!((back.get(t, i) - panel.returns[(t, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_and_reproducible() {
        let a = two_regime_panel(&TwoRegimeSpec::default(), 3).unwrap();
        let b = two_regime_panel(&TwoRegimeSpec::default(), 3).unwrap();
        let c = two_regime_panel(&TwoRegimeSpec::default(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.returns, c.returns);
    }

    #[test]
    fn rejects_bad_spec() {
        let s = TwoRegimeSpec {
            rho_high: 1.0,
            ..TwoRegimeSpec::default()
        };
        assert!(two_regime_panel(&s, 1).is_err());
        let s = TwoRegimeSpec {
            injection: Some(Injection {
                start_row: 390,
                len: 20,
                pairs: 1,
                gain: 1.0,
                loading: 0.0,
                noise: 1.0,
            }),
            ..TwoRegimeSpec::default()
        };
        assert!(two_regime_panel(&s, 1).is_err());
    }
}
