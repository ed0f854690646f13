//! Lagged regression `mu(t) = b0 + b1 lmin(t-1) + ... + bp lmin(t-p) + e(t)`
//! and the rolling t-test on `b1`.

use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};

pub const DEFAULT_LAGS: usize = 3;
pub const DEFAULT_WINDOW: usize = 126;
/// `|t| > 2` marks a significant lag-1 effect.
pub const T_THRESHOLD: f64 = 2.0;
const COLLINEAR_TOL: f64 = 1e-10;
/// RSS below this fraction of `||y||^2` counts as an exact fit.
const EXACT_FIT_REL: f64 = 1e-24;

/// Classical least-squares fit with homoskedastic standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    /// Residuals vanish; standard errors are zero.
    pub exact_fit: bool,
}

impl OlsFit {
    /// `beta[j] / se[j]`; an exact fit gives a signed infinity (zero when the
    /// coefficient itself is zero).
    pub fn t_value(&self, j: usize) -> f64 {
        let (b, se) = (self.beta[j], self.se[j]);
        if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else if b > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Least squares via Householder QR. `x` must already contain the intercept
/// column and satisfy `rows >= cols + 1`.
pub fn ols_fit(y: &[f64], x: &Matrix) -> Result<OlsFit> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::param("y", "length differs from design rows"));
    }
    if n < k + 1 {
        return Err(Error::InsufficientData {
            what: "observations for OLS",
            needed: k + 1,
            got: n,
        });
    }
    let qr = Qr::new(x, COLLINEAR_TOL)?;
    let y_mean = crate::stats::mean(y).unwrap_or(0.0);
    let tss = crate::stats::sum(y.iter().map(|&v| (v - y_mean) * (v - y_mean)));

    let mut beta = qr.solve(y);
    let constant_response = tss == 0.0 && (0..n).all(|i| x[(i, 0)] == 1.0);
    if constant_response {
        // Constant response: the intercept absorbs it exactly.
        beta.iter_mut().for_each(|b| *b = 0.0);
        beta[0] = y_mean;
    }
    let fitted = x.mul_vec(&beta);
    let rss = crate::stats::sum(y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)));
    let y_norm_sq = crate::stats::sum(y.iter().map(|v| v * v));
    let exact_fit = constant_response || rss <= EXACT_FIT_REL * y_norm_sq;

    let dof = (n - k) as f64;
    let sigma2 = if exact_fit { 0.0 } else { rss / dof };
    let xtx_inv = qr.xtx_inverse();
    let se = (0..k)
        .map(|j| libm::sqrt((sigma2 * xtx_inv[(j, j)]).max(0.0)))
        .collect();
    let r_squared = if exact_fit || tss == 0.0 {
        1.0
    } else {
        1.0 - rss / tss
    };
    Ok(OlsFit {
        beta,
        se,
        rss: if exact_fit { 0.0 } else { rss },
        r_squared,
        n_obs: n,
        exact_fit,
    })
}

/// Date-stamped series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::param("values", "length differs from dates"));
        }
        Ok(Self { dates, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Aligned response and design: row `t` holds `mu(t)` and
/// `[1, lmin(t-1), ..., lmin(t-p)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    pub dates: Vec<NaiveDate>,
    pub y: Vec<f64>,
    pub x: Matrix,
    pub lags: usize,
}

pub fn lagged_design(mu: &Series, lambda_min: &Series, lags: usize) -> Result<LaggedDesign> {
    if lags < 1 {
        return Err(Error::param("lags", "need at least one lag"));
    }
    if mu.dates != lambda_min.dates {
        return Err(Error::DateMismatch(
            "mu and lambda_min are on different date axes".into(),
        ));
    }
    let len = mu.len();
    if len <= lags {
        return Err(Error::InsufficientData {
            what: "series length for lagged design",
            needed: lags + 1,
            got: len,
        });
    }
    let rows = len - lags;
    let x = Matrix::from_fn(rows, lags + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            lambda_min.values[r + lags - c]
        }
    });
    Ok(LaggedDesign {
        dates: mu.dates[lags..].to_vec(),
        y: mu.values[lags..].to_vec(),
        x,
        lags,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub window_end: NaiveDate,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t_beta1: f64,
    /// Exact fit: `t_beta1` is an infinity sentinel.
    pub exact_fit: bool,
    pub significant: bool,
    pub r_squared: f64,
    pub n_obs: usize,
}

impl RegressionResult {
    fn from_fit(window_end: NaiveDate, fit: OlsFit) -> Self {
        let t = fit.t_value(1);
        Self {
            window_end,
            t_beta1: t,
            significant: is_significant(t),
            exact_fit: fit.exact_fit,
            r_squared: fit.r_squared,
            n_obs: fit.n_obs,
            beta: fit.beta,
            se: fit.se,
        }
    }
}

pub fn is_significant(t: f64) -> bool {
    libm::fabs(t) > T_THRESHOLD
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    Fitted(RegressionResult),
    Skipped { window_end: NaiveDate, error: Error },
}

impl WindowOutcome {
    pub fn result(&self) -> Option<&RegressionResult> {
        match self {
            WindowOutcome::Fitted(r) => Some(r),
            WindowOutcome::Skipped { .. } => None,
        }
    }
}

/// Fit on the full aligned sample.
pub fn fit_full(design: &LaggedDesign) -> Result<RegressionResult> {
    let fit = ols_fit(&design.y, &design.x)?;
    let end = *design.dates.last().expect("design has rows");
    Ok(RegressionResult::from_fit(end, fit))
}

/// Fit of the `window` aligned rows ending at row `end`.
pub fn fit_window(design: &LaggedDesign, end: usize, window: usize) -> WindowOutcome {
    let start = end + 1 - window;
    let cols = design.x.cols();
    let x = Matrix::from_fn(window, cols, |r, c| design.x[(start + r, c)]);
    let window_end = design.dates[end];
    match ols_fit(&design.y[start..=end], &x) {
        Ok(fit) => WindowOutcome::Fitted(RegressionResult::from_fit(window_end, fit)),
        Err(error) => WindowOutcome::Skipped { window_end, error },
    }
}

/// One fit per window end over the last `window` aligned rows.
pub fn rolling_t_series(
    mu: &Series,
    lambda_min: &Series,
    lags: usize,
    window: usize,
) -> Result<Vec<WindowOutcome>> {
    let design = lagged_design(mu, lambda_min, lags)?;
    let ends = window_ends(&design, window)?;
    Ok(ends.map(|end| fit_window(&design, end, window)).collect())
}

/// Row indices of every window end; validates `window >= lags + 10`.
pub fn window_ends(design: &LaggedDesign, window: usize) -> Result<core::ops::Range<usize>> {
    if window < design.lags + 10 {
        return Err(Error::param("window", "must be at least lags + 10"));
    }
    let rows = design.y.len();
    if rows < window {
        return Err(Error::InsufficientData {
            what: "aligned rows for one regression window",
            needed: window,
            got: rows,
        });
    }
    Ok((window - 1)..rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|k| NaiveDate::from_ymd_opt(2001, 1, 1).unwrap() + chrono::Days::new(k as u64))
            .collect()
    }

    #[test]
    fn exact_line_gives_infinite_t() {
        let x = Matrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { i as f64 * 0.5 });
        let y: Vec<f64> = (0..6).map(|i| 2.0 + 3.0 * (i as f64 * 0.5)).collect();
        let fit = ols_fit(&y, &x).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12 && (fit.beta[1] - 3.0).abs() < 1e-12);
        assert!(fit.exact_fit);
        assert_eq!(fit.rss, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.se[1], 0.0);
        assert_eq!(fit.t_value(1), f64::INFINITY);
    }

    #[test]
    fn constant_response_has_zero_slope() {
        let x = Matrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { (i as f64).sin() });
        let fit = ols_fit(&[0.7; 8], &x).unwrap();
        assert_eq!(fit.beta, vec![0.7, 0.0]);
        assert_eq!(fit.t_value(1), 0.0);
    }

    #[test]
    fn design_shapes() {
        let mu = Series::new(dates(5), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let lm = Series::new(dates(5), vec![10.0, 20.0, 30.0, 40.0, 50.0]).unwrap();
        let d = lagged_design(&mu, &lm, 1).unwrap();
        assert_eq!(d.y, vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(d.x.column(1), vec![10.0, 20.0, 30.0, 40.0]);
        let d3 = lagged_design(&mu, &lm, 3).unwrap();
        assert_eq!(d3.x.row(0), &[1.0, 30.0, 20.0, 10.0]);
        assert_eq!(d3.dates[0], dates(5)[3]);
    }

    #[test]
    fn mismatched_dates_rejected() {
        let mu = Series::new(dates(5), vec![0.0; 5]).unwrap();
        let mut other = dates(5);
        other[2] = other[2] + chrono::Days::new(30);
        let lm = Series::new(other, vec![0.0; 5]).unwrap();
        assert!(matches!(
            lagged_design(&mu, &lm, 1),
            Err(Error::DateMismatch(_))
        ));
    }

    #[test]
    fn constant_regressor_is_collinear_with_intercept() {
        let mu = Series::new(dates(30), (0..30).map(|i| i as f64).collect()).unwrap();
        let lm = Series::new(dates(30), vec![-0.01; 30]).unwrap();
        let d = lagged_design(&mu, &lm, 3).unwrap();
        assert!(matches!(
            ols_fit(&d.y, &d.x),
            Err(Error::RankDeficient { column: 1, .. })
        ));
        let outcomes = rolling_t_series(&mu, &lm, 3, 13).unwrap();
        assert!(outcomes
            .iter()
            .all(|o| matches!(o, WindowOutcome::Skipped { .. })));
    }

    #[test]
    fn significance_rule() {
        assert!(is_significant(2.0001));
        assert!(is_significant(-2.5));
        assert!(!is_significant(2.0));
        assert!(!is_significant(-1.99));
        assert!(is_significant(f64::NEG_INFINITY));
    }

    #[test]
    fn window_validation() {
        let mu = Series::new(dates(40), vec![0.0; 40]).unwrap();
        assert!(rolling_t_series(&mu, &mu, 3, 12).is_err());
        assert!(rolling_t_series(&mu, &mu, 3, 100).is_err());
    }
}
