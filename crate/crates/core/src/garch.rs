//! GARCH(p,q) conditional variance:
//!
//! `sigma2[t] = a0 + sum_i a_i x[t-i]^2 + sum_j b_j sigma2[t-j]`
//!
//! with Gaussian innovations `x[t] = eta[t] sigma[t]`. Filtering and
//! simulation handle any order; estimation is GARCH(1,1) by Gaussian maximum
//! likelihood.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::rng::{substream, LABEL_SIMULATE};

pub const BURN_IN: usize = 500;
pub const MIN_FIT_LEN: usize = 100;
/// Fits with `a1 + b1` above this are flagged as boundary solutions.
pub const BOUNDARY_PERSISTENCE: f64 = 0.999;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GarchParams {
    alpha0: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl GarchParams {
    /// `alpha` are the ARCH coefficients on lagged `x^2`, `beta` the GARCH
    /// coefficients on lagged `sigma2`.
    pub fn new(alpha0: f64, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::param("alpha0", "must be positive and finite"));
        }
        if alpha
            .iter()
            .chain(&beta)
            .any(|c| !(*c >= 0.0 && c.is_finite()))
        {
            return Err(Error::param(
                "alpha/beta",
                "coefficients must be non-negative",
            ));
        }
        let persistence: f64 = alpha.iter().chain(&beta).sum();
        if !(persistence < 1.0) {
            return Err(Error::param(
                "alpha/beta",
                "sum of coefficients must be below 1 for covariance stationarity",
            ));
        }
        Ok(Self {
            alpha0,
            alpha,
            beta,
        })
    }

    pub fn garch11(alpha0: f64, alpha1: f64, beta1: f64) -> Result<Self> {
        Self::new(alpha0, vec![alpha1], vec![beta1])
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `sum(alpha) + sum(beta)`.
    pub fn persistence(&self) -> f64 {
        self.alpha.iter().chain(&self.beta).sum()
    }

    /// `a0 / (1 - persistence)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.persistence())
    }

    fn max_lag(&self) -> usize {
        self.alpha.len().max(self.beta.len())
    }

    fn step(&self, x2_hist: &[f64], s2_hist: &[f64]) -> f64 {
        // Histories are most-recent-last.
        let mut s = self.alpha0;
        for (i, a) in self.alpha.iter().enumerate() {
            s += a * x2_hist[x2_hist.len() - 1 - i];
        }
        for (j, b) in self.beta.iter().enumerate() {
            s += b * s2_hist[s2_hist.len() - 1 - j];
        }
        s
    }
}

/// Conditional variance path of `x`; pre-sample `x^2` and `sigma2` terms are
/// `sigma2_init`.
pub fn garch_filter(x: &[f64], params: &GarchParams, sigma2_init: f64) -> Result<Vec<f64>> {
    if !(sigma2_init > 0.0 && sigma2_init.is_finite()) {
        return Err(Error::param("sigma2_init", "must be positive and finite"));
    }
    let lag = params.max_lag();
    if x.len() < lag + 1 {
        return Err(Error::InsufficientData {
            what: "observations for GARCH filter",
            needed: lag + 1,
            got: x.len(),
        });
    }
    Ok(filter_unchecked(x, params, sigma2_init))
}

fn filter_unchecked(x: &[f64], params: &GarchParams, sigma2_init: f64) -> Vec<f64> {
    let lag = params.max_lag();
    let mut x2 = vec![sigma2_init; lag];
    let mut s2 = vec![sigma2_init; lag];
    x2.reserve(x.len());
    s2.reserve(x.len());
    for &xt in x {
        let next = params.step(&x2, &s2);
        s2.push(next);
        x2.push(xt * xt);
    }
    s2.split_off(lag)
}

/// `-1/2 sum(ln 2 pi sigma2 + x^2 / sigma2)`.
pub fn gaussian_log_likelihood(x: &[f64], sigma2: &[f64]) -> f64 {
    let terms = x
        .iter()
        .zip(sigma2)
        .map(|(&xt, &s)| LN_2PI + libm::log(s) + xt * xt / s);
    -0.5 * crate::stats::sum(terms)
}

/// `len` draws of `x[t] = eta[t] sigma[t]` after discarding [`BURN_IN`]
/// samples. Pre-sample terms start at the unconditional variance.
pub fn garch_simulate(params: &GarchParams, len: usize, seed: u64) -> Result<Vec<f64>> {
    if len < 1 {
        return Err(Error::param("len", "must be at least 1"));
    }
    let mut rng = substream(seed, LABEL_SIMULATE, 0);
    let lag = params.max_lag();
    let v0 = params.unconditional_variance();
    let mut x2 = vec![v0; lag];
    let mut s2 = vec![v0; lag];
    let mut out = Vec::with_capacity(len);
    for t in 0..(BURN_IN + len) {
        let var = params.step(&x2, &s2);
        let eta: f64 = rng.sample(StandardNormal);
        let xt = eta * libm::sqrt(var);
        if lag > 0 {
            x2.rotate_left(1);
            s2.rotate_left(1);
            x2[lag - 1] = xt * xt;
            s2[lag - 1] = var;
        }
        if t >= BURN_IN {
            out.push(xt);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchFitConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GarchFitConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchFit {
    pub params: GarchParams,
    pub sigma2_path: Vec<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood at the starting point of the search.
    pub start_log_likelihood: f64,
    pub sigma2_init: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `a1 + b1 > 0.999`.
    pub boundary: bool,
}

impl GarchFit {
    pub fn alpha1(&self) -> f64 {
        self.params.alpha()[0]
    }

    pub fn beta1(&self) -> f64 {
        self.params.beta()[0]
    }

    pub fn sigma_path(&self) -> Vec<f64> {
        self.sigma2_path.iter().map(|&s| libm::sqrt(s)).collect()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// Unconstrained `(ln a0, logit persistence, logit arch share)` to
/// `(a0, a1, b1)`.
fn from_unconstrained(theta: &[f64]) -> (f64, f64, f64) {
    let alpha0 = libm::exp(theta[0]);
    let persistence = logistic(theta[1]);
    let share = logistic(theta[2]);
    (alpha0, share * persistence, (1.0 - share) * persistence)
}

fn to_unconstrained(alpha0: f64, alpha1: f64, beta1: f64) -> [f64; 3] {
    let persistence = alpha1 + beta1;
    [
        libm::log(alpha0),
        logit(persistence),
        logit(alpha1 / persistence),
    ]
}

/// Gaussian maximum-likelihood GARCH(1,1) fit of `x` (assumed mean zero).
/// The filter starts from the sample variance of `x`.
pub fn garch11_fit(x: &[f64], cfg: GarchFitConfig) -> Result<GarchFit> {
    if x.len() < MIN_FIT_LEN {
        return Err(Error::InsufficientData {
            what: "observations for GARCH(1,1) fit",
            needed: MIN_FIT_LEN,
            got: x.len(),
        });
    }
    let s2 = crate::stats::sample_variance(x).unwrap_or(0.0);
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let objective = |theta: &[f64]| -> f64 {
        let (a0, a1, b1) = from_unconstrained(theta);
        let Ok(params) = GarchParams::garch11(a0, a1, b1) else {
            return f64::INFINITY;
        };
        -gaussian_log_likelihood(x, &filter_unchecked(x, &params, s2))
    };
    let start = to_unconstrained(0.1 * s2, 0.1, 0.8);
    let nm = NelderMead {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        initial_step: 0.5,
    };
    let min = nm.minimize(objective, &start);

    let (a0, a1, b1) = from_unconstrained(&min.x);
    let params = GarchParams::garch11(a0, a1, b1)?;
    let sigma2_path = filter_unchecked(x, &params, s2);
    let log_likelihood = gaussian_log_likelihood(x, &sigma2_path);
    Ok(GarchFit {
        boundary: params.persistence() > BOUNDARY_PERSISTENCE,
        params,
        sigma2_path,
        log_likelihood,
        start_log_likelihood: -min.start_value,
        sigma2_init: s2,
        converged: min.converged,
        iterations: min.iterations,
    })
}

/// Preprocessing applied to an indicator series before the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesTransform {
    /// Demeaned levels.
    #[default]
    Level,
    /// Demeaned first differences.
    Difference,
}

/// Demeans (optionally differences) `series` and fits GARCH(1,1).
pub fn fit_indicator_volatility(
    series: &[f64],
    transform: SeriesTransform,
    cfg: GarchFitConfig,
) -> Result<GarchFit> {
    let prepared = prepare_series(series, transform)?;
    garch11_fit(&prepared, cfg)
}

pub fn prepare_series(series: &[f64], transform: SeriesTransform) -> Result<Vec<f64>> {
    let base: Vec<f64> = match transform {
        SeriesTransform::Level => series.to_vec(),
        SeriesTransform::Difference => series.windows(2).map(|w| w[1] - w[0]).collect(),
    };
    let mean = crate::stats::mean(&base).ok_or(Error::InsufficientData {
        what: "series values",
        needed: 1,
        got: 0,
    })?;
    let demeaned: Vec<f64> = base.iter().map(|v| v - mean).collect();
    if demeaned.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(demeaned)
}
