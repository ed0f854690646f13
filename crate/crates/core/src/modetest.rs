//! Silverman's critical-bandwidth test for multimodality, applied to the
//! lower half of each epoch's emerging spectrum.
//!
//! For a Gaussian kernel the number of modes of the density estimate is
//! non-increasing in the bandwidth, so the critical bandwidth `h_k` (smallest
//! bandwidth giving at most `k` modes) can be found by bisection. The p-value
//! of `H0: one mode` is the share of smoothed-bootstrap resamples drawn from
//! the estimate at `h_1` whose own critical bandwidth exceeds `h_1`, which by
//! the same monotonicity is the share that is still multimodal at `h_1`.

use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{date_key, substream, LABEL_OUTLIERS};
use crate::spectrum::SpectrumSplit;

pub const GRID_POINTS: usize = 512;
pub const MIN_SAMPLE: usize = 8;
pub const MIN_BOOTSTRAP: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 500;
pub const DEFAULT_LEVEL: f64 = 0.001;
const BANDWIDTH_REL_TOL: f64 = 1e-3;
const MAX_BRACKET_STEPS: usize = 64;

/// Values strictly below the sample median.
pub fn lower_half(emerging: &[f64]) -> Vec<f64> {
    let Some(median) = crate::stats::median(emerging) else {
        return Vec::new();
    };
    let mut out: Vec<f64> = emerging.iter().copied().filter(|&x| x < median).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Number of local maxima of the Gaussian KDE with bandwidth `h`,
/// evaluated on [`GRID_POINTS`] points spanning `[min - 3h, max + 3h]`.
pub fn count_modes(sample: &[f64], h: f64) -> usize {
    count_modes_capped(sample, h, usize::MAX)
}

/// Like [`count_modes`] but stops once more than `cap` modes are seen.
fn count_modes_capped(sample: &[f64], h: f64, cap: usize) -> usize {
    if sample.is_empty() {
        return 0;
    }
    let mut density = [0.0; GRID_POINTS];
    kde_grid(sample, h, &mut density);
    // A mode is a rise followed by a fall; runs of equal values in between
    // (a peak straddled symmetrically by two grid points) count once.
    let mut modes = 0;
    let mut rising = false;
    let mut prev = density[0];
    for &cur in &density[1..] {
        if cur > prev {
            rising = true;
        } else if cur < prev {
            if rising {
                modes += 1;
                if modes > cap {
                    return modes;
                }
            }
            rising = false;
        }
        prev = cur;
    }
    modes
}

/// Unnormalized Gaussian KDE on the evaluation grid. Along a uniform grid
/// consecutive kernel values differ by a ratio that itself changes by the
/// constant factor `exp(-d^2)`, so each kernel needs three `exp` calls and is
/// walked outward from its nearest grid point until it underflows.
fn kde_grid(sample: &[f64], h: f64, out: &mut [f64; GRID_POINTS]) {
    let (min, max) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let lo = min - 3.0 * h;
    let step = (max + 3.0 * h - lo) / (GRID_POINTS - 1) as f64;
    let d = step / h;
    let q = libm::exp(-d * d);
    for &x in sample {
        let k0 = (libm::round((x - lo) / step) as usize).min(GRID_POINTS - 1);
        let z0 = (lo + step * k0 as f64 - x) / h;
        let e0 = libm::exp(-0.5 * z0 * z0);
        out[k0] += e0;

        let mut e = e0;
        let mut r = libm::exp(-z0 * d - 0.5 * d * d);
        for v in out[k0 + 1..].iter_mut() {
            e *= r;
            if e == 0.0 {
                break;
            }
            *v += e;
            r *= q;
        }
        let mut e = e0;
        let mut r = libm::exp(z0 * d - 0.5 * d * d);
        for v in out[..k0].iter_mut().rev() {
            e *= r;
            if e == 0.0 {
                break;
            }
            *v += e;
            r *= q;
        }
    }
}

fn spread(sample: &[f64]) -> Result<(f64, f64)> {
    let var = crate::stats::sample_variance(sample).ok_or(Error::InsufficientData {
        what: "sample size for mode test",
        needed: 2,
        got: sample.len(),
    })?;
    let (min, max) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if !(var > 0.0) || !(max > min) {
        return Err(Error::DegenerateSample);
    }
    Ok((var, max - min))
}

/// Smallest bandwidth at which the KDE has at most `k` modes, to relative
/// tolerance 1e-3.
pub fn critical_bandwidth(sample: &[f64], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::param("k", "target mode count must be at least 1"));
    }
    if sample.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData {
            what: "sample size for critical bandwidth",
            needed: MIN_SAMPLE,
            got: sample.len(),
        });
    }
    let (_, range) = spread(sample)?;
    // Zero modes means the grid no longer resolves the kernels.
    let at_most_k = |h: f64| (1..=k).contains(&count_modes_capped(sample, h, k));

    let mut hi = range;
    let mut steps = 0;
    while !at_most_k(hi) {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::BracketFailure {
                lo: range,
                hi,
                modes: count_modes(sample, hi),
            });
        }
    }
    let mut lo = hi * 0.5;
    steps = 0;
    while at_most_k(lo) {
        hi = lo;
        lo *= 0.5;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(Error::BracketFailure {
                lo,
                hi,
                modes: count_modes(sample, lo),
            });
        }
    }
    while hi - lo > BANDWIDTH_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if at_most_k(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilvermanConfig {
    pub bootstrap: usize,
    pub level: f64,
}

impl SilvermanConfig {
    pub fn new(bootstrap: usize, level: f64) -> Result<Self> {
        if bootstrap < MIN_BOOTSTRAP {
            return Err(Error::param("bootstrap", "need at least 100 replicates"));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::param("level", "must lie in (0, 1)"));
        }
        Ok(Self { bootstrap, level })
    }
}

impl Default for SilvermanConfig {
    fn default() -> Self {
        Self {
            bootstrap: DEFAULT_BOOTSTRAP,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTestResult {
    pub end_date: Option<NaiveDate>,
    pub p_value: f64,
    pub critical_bandwidth: f64,
    pub bootstrap_count: usize,
    pub reject: bool,
    pub sample_size: usize,
}

impl ModeTestResult {
    /// `-log10 p` with `p` floored at `1 / B`.
    pub fn neg_log10_p(&self) -> f64 {
        neg_log10_floored(self.p_value, self.bootstrap_count)
    }
}

pub fn neg_log10_floored(p: f64, bootstrap: usize) -> f64 {
    let floor = 1.0 / bootstrap as f64;
    -libm::log10(p.max(floor))
}

/// Silverman test of `H0: one mode` against `H1: two or more modes`.
pub fn silverman_test<R: RngCore + ?Sized>(
    sample: &[f64],
    cfg: SilvermanConfig,
    rng: &mut R,
) -> Result<ModeTestResult> {
    let h1 = critical_bandwidth(sample, 1)?;
    let (var, _) = spread(sample)?;
    let n = sample.len();
    let mean = crate::stats::mean(sample).unwrap_or(0.0);
    let shrink = 1.0 / libm::sqrt(1.0 + h1 * h1 / var);

    let mut resample = alloc::vec![0.0; n];
    let mut exceed = 0usize;
    for _ in 0..cfg.bootstrap {
        for y in resample.iter_mut() {
            let j = rng.random_range(0..n);
            let z: f64 = rng.sample(StandardNormal);
            *y = mean + shrink * (sample[j] - mean + h1 * z);
        }
        if count_modes_capped(&resample, h1, 1) > 1 {
            exceed += 1;
        }
    }
    let p_value = exceed as f64 / cfg.bootstrap as f64;
    Ok(ModeTestResult {
        end_date: None,
        p_value,
        critical_bandwidth: h1,
        bootstrap_count: cfg.bootstrap,
        reject: p_value < cfg.level,
        sample_size: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpochOutlier {
    Tested(ModeTestResult),
    /// Lower half smaller than [`MIN_SAMPLE`].
    Skipped {
        end_date: NaiveDate,
        sample_size: usize,
    },
    Failed {
        end_date: NaiveDate,
        error: Error,
    },
}

impl EpochOutlier {
    pub fn end_date(&self) -> NaiveDate {
        match self {
            EpochOutlier::Tested(r) => r.end_date.expect("epoch results carry a date"),
            EpochOutlier::Skipped { end_date, .. } | EpochOutlier::Failed { end_date, .. } => {
                *end_date
            }
        }
    }

    pub fn result(&self) -> Option<&ModeTestResult> {
        match self {
            EpochOutlier::Tested(r) => Some(r),
            _ => None,
        }
    }
}

/// Tests whether the smallest emerging eigenvalue of one epoch is an outlier.
/// The bootstrap stream is keyed by `(seed, end_date)`.
pub fn test_epoch(
    end_date: NaiveDate,
    emerging: &[f64],
    cfg: SilvermanConfig,
    seed: u64,
) -> EpochOutlier {
    let sample = lower_half(emerging);
    if sample.len() < MIN_SAMPLE {
        return EpochOutlier::Skipped {
            end_date,
            sample_size: sample.len(),
        };
    }
    let mut rng = substream(seed, LABEL_OUTLIERS, date_key(end_date));
    match silverman_test(&sample, cfg, &mut rng) {
        Ok(mut r) => {
            r.end_date = Some(end_date);
            EpochOutlier::Tested(r)
        }
        Err(error) => EpochOutlier::Failed {
            end_date,
            error: error.at_epoch(end_date),
        },
    }
}

pub fn outlier_series(
    splits: &[SpectrumSplit],
    cfg: SilvermanConfig,
    seed: u64,
) -> Vec<EpochOutlier> {
    splits
        .iter()
        .map(|s| test_epoch(s.end_date, &s.emerging, cfg, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lower_half_examples() {
        assert_eq!(
            lower_half(&[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0]),
            vec![-3.0, -2.0, -1.0]
        );
        assert!(lower_half(&[0.5; 9]).is_empty());
        let odd: Vec<f64> = (0..175).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(lower_half(&odd).len(), 87);
    }

    #[test]
    fn mode_counting_on_two_bumps() {
        let mut s: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
        s.extend((0..10).map(|i| 10.0 + i as f64 * 0.01));
        assert_eq!(count_modes(&s, 0.5), 2);
        assert_eq!(count_modes(&s, 20.0), 1);
    }

    #[test]
    fn critical_bandwidth_brackets_the_transition() {
        let mut s: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
        s.extend((0..10).map(|i| 10.0 + i as f64 * 0.01));
        let h1 = critical_bandwidth(&s, 1).unwrap();
        assert_eq!(count_modes(&s, h1 * 1.01), 1);
        assert_eq!(count_modes(&s, h1 * 0.99), 2);
        assert!(h1 > 1.0, "h1 = {h1} should dwarf the within-cluster spread");
        let h2 = critical_bandwidth(&s, 2).unwrap();
        assert!(h2 <= h1);
    }

    #[test]
    fn degenerate_and_small_samples() {
        assert_eq!(
            critical_bandwidth(&[1.0; 10], 1),
            Err(Error::DegenerateSample)
        );
        assert!(matches!(
            critical_bandwidth(&[1.0, 2.0, 3.0], 1),
            Err(Error::InsufficientData { .. })
        ));
        let split_date = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let out = test_epoch(
            split_date,
            &[0.1, 0.2, 0.3, 0.4],
            SilvermanConfig::default(),
            1,
        );
        assert!(matches!(out, EpochOutlier::Skipped { sample_size: 2, .. }));
    }

    #[test]
    fn grid_recurrence_matches_direct_evaluation() {
        let sample: Vec<f64> = (0..37)
            .map(|i| (i as f64 * 1.7).sin() * 3.0 + (i % 5) as f64)
            .collect();
        let (min, max) = (-3.0f64, 7.0f64);
        let (min, max) = sample
            .iter()
            .fold((max, min), |(a, b), &x| (a.min(x), b.max(x)));
        for &h in &[0.002, 0.05, 0.4, 3.0, 40.0] {
            let mut fast = [0.0; GRID_POINTS];
            kde_grid(&sample, h, &mut fast);
            let lo = min - 3.0 * h;
            let step = (max + 3.0 * h - lo) / (GRID_POINTS - 1) as f64;
            for (k, &got) in fast.iter().enumerate() {
                let g = lo + step * k as f64;
                let want: f64 = sample
                    .iter()
                    .map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp())
                    .sum();
                assert!(
                    (got - want).abs() <= 1e-10 * want.max(1e-300),
                    "h={h} k={k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn floor_arithmetic() {
        assert!((neg_log10_floored(0.0, 500) - libm::log10(500.0)).abs() < 1e-12);
        assert!((neg_log10_floored(0.01, 500) - 2.0).abs() < 1e-12);
        assert!((neg_log10_floored(0.001, 1000) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SilvermanConfig::new(99, 0.001).is_err());
        assert!(SilvermanConfig::new(500, 0.0).is_err());
        assert!(SilvermanConfig::new(500, 0.001).is_ok());
    }
}
