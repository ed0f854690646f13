//! Power-map distortion, eigenspectra and the emerging/normal split.
//!
//! An epoch matrix built from `M` returns of `N > M` instruments has rank at
//! most `M - 1`, so `N - M + 1` of its eigenvalues are zero. The power map
//! `c -> sign(c) |c|^(1 + eps)` lifts that degeneracy; the lifted eigenvalues
//! form the emerging spectrum.

use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::stats::{Histogram, Moments};

pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMapParams {
    epsilon: f64,
}

impl PowerMapParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::param("epsilon", "must be finite and non-negative"));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for PowerMapParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[inline]
pub fn power_map_entry(c: f64, epsilon: f64) -> f64 {
    if epsilon == 0.0 || c == 0.0 {
        return c;
    }
    let mag = libm::pow(libm::fabs(c), 1.0 + epsilon);
    if c < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Elementwise sign-preserving power of the off-diagonal entries. The unit
/// diagonal is a fixed point and is copied unchanged.
pub fn power_map(c: &Matrix, params: PowerMapParams) -> Matrix {
    let eps = params.epsilon();
    c.map(|i, j, x| if i == j { x } else { power_map_entry(x, eps) })
}

/// Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix.
pub fn eig_symmetric(a: &Matrix) -> Result<SymmetricEigen> {
    SymmetricEigen::new(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSplit {
    pub end_date: NaiveDate,
    /// Ascending.
    pub all_eigenvalues: Vec<f64>,
    /// The `N - M + 1` eigenvalues of smallest magnitude, ascending. Empty
    /// when `M >= N`.
    pub emerging: Vec<f64>,
    /// Remaining eigenvalues, ascending.
    pub normal: Vec<f64>,
    pub lambda_min_emerging: Option<f64>,
    pub lambda_max: f64,
    /// `min |normal| - max |emerging|`; absent when either side is empty.
    pub separation_gap: Option<f64>,
}

impl SpectrumSplit {
    /// True when the emerging and normal clusters touch or overlap.
    pub fn gap_nonpositive(&self) -> bool {
        matches!(self.separation_gap, Some(g) if g <= 0.0)
    }
}

/// Partitions ascending eigenvalues of an `n x n` epoch matrix built from `m`
/// returns.
pub fn split_spectrum(
    end_date: NaiveDate,
    eigs: &[f64],
    n: usize,
    m: usize,
) -> Result<SpectrumSplit> {
    if eigs.len() != n {
        return Err(Error::param(
            "eigs",
            alloc::format!("expected {n} eigenvalues, got {}", eigs.len()),
        ));
    }
    if n == 0 {
        return Err(Error::InsufficientData {
            what: "eigenvalues",
            needed: 1,
            got: 0,
        });
    }
    let mut all = eigs.to_vec();
    all.sort_by(f64::total_cmp);
    let lambda_max = all[n - 1];

    let k = if n > m { n - m + 1 } else { 0 };
    let mut by_mag: Vec<usize> = (0..n).collect();
    by_mag.sort_by(|&i, &j| {
        libm::fabs(all[i])
            .total_cmp(&libm::fabs(all[j]))
            .then(i.cmp(&j))
    });
    let mut is_emerging = alloc::vec![false; n];
    for &i in &by_mag[..k] {
        is_emerging[i] = true;
    }
    let emerging: Vec<f64> = (0..n).filter(|&i| is_emerging[i]).map(|i| all[i]).collect();
    let normal: Vec<f64> = (0..n)
        .filter(|&i| !is_emerging[i])
        .map(|i| all[i])
        .collect();

    let separation_gap = if emerging.is_empty() || normal.is_empty() {
        None
    } else {
        let max_em = emerging.iter().fold(0.0f64, |a, &x| a.max(libm::fabs(x)));
        let min_norm = normal
            .iter()
            .fold(f64::INFINITY, |a, &x| a.min(libm::fabs(x)));
        Some(min_norm - max_em)
    };
    Ok(SpectrumSplit {
        end_date,
        lambda_min_emerging: emerging.first().copied(),
        all_eigenvalues: all,
        emerging,
        normal,
        lambda_max,
        separation_gap,
    })
}

pub const SHAPE_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeStats {
    /// Absent for fewer than four values or zero variance.
    pub moments: Option<Moments>,
    pub histogram: Histogram,
}

/// Moments and a fixed-bin histogram of the emerging spectrum. Large excess
/// kurtosis marks a heavy-tailed (Lorentzian-like) shape.
pub fn spectrum_shape_stats(split: &SpectrumSplit) -> Result<ShapeStats> {
    if split.emerging.is_empty() {
        return Err(Error::InsufficientData {
            what: "emerging eigenvalues",
            needed: 1,
            got: 0,
        });
    }
    Ok(shape_stats(&split.emerging, SHAPE_HISTOGRAM_BINS))
}

pub fn shape_stats(values: &[f64], bins: usize) -> ShapeStats {
    ShapeStats {
        moments: crate::stats::moments(values),
        histogram: Histogram::from_values(values, bins),
    }
}

/// Marchenko-Pastur law for ratio `Q = T / N` and variance scale `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPastur {
    pub q: f64,
    pub sigma2: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

pub fn marchenko_pastur(q: f64, sigma2: f64) -> Result<MarchenkoPastur> {
    if !(q > 0.0) {
        return Err(Error::param("q", "must be positive"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::param("sigma2", "must be positive and finite"));
    }
    let root = 1.0 / libm::sqrt(q);
    Ok(MarchenkoPastur {
        q,
        sigma2,
        lambda_minus: sigma2 * (1.0 - root) * (1.0 - root),
        lambda_plus: sigma2 * (1.0 + root) * (1.0 + root),
    })
}

impl MarchenkoPastur {
    /// `(Q / 2 pi sigma2) sqrt((l+ - l)(l - l-)) / l` inside the support, zero
    /// outside. Integrates to `min(Q, 1)`; for `Q < 1` the rest sits in a point
    /// mass at zero.
    pub fn density(&self, lambda: f64) -> f64 {
        if !(lambda > self.lambda_minus && lambda < self.lambda_plus) || !self.q.is_finite() {
            return 0.0;
        }
        let num = (self.lambda_plus - lambda) * (lambda - self.lambda_minus);
        self.q / (2.0 * core::f64::consts::PI * self.sigma2) * libm::sqrt(num) / lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2008, 9, 15).unwrap()
    }

    #[test]
    fn power_map_fixed_points_and_identity_exponent() {
        assert_eq!(power_map_entry(1.0, 0.01), 1.0);
        assert_eq!(power_map_entry(-1.0, 0.01), -1.0);
        assert_eq!(power_map_entry(0.0, 0.01), 0.0);
        for &c in &[-0.9, -0.3, 0.0, 0.2, 0.77] {
            assert_eq!(power_map_entry(c, 0.0), c);
        }
    }

    #[test]
    fn power_map_negative_half() {
        // -exp(1.01 ln 0.5), evaluated with mpmath at 30 digits.
        let want = -0.496_546_247_718_518_f64;
        assert!((power_map_entry(-0.5, 0.01) - want).abs() < 1e-12);
    }

    #[test]
    fn split_counts_and_order() {
        let eigs = [-0.3, -0.01, 0.0, 0.02, 0.5, 3.0];
        let s = split_spectrum(date(), &eigs, 6, 4).unwrap();
        assert_eq!(s.emerging, vec![-0.01, 0.0, 0.02]);
        assert_eq!(s.normal, vec![-0.3, 0.5, 3.0]);
        assert_eq!(s.lambda_min_emerging, Some(-0.01));
        assert_eq!(s.lambda_max, 3.0);
        assert!((s.separation_gap.unwrap() - 0.28).abs() < 1e-15);
        assert!(!s.gap_nonpositive());
    }

    #[test]
    fn split_is_empty_when_epoch_exceeds_instruments() {
        let s = split_spectrum(date(), &[0.5, 1.5], 2, 20).unwrap();
        assert!(s.emerging.is_empty());
        assert_eq!(s.lambda_min_emerging, None);
        assert_eq!(s.separation_gap, None);
    }

    #[test]
    fn split_for_market_sized_configuration() {
        let eigs: Vec<f64> = (0..194).map(|i| i as f64 * 0.01 - 0.5).collect();
        let s = split_spectrum(date(), &eigs, 194, 20).unwrap();
        assert_eq!(s.emerging.len(), 175);
        assert_eq!(s.normal.len(), 19);
    }

    #[test]
    fn shape_stats_degenerate() {
        let s = shape_stats(&[0.1; 6], 10);
        assert!(s.moments.is_none());
        assert_eq!(s.histogram.counts, vec![6]);
        assert!(shape_stats(&[0.1, 0.2, 0.3], 10).moments.is_none());
    }

    #[test]
    fn marchenko_pastur_bounds() {
        let mp = marchenko_pastur(4.0, 1.0).unwrap();
        assert_eq!(mp.lambda_minus, 0.25);
        assert_eq!(mp.lambda_plus, 2.25);
        let inf = marchenko_pastur(f64::INFINITY, 2.0).unwrap();
        assert_eq!((inf.lambda_minus, inf.lambda_plus), (2.0, 2.0));
        assert!(marchenko_pastur(0.0, 1.0).is_err());
        assert!(marchenko_pastur(1.0, -1.0).is_err());
        assert_eq!(mp.density(0.1), 0.0);
        assert_eq!(mp.density(3.0), 0.0);
    }
}
