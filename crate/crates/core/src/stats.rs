//! Summation and moment helpers shared by the numerical modules.
//!
//! All sums use Neumaier compensation so results do not depend on how a
//! caller chunks its data. Means are computed about the first element, which
//! makes the mean of a constant sequence exact.

use alloc::vec::Vec;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Arithmetic mean; `None` for an empty input.
pub fn mean(values: &[f64]) -> Option<f64> {
    let (&first, _) = values.split_first()?;
    let shifted = sum(values.iter().map(|&v| v - first));
    Some(first + shifted / values.len() as f64)
}

/// Mean of an iterator, using the first item as the shift.
pub fn mean_iter(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut it = values.into_iter();
    let first = it.next()?;
    let mut acc = CompensatedSum::new();
    let mut n = 1usize;
    for v in it {
        acc.add(v - first);
        n += 1;
    }
    Some(first + acc.value() / n as f64)
}

/// Population variance (divide by `n`).
pub fn population_variance(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    Some(sum(values.iter().map(|&v| (v - m) * (v - m))) / values.len() as f64)
}

/// Sample variance (divide by `n - 1`); `None` when `n < 2`.
pub fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    Some(sum(values.iter().map(|&v| (v - m) * (v - m))) / (values.len() - 1) as f64)
}

/// Central moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Mean, variance, skewness and excess kurtosis from population central
/// moments. `None` for fewer than four values or zero variance.
pub fn moments(values: &[f64]) -> Option<Moments> {
    if values.len() < 4 {
        return None;
    }
    let n = values.len() as f64;
    let m = mean(values)?;
    let (mut s2, mut s3, mut s4) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for &v in values {
        let d = v - m;
        let d2 = d * d;
        s2.add(d2);
        s3.add(d2 * d);
        s4.add(d2 * d2);
    }
    let m2 = s2.value() / n;
    if !(m2 > 0.0) {
        return None;
    }
    let m3 = s3.value() / n;
    let m4 = s4.value() / n;
    Some(Moments {
        mean: m,
        variance: m2,
        skewness: m3 / (m2 * libm::sqrt(m2)),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Pearson correlation of two equal-length series.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ma = mean(a)?;
    let mb = mean(b)?;
    let mut sab = CompensatedSum::new();
    let mut saa = CompensatedSum::new();
    let mut sbb = CompensatedSum::new();
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab.add(dx * dy);
        saa.add(dx * dx);
        sbb.add(dy * dy);
    }
    let denom = libm::sqrt(saa.value() * sbb.value());
    (denom > 0.0).then(|| sab.value() / denom)
}

/// Median of a slice (average of the two middle values for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Fixed-bin histogram over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins `values` into `bins` equal-width bins spanning their range. A
    /// zero-width range collapses into a single bin.
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Self {
                lo: 0.0,
                hi: 0.0,
                counts: Vec::new(),
            };
        }
        if !(hi > lo) {
            let mut counts = alloc::vec![0; 1];
            counts[0] = values.len();
            return Self { lo, hi, counts };
        }
        let mut counts = alloc::vec![0usize; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let idx = libm::floor((v - lo) / width) as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn bin_width(&self) -> f64 {
        if self.counts.is_empty() {
            0.0
        } else {
            (self.hi - self.lo) / self.counts.len() as f64
        }
    }
}
