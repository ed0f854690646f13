//! Equal-time Pearson correlation matrices over rolling epochs.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::ReturnPanel;
use crate::stats::CompensatedSum;

/// Epoch length `M` and shift `dt`, both in trading days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochSpec {
    epoch_len: usize,
    shift: usize,
}

impl EpochSpec {
    pub fn new(epoch_len: usize, shift: usize) -> Result<Self> {
        if epoch_len < 2 {
            return Err(Error::param("epoch_len", "must be at least 2"));
        }
        if shift < 1 {
            return Err(Error::param("shift", "must be at least 1"));
        }
        Ok(Self { epoch_len, shift })
    }

    pub fn epoch_len(&self) -> usize {
        self.epoch_len
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    /// Number of epochs that fit in `rows` return rows:
    /// `floor((rows - M) / dt) + 1`, or zero if `rows < M`.
    pub fn epoch_count(&self, rows: usize) -> usize {
        if rows < self.epoch_len {
            0
        } else {
            (rows - self.epoch_len) / self.shift + 1
        }
    }

    /// End row indices `M-1, M-1+dt, ...` of every epoch.
    pub fn end_indices(&self, rows: usize) -> impl Iterator<Item = usize> + Clone {
        let first = self.epoch_len - 1;
        let shift = self.shift;
        (0..self.epoch_count(rows)).map(move |k| first + k * shift)
    }
}

impl Default for EpochSpec {
    fn default() -> Self {
        Self {
            epoch_len: 20,
            shift: 1,
        }
    }
}

/// What to do with an instrument whose returns are constant inside an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    #[default]
    Error,
    /// Remove the instrument from that epoch only.
    Drop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochCorrelation {
    pub end_date: NaiveDate,
    pub end_index: usize,
    pub epoch: EpochSpec,
    /// Panel column of each matrix row, in panel order.
    pub instruments: Vec<usize>,
    /// Panel columns excised because of zero variance.
    pub dropped: Vec<usize>,
    pub matrix: Matrix,
}

impl EpochCorrelation {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }
}

/// Correlation matrix of the window `[end_index - M + 1, end_index]` using
/// population moments.
pub fn epoch_correlation(
    returns: &ReturnPanel,
    end_index: usize,
    spec: EpochSpec,
    policy: DegeneratePolicy,
) -> Result<EpochCorrelation> {
    let m = spec.epoch_len();
    if end_index + 1 < m || end_index >= returns.n_dates() {
        return Err(Error::param(
            "end_index",
            alloc::format!(
                "{end_index} outside [{}, {}) for epoch length {m}",
                m.saturating_sub(1),
                returns.n_dates()
            ),
        ));
    }
    let end_date = returns.dates()[end_index];
    let start = end_index + 1 - m;
    let n_all = returns.n_instruments();

    // Centered window columns and their population standard deviations.
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(n_all);
    let mut sigma = Vec::with_capacity(n_all);
    let mut instruments = Vec::with_capacity(n_all);
    let mut dropped = Vec::new();
    for i in 0..n_all {
        let col: Vec<f64> = (start..=end_index).map(|t| returns.get(t, i)).collect();
        let mean = crate::stats::mean(&col).unwrap_or(0.0);
        let dev: Vec<f64> = col.iter().map(|&x| x - mean).collect();
        let mut ss = CompensatedSum::new();
        for &d in &dev {
            ss.add(d * d);
        }
        let var = ss.value() / m as f64;
        if var > 0.0 {
            instruments.push(i);
            sigma.push(libm::sqrt(var));
            centered.push(dev);
        } else {
            dropped.push(i);
        }
    }
    if !dropped.is_empty() && policy == DegeneratePolicy::Error {
        let names: Vec<String> = dropped
            .iter()
            .map(|&i| returns.tickers()[i].clone())
            .collect();
        return Err(Error::ZeroVariance { instruments: names }.at_epoch(end_date));
    }
    if instruments.len() < 2 {
        return Err(Error::TooFewInstruments {
            remaining: instruments.len(),
        }
        .at_epoch(end_date));
    }

    let n = instruments.len();
    let mut matrix = Matrix::identity(n);
    for a in 0..n {
        for b in (a + 1)..n {
            let mut acc = CompensatedSum::new();
            for (x, y) in centered[a].iter().zip(&centered[b]) {
                acc.add(x * y);
            }
            let cov = acc.value() / m as f64;
            let c = (cov / (sigma[a] * sigma[b])).clamp(-1.0, 1.0);
            matrix[(a, b)] = c;
            matrix[(b, a)] = c;
        }
    }
    Ok(EpochCorrelation {
        end_date,
        end_index,
        epoch: spec,
        instruments,
        dropped,
        matrix,
    })
}

/// Lazily yields one [`EpochCorrelation`] per epoch in end-date order.
pub fn rolling_correlations(
    returns: &ReturnPanel,
    spec: EpochSpec,
    policy: DegeneratePolicy,
) -> Result<RollingCorrelations<'_>> {
    if returns.n_dates() < spec.epoch_len() {
        return Err(Error::InsufficientData {
            what: "return rows for one epoch",
            needed: spec.epoch_len(),
            got: returns.n_dates(),
        });
    }
    Ok(RollingCorrelations {
        returns,
        spec,
        policy,
        next: 0,
        count: spec.epoch_count(returns.n_dates()),
    })
}

pub struct RollingCorrelations<'a> {
    returns: &'a ReturnPanel,
    spec: EpochSpec,
    policy: DegeneratePolicy,
    next: usize,
    count: usize,
}

impl Iterator for RollingCorrelations<'_> {
    type Item = Result<EpochCorrelation>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let end = self.spec.epoch_len() - 1 + self.next * self.spec.shift();
        self.next += 1;
        Some(epoch_correlation(self.returns, end, self.spec, self.policy))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for RollingCorrelations<'_> {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn panel(cols: &[&[f64]]) -> ReturnPanel {
        let t = cols[0].len();
        let dates = (0..t)
            .map(|k| NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + chrono::Days::new(k as u64))
            .collect();
        let tickers = (0..cols.len()).map(|i| alloc::format!("S{i}")).collect();
        let m = Matrix::from_fn(t, cols.len(), |r, c| cols[c][r]);
        ReturnPanel::new(dates, tickers, m).unwrap()
    }

    #[test]
    fn identical_and_opposite_windows() {
        let x = [0.01, -0.02, 0.03, 0.0, 0.015];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let p = panel(&[&x, &x, &neg]);
        let spec = EpochSpec::new(5, 1).unwrap();
        let c = epoch_correlation(&p, 4, spec, DegeneratePolicy::Error).unwrap();
        assert!((c.matrix[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((c.matrix[(0, 2)] + 1.0).abs() < 1e-15);
        assert_eq!(c.matrix.diagonal(), vec![1.0; 3]);
    }

    #[test]
    fn zero_variance_is_an_error_unless_dropped() {
        let x = [0.01, -0.02, 0.03, 0.0];
        let y = [0.02, 0.01, -0.01, 0.0];
        let flat = [0.0; 4];
        let p = panel(&[&x, &flat, &y]);
        let spec = EpochSpec::new(4, 1).unwrap();
        let err = epoch_correlation(&p, 3, spec, DegeneratePolicy::Error).unwrap_err();
        assert!(err.to_string().contains("S1"), "{err}");
        let c = epoch_correlation(&p, 3, spec, DegeneratePolicy::Drop).unwrap();
        assert_eq!(c.instruments, vec![0, 2]);
        assert_eq!(c.dropped, vec![1]);
        assert_eq!(c.n(), 2);
    }

    #[test]
    fn epoch_counts() {
        let s = EpochSpec::new(20, 1).unwrap();
        assert_eq!(s.epoch_count(25), 6);
        assert_eq!(s.epoch_count(19), 0);
        let s = EpochSpec::new(20, 20).unwrap();
        assert_eq!(s.epoch_count(40), 2);
        assert_eq!(s.end_indices(40).collect::<Vec<_>>(), vec![19, 39]);
    }

    #[test]
    fn invalid_spec() {
        assert!(EpochSpec::new(1, 1).is_err());
        assert!(EpochSpec::new(5, 0).is_err());
    }
}
