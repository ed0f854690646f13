//! Per-epoch indicator rows: market return `r(t)`, mean correlation `mu(t)`,
//! smallest emerging eigenvalue and largest eigenvalue.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::corr::{epoch_correlation, DegeneratePolicy, EpochSpec};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::panel::{to_returns, PricePanel, ReturnPanel};
use crate::spectrum::{power_map, split_spectrum, PowerMapParams, SpectrumSplit};

/// Mean of the `N(N-1)` off-diagonal entries (signed).
pub fn mean_market_correlation(c: &Matrix) -> Result<f64> {
    let n = c.rows();
    if n < 2 || !c.is_square() {
        return Err(Error::InsufficientData {
            what: "instruments for mean correlation",
            needed: 2,
            got: n,
        });
    }
    let upper = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
    Ok(crate::stats::mean_iter(upper.map(|(i, j)| c[(i, j)])).unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarketSource {
    /// Log returns of a supplied index price series.
    Index,
    /// Equal-weighted mean of constituent log returns.
    EqualWeighted,
}

impl MarketSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarketSource::Index => "index",
            MarketSource::EqualWeighted => "equal_weighted",
        }
    }
}

/// Market return on every date of a return panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketReturn {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub source: MarketSource,
}

/// Uses the first column of `index` when given, otherwise the equal-weighted
/// constituent mean.
pub fn market_return(returns: &ReturnPanel, index: Option<&PricePanel>) -> Result<MarketReturn> {
    let dates = returns.dates().to_vec();
    match index {
        None => {
            let n = returns.n_instruments();
            let values = (0..returns.n_dates())
                .map(|t| crate::stats::mean_iter((0..n).map(|i| returns.get(t, i))).unwrap_or(0.0))
                .collect();
            Ok(MarketReturn {
                dates,
                values,
                source: MarketSource::EqualWeighted,
            })
        }
        Some(index) => {
            if index.n_instruments() == 0 {
                return Err(Error::InvalidPanel("index panel has no columns".into()));
            }
            let idx = to_returns(index)?;
            let by_date: BTreeMap<NaiveDate, f64> = idx
                .dates()
                .iter()
                .enumerate()
                .map(|(t, &d)| (d, idx.get(t, 0)))
                .collect();
            let missing: Vec<NaiveDate> = dates
                .iter()
                .filter(|d| !by_date.contains_key(d))
                .copied()
                .collect();
            if let Some(&first) = missing.first() {
                return Err(Error::IndexGaps { first, missing });
            }
            let values = dates.iter().map(|d| by_date[d]).collect();
            Ok(MarketReturn {
                dates,
                values,
                source: MarketSource::Index,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowFlags {
    /// Emerging and normal clusters touch or overlap.
    pub gap_nonpositive: bool,
    /// Instruments excised from this epoch for zero variance.
    pub dropped_instruments: usize,
    /// Soft check: emerging spectrum present, `eps > 0`, yet `lambda_min > 0`.
    pub lambda_min_positive: bool,
}

impl RowFlags {
    pub fn is_clear(&self) -> bool {
        *self == RowFlags::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub date: NaiveDate,
    pub r: f64,
    pub mu: f64,
    pub lambda_min: Option<f64>,
    pub lambda_max: f64,
    pub separation_gap: Option<f64>,
    pub flags: RowFlags,
}

/// One epoch's indicator row together with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochAnalysis {
    pub row: IndicatorRow,
    pub split: SpectrumSplit,
}

/// Correlation, power map, spectrum split and indicator row for the epoch
/// ending at `end_index`. `market` must be aligned with `returns`.
pub fn analyze_epoch(
    returns: &ReturnPanel,
    end_index: usize,
    spec: EpochSpec,
    params: PowerMapParams,
    policy: DegeneratePolicy,
    market: &MarketReturn,
) -> Result<EpochAnalysis> {
    let corr = epoch_correlation(returns, end_index, spec, policy)?;
    let date = corr.end_date;
    let mu = mean_market_correlation(&corr.matrix).map_err(|e| e.at_epoch(date))?;
    let mapped = power_map(&corr.matrix, params);
    let eigs = SymmetricEigen::values_only(&mapped).map_err(|e| e.at_epoch(date))?;
    let split =
        split_spectrum(date, &eigs, corr.n(), spec.epoch_len()).map_err(|e| e.at_epoch(date))?;
    let flags = RowFlags {
        gap_nonpositive: split.gap_nonpositive(),
        dropped_instruments: corr.dropped.len(),
        lambda_min_positive: params.epsilon() > 0.0
            && matches!(split.lambda_min_emerging, Some(l) if l > 0.0),
    };
    let row = IndicatorRow {
        date,
        r: market.values[end_index],
        mu,
        lambda_min: split.lambda_min_emerging,
        lambda_max: split.lambda_max,
        separation_gap: split.separation_gap,
        flags,
    };
    Ok(EpochAnalysis { row, split })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub rows: Vec<IndicatorRow>,
    pub epsilon: f64,
    pub source: MarketSource,
}

impl IndicatorSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }

    pub fn r(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }

    pub fn mu(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mu).collect()
    }

    pub fn lambda_max(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lambda_max).collect()
    }

    /// `None` if any epoch has an empty emerging spectrum.
    pub fn lambda_min(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.lambda_min).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRun {
    pub series: IndicatorSeries,
    pub splits: Vec<SpectrumSplit>,
}

impl IndicatorRun {
    /// Assembles analyses already in end-date order.
    pub fn from_epochs(
        epochs: Vec<EpochAnalysis>,
        params: PowerMapParams,
        source: MarketSource,
    ) -> Self {
        let (rows, splits) = epochs.into_iter().map(|e| (e.row, e.split)).unzip();
        Self {
            series: IndicatorSeries {
                rows,
                epsilon: params.epsilon(),
                source,
            },
            splits,
        }
    }
}

/// Sequential indicator build over every rolling epoch.
pub fn build_indicators(
    returns: &ReturnPanel,
    spec: EpochSpec,
    params: PowerMapParams,
    policy: DegeneratePolicy,
    market: &MarketReturn,
) -> Result<IndicatorRun> {
    check_inputs(returns, spec, market)?;
    let epochs = spec
        .end_indices(returns.n_dates())
        .map(|end| analyze_epoch(returns, end, spec, params, policy, market))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorRun::from_epochs(epochs, params, market.source))
}

/// Preconditions shared by sequential and parallel builds.
pub fn check_inputs(returns: &ReturnPanel, spec: EpochSpec, market: &MarketReturn) -> Result<()> {
    if returns.n_dates() < spec.epoch_len() {
        return Err(Error::InsufficientData {
            what: "return rows for one epoch",
            needed: spec.epoch_len(),
            got: returns.n_dates(),
        });
    }
    if market.dates.as_slice() != returns.dates() {
        return Err(Error::DateMismatch(
            "market return dates differ from the return panel".into(),
        ));
    }
    Ok(())
}
