//! Date-aligned price panels and log-return panels.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Adjusted close prices for `N` instruments over `T` trading days.
///
/// Cells may be absent straight after loading; [`align`] removes them.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    /// Row-major `T x N`.
    cells: Vec<Option<f64>>,
    /// Opaque display metadata, never used in computation.
    pub sectors: BTreeMap<String, String>,
}

impl PricePanel {
    /// Validates and builds a panel. `cells` is row-major `dates.len() x
    /// tickers.len()`.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        cells: Vec<Option<f64>>,
    ) -> Result<Self> {
        if cells.len() != dates.len() * tickers.len() {
            return Err(Error::InvalidPanel(format!(
                "expected {} cells for {} dates x {} tickers, got {}",
                dates.len() * tickers.len(),
                dates.len(),
                tickers.len(),
                cells.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel(format!(
                "dates not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        for (i, t) in tickers.iter().enumerate() {
            if tickers[..i].contains(t) {
                return Err(Error::InvalidPanel(format!("duplicate ticker {t}")));
            }
        }
        let n = tickers.len();
        for (k, cell) in cells.iter().enumerate() {
            if let Some(p) = *cell {
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::InvalidPanel(format!(
                        "non-positive or non-finite price {p} at date {}, ticker {}",
                        dates[k / n],
                        tickers[k % n]
                    )));
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            cells,
            sectors: BTreeMap::new(),
        })
    }

    /// Builds a gap-free panel from a dense `T x N` matrix.
    pub fn from_matrix(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        prices: &Matrix,
    ) -> Result<Self> {
        let cells = prices.as_slice().iter().map(|&p| Some(p)).collect();
        Self::new(dates, tickers, cells)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_instruments(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, t: usize, i: usize) -> Option<f64> {
        self.cells[t * self.tickers.len() + i]
    }

    pub fn absent_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.absent_cells() == 0
    }

    /// Dense price matrix; fails if any cell is absent.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let absent = self.absent_cells();
        if absent > 0 {
            return Err(Error::AbsentCells { count: absent });
        }
        let data = self.cells.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
        Ok(Matrix::from_row_major(
            self.n_dates(),
            self.n_instruments(),
            data,
        ))
    }

    /// Column of one instrument; `None` cells stay `None`.
    pub fn column(&self, i: usize) -> Vec<Option<f64>> {
        (0..self.n_dates()).map(|t| self.get(t, i)).collect()
    }

    fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let n = self.tickers.len();
        let mut cells = Vec::with_capacity(rows.len() * cols.len());
        for &t in rows {
            for &i in cols {
                cells.push(self.cells[t * n + i]);
            }
        }
        let tickers: Vec<String> = cols.iter().map(|&i| self.tickers[i].clone()).collect();
        let sectors = self
            .sectors
            .iter()
            .filter(|(k, _)| tickers.contains(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Self {
            dates: rows.iter().map(|&t| self.dates[t]).collect(),
            tickers,
            cells,
            sectors,
        }
    }
}

/// How [`align`] resolves absent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignPolicy {
    /// Keep only dates on which every instrument has a price.
    #[default]
    IntersectDates,
    /// Carry the last price forward across runs of at most `max_gap` missing
    /// trading days (rows). Instruments with a longer run are dropped.
    ForwardFill { max_gap: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentReport {
    pub dropped_tickers: Vec<String>,
    pub filled_cells: usize,
    pub dropped_dates: usize,
}

/// Removes every absent cell according to `policy`.
pub fn align(panel: &PricePanel, policy: AlignPolicy) -> Result<(PricePanel, AlignmentReport)> {
    let n = panel.n_instruments();
    let t_len = panel.n_dates();
    let mut report = AlignmentReport::default();
    let mut work = panel.clone();
    let mut keep_cols: Vec<usize> = Vec::with_capacity(n);

    for i in 0..n {
        let col = panel.column(i);
        if col.iter().all(Option::is_none) {
            report.dropped_tickers.push(panel.tickers[i].clone());
            continue;
        }
        if let AlignPolicy::ForwardFill { max_gap } = policy {
            match forward_fill(&col, max_gap) {
                Some((filled, count)) => {
                    for (t, v) in filled.into_iter().enumerate() {
                        work.cells[t * n + i] = v;
                    }
                    report.filled_cells += count;
                }
                None => {
                    report.dropped_tickers.push(panel.tickers[i].clone());
                    continue;
                }
            }
        }
        keep_cols.push(i);
    }
    if keep_cols.len() < 2 {
        return Err(Error::TooFewInstruments {
            remaining: keep_cols.len(),
        });
    }

    let keep_rows: Vec<usize> = (0..t_len)
        .filter(|&t| keep_cols.iter().all(|&i| work.cells[t * n + i].is_some()))
        .collect();
    report.dropped_dates = t_len - keep_rows.len();
    if keep_rows.len() < 2 {
        return Err(Error::InsufficientData {
            what: "aligned dates",
            needed: 2,
            got: keep_rows.len(),
        });
    }
    Ok((work.select(&keep_rows, &keep_cols), report))
}

/// Fills interior and trailing runs of length `<= max_gap`. Leading absent
/// cells are left for the date filter. Returns `None` if a longer run exists.
fn forward_fill(col: &[Option<f64>], max_gap: usize) -> Option<(Vec<Option<f64>>, usize)> {
    let mut out = col.to_vec();
    let mut last: Option<f64> = None;
    let mut run = 0usize;
    let mut filled = 0usize;
    for cell in out.iter_mut() {
        match *cell {
            Some(p) => {
                last = Some(p);
                run = 0;
            }
            None => {
                if let Some(p) = last {
                    run += 1;
                    if run > max_gap {
                        return None;
                    }
                    *cell = Some(p);
                    filled += 1;
                }
            }
        }
    }
    Some((out, filled))
}

/// Log returns `r[t][i] = ln P[t+1][i] - ln P[t][i]` for `T - 1` dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: Matrix,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, returns: Matrix) -> Result<Self> {
        if returns.rows() != dates.len() || returns.cols() != tickers.len() {
            return Err(Error::InvalidPanel(format!(
                "return matrix is {}x{} but there are {} dates and {} tickers",
                returns.rows(),
                returns.cols(),
                dates.len(),
                tickers.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel(format!(
                "dates not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if returns.as_slice().iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidPanel("non-finite return".into()));
        }
        Ok(Self {
            dates,
            tickers,
            returns,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &Matrix {
        &self.returns
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_instruments(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.returns[(t, i)]
    }
}

/// Log-return panel of an aligned price panel; dates are the later date of
/// each consecutive pair.
pub fn to_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let prices = panel.to_matrix()?;
    let t_len = panel.n_dates();
    if t_len < 2 {
        return Err(Error::InsufficientData {
            what: "price dates",
            needed: 2,
            got: t_len,
        });
    }
    let n = panel.n_instruments();
    let returns = Matrix::from_fn(t_len - 1, n, |t, i| {
        libm::log(prices[(t + 1, i)]) - libm::log(prices[(t, i)])
    });
    ReturnPanel::new(panel.dates[1..].to_vec(), panel.tickers.clone(), returns)
}
