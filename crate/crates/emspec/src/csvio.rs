//! Price loaders and the CSV tables exchanged between stages.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use emspec_core::panel::PricePanel;
use emspec_core::NaiveDate;

use crate::error::{AppError, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok()
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| AppError::io(path, e))
}

/// Loads a price file. The header decides the layout: `date,ticker,adj_close`
/// is long, anything else starting with `date` is wide.
pub fn read_prices(path: &Path) -> Result<PricePanel> {
    parse_prices(open(path)?, &path.display().to_string())
}

pub fn parse_prices<R: Read>(reader: R, source: &str) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| AppError::input(format!("{source}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if lower.first().map(String::as_str) != Some("date") {
        return Err(AppError::input(format!(
            "{source}: first header column must be `date`"
        )));
    }
    if lower == ["date", "ticker", "adj_close"] {
        parse_long(rdr, source)
    } else {
        parse_wide(rdr, header, source)
    }
}

struct Cell<'a> {
    source: &'a str,
    line: u64,
}

impl Cell<'_> {
    fn err(&self, what: impl std::fmt::Display) -> AppError {
        AppError::input(format!("{}: line {}: {what}", self.source, self.line))
    }

    fn date(&self, s: &str) -> Result<NaiveDate> {
        parse_date(s).ok_or_else(|| self.err(format!("bad date `{s}` (expected YYYY-MM-DD)")))
    }

    fn price(&self, s: &str, column: &str) -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("na") {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(format!("column `{column}`: not a number `{s}`")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(self.err(format!(
                "column `{column}`: price must be positive and finite, got {s}"
            )));
        }
        Ok(Some(v))
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_wide<R: Read>(
    mut rdr: csv::Reader<R>,
    header: Vec<String>,
    source: &str,
) -> Result<PricePanel> {
    let tickers: Vec<String> = header[1..].to_vec();
    if tickers.is_empty() {
        return Err(AppError::input(format!("{source}: no instrument columns")));
    }
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() || !seen.insert(t) {
            return Err(AppError::input(format!(
                "{source}: empty or duplicate ticker column `{t}`"
            )));
        }
    }
    let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::input(format!("{source}: {e}")))?;
        let at = Cell {
            source,
            line: record_line(&rec),
        };
        if rec.len() != header.len() {
            return Err(at.err(format!(
                "expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        let date = at.date(&rec[0])?;
        let cells = tickers
            .iter()
            .enumerate()
            .map(|(i, t)| at.price(&rec[i + 1], t))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(date, cells).is_some() {
            return Err(at.err(format!("duplicate date {date}")));
        }
    }
    let dates: Vec<NaiveDate> = rows.keys().copied().collect();
    let cells = rows.into_values().flatten().collect();
    Ok(PricePanel::new(dates, tickers, cells)?)
}

fn parse_long<R: Read>(mut rdr: csv::Reader<R>, source: &str) -> Result<PricePanel> {
    let mut tickers: Vec<String> = Vec::new();
    let mut col: HashMap<String, usize> = HashMap::new();
    let mut obs: BTreeMap<NaiveDate, HashMap<usize, f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::input(format!("{source}: {e}")))?;
        let at = Cell {
            source,
            line: record_line(&rec),
        };
        if rec.len() != 3 {
            return Err(at.err(format!("expected 3 fields, found {}", rec.len())));
        }
        let date = at.date(&rec[0])?;
        let ticker = rec[1].trim();
        if ticker.is_empty() {
            return Err(at.err("empty ticker"));
        }
        let Some(price) = at.price(&rec[2], "adj_close")? else {
            continue;
        };
        let i = *col.entry(ticker.to_string()).or_insert_with(|| {
            tickers.push(ticker.to_string());
            tickers.len() - 1
        });
        if obs.entry(date).or_default().insert(i, price).is_some() {
            return Err(at.err(format!("duplicate observation for {ticker} on {date}")));
        }
    }
    if tickers.is_empty() {
        return Err(AppError::input(format!("{source}: no observations")));
    }
    let n = tickers.len();
    let dates: Vec<NaiveDate> = obs.keys().copied().collect();
    let cells = obs
        .values()
        .flat_map(|row| (0..n).map(move |i| row.get(&i).copied()))
        .collect();
    Ok(PricePanel::new(dates, tickers, cells)?)
}

/// `ticker,sector` pairs.
pub fn read_sectors(path: &Path) -> Result<BTreeMap<String, String>> {
    let source = path.display().to_string();
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::input(format!("{source}: {e}")))?;
        if rec.len() != 2 {
            return Err(AppError::input(format!(
                "{source}: line {}: expected ticker,sector",
                record_line(&rec)
            )));
        }
        out.insert(rec[0].trim().to_string(), rec[1].trim().to_string());
    }
    Ok(out)
}

/// Wide layout with empty cells for absent prices.
pub fn prices_to_csv(panel: &PricePanel) -> Vec<u8> {
    let mut t =
        Table::new(std::iter::once("date").chain(panel.tickers().iter().map(String::as_str)));
    for (row, d) in panel.dates().iter().enumerate() {
        let mut r = vec![d.to_string()];
        r.extend((0..panel.n_instruments()).map(|i| fmt_opt(panel.get(row, i))));
        t.push(r);
    }
    t.to_bytes()
}

/// Rows of strings under a header, serialized with the csv crate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let source = path.display().to_string();
        let mut rdr = csv::Reader::from_reader(open(path)?);
        let header = rdr
            .headers()
            .map_err(|e| AppError::input(format!("{source}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|r| r.iter().map(str::to_string).collect())
                    .map_err(|e| AppError::input(format!("{source}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::input(format!("missing column `{name}`")))
    }

    /// Typed view of one column; empty cells are `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = r[c].trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| {
                    AppError::input(format!(
                        "row {}: column `{name}`: not a number `{s}`",
                        i + 2
                    ))
                })
            })
            .collect()
    }

    pub fn dates(&self, name: &str) -> Result<Vec<NaiveDate>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                parse_date(&r[c]).ok_or_else(|| {
                    AppError::input(format!(
                        "row {}: column `{name}`: bad date `{}`",
                        i + 2,
                        r[c]
                    ))
                })
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [
            0.1,
            1.0 / 3.0,
            -1.2345678901234567e-300,
            5e-324,
            f64::MAX,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["date", "x"]);
        t.push(vec!["2001-01-02".into(), fmt_f64(0.25)]);
        t.push(vec!["2001-01-03".into(), String::new()]);
        let p = dir.path().join("t.csv");
        std::fs::write(&p, t.to_bytes()).unwrap();
        let back = Table::read(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("x").unwrap(), vec![Some(0.25), None]);
        assert!(back.floats("y").is_err());
    }
}
