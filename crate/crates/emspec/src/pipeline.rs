//! The five pipeline stages. Each stage reads its inputs from the output
//! directory (or the configured price files, for `ingest`), writes its CSVs
//! atomically and merges a record into `manifest.json`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use emspec_core::corr::epoch_correlation;
use emspec_core::garch::{fit_indicator_volatility, SeriesTransform};
use emspec_core::indicators::{analyze_epoch, check_inputs, market_return, IndicatorRun, RowFlags};
use emspec_core::lagreg::{fit_window, lagged_design, window_ends, Series, WindowOutcome};
use emspec_core::modetest::{test_epoch, EpochOutlier};
use emspec_core::panel::{align, to_returns, PricePanel};
use emspec_core::spectrum::spectrum_shape_stats;
use emspec_core::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::csvio::{self, fmt_f64, fmt_opt, Table};
use crate::error::{AppError, Result};
use crate::store::{ordered_map, pool, OutDir, StageRecord};

pub const ALIGNED_PRICES: &str = "aligned_prices.csv";
pub const INDEX_PRICES: &str = "index_prices.csv";
pub const SECTORS: &str = "sectors.csv";
pub const ALIGNMENT: &str = "alignment.json";
pub const INDICATORS: &str = "indicators.csv";
pub const SPECTRA: &str = "spectra.csv";
pub const EIGENVALUES: &str = "eigenvalues.csv";
pub const MATRICES: &str = "matrices.bin";
pub const OUTLIERS: &str = "outliers.csv";
pub const REGRESSION: &str = "regression.csv";
pub const GARCH: &str = "garch.csv";
pub const GARCH_PATHS: &str = "garch_paths.csv";

pub const MATRIX_MAGIC: &[u8; 8] = b"EMSPMAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Indicators,
    Outliers,
    Regress,
    GarchFit,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Indicators,
        Stage::Outliers,
        Stage::Regress,
        Stage::GarchFit,
    ];

    /// Also the subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Indicators => "indicators",
            Stage::Outliers => "outliers",
            Stage::Regress => "regress",
            Stage::GarchFit => "garch-fit",
        }
    }
}

/// Alignment report written as `alignment.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentJson {
    pub dropped_tickers: Vec<String>,
    pub filled_cells: usize,
    pub dropped_dates: usize,
    pub instruments: usize,
    /// Price dates kept after alignment.
    pub price_rows: usize,
    /// Return rows, one fewer than the price rows.
    pub return_rows: usize,
}

type StageOutput = (StageRecord, Vec<PathBuf>);

/// Runs one stage, tags failures with its name and updates the manifest.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageRecord> {
    let tag = |e: AppError| e.in_stage(stage.name());
    let out = OutDir::new(&cfg.out_dir);
    let start = Instant::now();
    let (mut record, inputs) = match stage {
        Stage::Ingest => ingest(cfg, &out),
        Stage::Indicators => indicators(cfg, &out),
        Stage::Outliers => outliers(cfg, &out),
        Stage::Regress => regress(cfg, &out),
        Stage::GarchFit => garch_fit(cfg, &out),
    }
    .map_err(tag)?;
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    for note in record.notes.iter().take(5) {
        eprintln!("[{}] warning: {note}", stage.name());
    }
    if record.soft_errors > 5 {
        eprintln!(
            "[{}] {} warnings in total, see manifest.json",
            stage.name(),
            record.soft_errors
        );
    }
    out.record_stage(stage.name(), cfg.entries(), &inputs, record.clone())
        .map_err(tag)?;
    Ok(record)
}

/// Every stage in order; stops at the first failure.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<StageRecord>> {
    cfg.require_seed("run").map_err(|e| e.in_stage("run"))?;
    Stage::ALL.iter().map(|&s| run_stage(s, cfg)).collect()
}

fn ingest(cfg: &PipelineConfig, out: &OutDir) -> Result<StageOutput> {
    let path = cfg.prices_path.clone().ok_or_else(|| {
        AppError::usage("no price file: pass --prices or set `prices` in the config file")
    })?;
    let raw = csvio::read_prices(&path)?;
    let (aligned, report) = align(&raw, cfg.align)?;
    let mut rec = StageRecord::default();
    let mut inputs = vec![path];

    out.write(ALIGNED_PRICES, &csvio::prices_to_csv(&aligned))?;
    let json = AlignmentJson {
        dropped_tickers: report.dropped_tickers,
        filled_cells: report.filled_cells,
        dropped_dates: report.dropped_dates,
        instruments: aligned.n_instruments(),
        price_rows: aligned.n_dates(),
        return_rows: aligned.n_dates().saturating_sub(1),
    };
    out.write(
        ALIGNMENT,
        &serde_json::to_vec_pretty(&json).expect("report serializes"),
    )?;
    rec.outputs = vec![ALIGNED_PRICES.into(), ALIGNMENT.into()];

    match &cfg.index_path {
        Some(p) => {
            let index = present_rows(&csvio::read_prices(p)?)?;
            out.write(INDEX_PRICES, &csvio::prices_to_csv(&index))?;
            rec.outputs.push(INDEX_PRICES.into());
            inputs.push(p.clone());
        }
        None => remove_stale(out, INDEX_PRICES)?,
    }
    match &cfg.sectors_path {
        Some(p) => {
            let sectors = csvio::read_sectors(p)?;
            let mut t = Table::new(["ticker", "sector"]);
            for ticker in aligned.tickers() {
                match sectors.get(ticker) {
                    Some(s) => t.push(vec![ticker.clone(), s.clone()]),
                    None => rec.soft(format!("no sector for {ticker}")),
                }
            }
            out.write(SECTORS, &t.to_bytes())?;
            rec.outputs.push(SECTORS.into());
            inputs.push(p.clone());
        }
        None => remove_stale(out, SECTORS)?,
    }
    Ok((rec, inputs))
}

fn remove_stale(out: &OutDir, name: &str) -> Result<()> {
    let p = out.path(name);
    match std::fs::remove_file(&p) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(AppError::io(&p, e)),
        _ => Ok(()),
    }
}

/// Single-series index panel restricted to dates with a price.
fn present_rows(index: &PricePanel) -> Result<PricePanel> {
    if index.n_instruments() != 1 {
        return Err(AppError::input(format!(
            "index file must hold exactly one series, found {}",
            index.n_instruments()
        )));
    }
    let (dates, cells): (Vec<NaiveDate>, Vec<Option<f64>>) = (0..index.n_dates())
        .filter_map(|t| index.get(t, 0).map(|p| (index.dates()[t], Some(p))))
        .unzip();
    Ok(PricePanel::new(dates, index.tickers().to_vec(), cells)?)
}

fn flags_str(f: &RowFlags) -> String {
    let mut parts = Vec::new();
    if f.gap_nonpositive {
        parts.push("gap_nonpositive".to_string());
    }
    if f.lambda_min_positive {
        parts.push("lambda_min_positive".to_string());
    }
    if f.dropped_instruments > 0 {
        parts.push(format!("dropped={}", f.dropped_instruments));
    }
    parts.join(";")
}

fn indicators(cfg: &PipelineConfig, out: &OutDir) -> Result<StageOutput> {
    let prices = csvio::read_prices(&out.require(ALIGNED_PRICES, "ingest")?)?;
    let index = match out.path(INDEX_PRICES) {
        p if p.is_file() => Some(csvio::read_prices(&p)?),
        _ => None,
    };
    let returns = to_returns(&prices)?;
    let market = market_return(&returns, index.as_ref())?;
    let spec = cfg.epoch_spec()?;
    let params = cfg.power_map()?;
    check_inputs(&returns, spec, &market)?;

    let pool = pool()?;
    let ends: Vec<usize> = spec.end_indices(returns.n_dates()).collect();
    let epochs = ordered_map(&pool, &ends, |&end| {
        analyze_epoch(&returns, end, spec, params, cfg.degenerate, &market)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let run = IndicatorRun::from_epochs(epochs, params, market.source);

    let mut rec = StageRecord::default();
    rec.metadata
        .insert("market_source".into(), market.source.as_str().into());
    rec.metadata
        .insert("epochs".into(), run.series.len().to_string());
    if run.splits.iter().all(|s| s.emerging.is_empty()) {
        rec.metadata.insert(
            "lambda_min".into(),
            "absent: epoch length is not below the instrument count".into(),
        );
    }
    let flagged = |f: fn(&RowFlags) -> bool| run.series.rows.iter().filter(|r| f(&r.flags)).count();
    rec.metadata.insert(
        "rows_gap_nonpositive".into(),
        flagged(|f| f.gap_nonpositive).to_string(),
    );
    rec.metadata.insert(
        "rows_lambda_min_positive".into(),
        flagged(|f| f.lambda_min_positive).to_string(),
    );
    rec.metadata.insert(
        "rows_with_dropped_instruments".into(),
        flagged(|f| f.dropped_instruments > 0).to_string(),
    );

    out.write(INDICATORS, &indicator_table(&run).to_bytes())?;
    out.write(SPECTRA, &spectra_table(&run).to_bytes())?;
    out.write(EIGENVALUES, &eigenvalue_table(&run).to_bytes())?;
    rec.outputs = vec![INDICATORS.into(), SPECTRA.into(), EIGENVALUES.into()];

    if cfg.dump_matrices {
        let mats = ordered_map(&pool, &ends, |&end| {
            epoch_correlation(&returns, end, spec, cfg.degenerate)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let mut buf = MATRIX_MAGIC.to_vec();
        for c in &mats {
            encode_matrix(&mut buf, c.end_date, &c.matrix);
        }
        out.write(MATRICES, &buf)?;
        rec.outputs.push(MATRICES.into());
    } else {
        remove_stale(out, MATRICES)?;
    }
    Ok((rec, Vec::new()))
}

pub fn indicator_table(run: &IndicatorRun) -> Table {
    let mut t = Table::new([
        "date",
        "r",
        "mu",
        "lambda_min",
        "lambda_max",
        "separation_gap",
        "flags",
    ]);
    for r in &run.series.rows {
        t.push(vec![
            r.date.to_string(),
            fmt_f64(r.r),
            fmt_f64(r.mu),
            fmt_opt(r.lambda_min),
            fmt_f64(r.lambda_max),
            fmt_opt(r.separation_gap),
            flags_str(&r.flags),
        ]);
    }
    t
}

fn spectra_table(run: &IndicatorRun) -> Table {
    let mut t = Table::new([
        "end_date",
        "lambda_max",
        "lambda_min_emerging",
        "separation_gap",
        "emerging_kurtosis",
    ]);
    for s in &run.splits {
        let kurtosis = spectrum_shape_stats(s)
            .ok()
            .and_then(|st| st.moments)
            .map(|m| m.excess_kurtosis + 3.0);
        t.push(vec![
            s.end_date.to_string(),
            fmt_f64(s.lambda_max),
            fmt_opt(s.lambda_min_emerging),
            fmt_opt(s.separation_gap),
            fmt_opt(kurtosis),
        ]);
    }
    t
}

fn eigenvalue_table(run: &IndicatorRun) -> Table {
    let mut t = Table::new(["end_date", "part", "eigenvalue"]);
    for s in &run.splits {
        let d = s.end_date.to_string();
        for (part, values) in [("emerging", &s.emerging), ("normal", &s.normal)] {
            for &v in values.iter() {
                t.push(vec![d.clone(), part.to_string(), fmt_f64(v)]);
            }
        }
    }
    t
}

fn encode_matrix(buf: &mut Vec<u8>, date: NaiveDate, m: &emspec_core::linalg::Matrix) {
    let days = (date - NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid")).num_days() as i32;
    buf.extend_from_slice(&days.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    for i in 0..m.rows() {
        for j in 0..=i {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

/// One record of `matrices.bin`: end date, `N` and the lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRecord {
    pub end_date: NaiveDate,
    pub n: usize,
    pub lower: Vec<f64>,
}

pub fn decode_matrices(bytes: &[u8]) -> Result<Vec<MatrixRecord>> {
    let bad = || AppError::input("matrices.bin: truncated or not a matrix dump");
    let mut rest = bytes
        .strip_prefix(MATRIX_MAGIC.as_slice())
        .ok_or_else(bad)?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid");
    let mut out = Vec::new();
    while !rest.is_empty() {
        let (head, tail) = rest.split_at_checked(8).ok_or_else(bad)?;
        let days = i32::from_le_bytes(head[..4].try_into().expect("4 bytes"));
        let n = u32::from_le_bytes(head[4..].try_into().expect("4 bytes")) as usize;
        let len = n * (n + 1) / 2;
        let (body, tail) = tail.split_at_checked(8 * len).ok_or_else(bad)?;
        let lower = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push(MatrixRecord {
            end_date: epoch + chrono::Duration::days(days as i64),
            n,
            lower,
        });
        rest = tail;
    }
    Ok(out)
}

/// Emerging eigenvalues of every epoch, in file order.
pub fn read_emerging(out: &OutDir) -> Result<Vec<(NaiveDate, Vec<f64>)>> {
    let t = Table::read(&out.require(EIGENVALUES, "indicators")?)?;
    let dates = t.dates("end_date")?;
    let parts = t.strings("part")?;
    let values = t.floats("eigenvalue")?;
    let mut groups: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for ((d, part), v) in dates.into_iter().zip(parts).zip(values) {
        if groups.last().map(|g| g.0) != Some(d) {
            groups.push((d, Vec::new()));
        }
        if part == "emerging" {
            let v = v.ok_or_else(|| {
                AppError::input(format!("{EIGENVALUES}: empty eigenvalue on {d}"))
            })?;
            groups.last_mut().expect("pushed").1.push(v);
        }
    }
    Ok(groups)
}

fn outliers(cfg: &PipelineConfig, out: &OutDir) -> Result<StageOutput> {
    let seed = cfg.require_seed("outliers")?;
    let scfg = cfg.silverman()?;
    let groups = read_emerging(out)?;
    let pool = pool()?;
    let results = ordered_map(&pool, &groups, |(d, e)| test_epoch(*d, e, scfg, seed));

    let mut rec = StageRecord::default();
    let mut t = Table::new([
        "end_date",
        "sample_size",
        "critical_bandwidth",
        "p_value",
        "neg_log10_p",
        "reject",
    ]);
    for r in &results {
        match r {
            EpochOutlier::Tested(m) => t.push(vec![
                r.end_date().to_string(),
                m.sample_size.to_string(),
                fmt_f64(m.critical_bandwidth),
                fmt_f64(m.p_value),
                fmt_f64(m.neg_log10_p()),
                m.reject.to_string(),
            ]),
            EpochOutlier::Skipped { end_date, sample_size } => rec.soft(format!(
                "epoch ending {end_date} skipped: lower half has {sample_size} values, fewer than {}",
                emspec_core::modetest::MIN_SAMPLE
            )),
            EpochOutlier::Failed { error, .. } => rec.soft(error.to_string()),
        }
    }
    rec.metadata
        .insert("epochs".into(), results.len().to_string());
    rec.metadata
        .insert("tested".into(), t.rows.len().to_string());
    rec.metadata.insert("seed".into(), seed.to_string());
    out.write(OUTLIERS, &t.to_bytes())?;
    rec.outputs = vec![OUTLIERS.into()];
    Ok((rec, Vec::new()))
}

/// `date`, `mu` and `lambda_min` columns of `indicators.csv`.
pub struct IndicatorColumns {
    pub dates: Vec<NaiveDate>,
    pub r: Vec<f64>,
    pub mu: Vec<f64>,
    /// `None` when any epoch lacks an emerging spectrum.
    pub lambda_min: Option<Vec<f64>>,
}

pub fn read_indicators(out: &OutDir) -> Result<IndicatorColumns> {
    let path = out.require(INDICATORS, "indicators")?;
    let t = Table::read(&path)?;
    let required = |name: &str| -> Result<Vec<f64>> {
        t.floats(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    AppError::input(format!("{}: row {}: empty `{name}`", path.display(), i + 2))
                })
            })
            .collect()
    };
    Ok(IndicatorColumns {
        dates: t.dates("date")?,
        r: required("r")?,
        mu: required("mu")?,
        lambda_min: t.floats("lambda_min")?.into_iter().collect(),
    })
}

fn no_emerging() -> AppError {
    AppError::input(
        "lambda_min is absent from indicators.csv: the epoch length must be below the instrument count",
    )
}

fn regress(cfg: &PipelineConfig, out: &OutDir) -> Result<StageOutput> {
    let cols = read_indicators(out)?;
    let lmin = cols.lambda_min.ok_or_else(no_emerging)?;
    let design = lagged_design(
        &Series::new(cols.dates.clone(), cols.mu)?,
        &Series::new(cols.dates, lmin)?,
        cfg.lags,
    )?;
    let ends: Vec<usize> = window_ends(&design, cfg.regression_window)?.collect();
    let pool = pool()?;
    let fits = ordered_map(&pool, &ends, |&end| {
        fit_window(&design, end, cfg.regression_window)
    });

    let mut header = vec!["window_end".to_string()];
    header.extend((0..=cfg.lags).map(|j| format!("beta{j}")));
    header.extend(["se1", "t_beta1", "significant", "r_squared", "n_obs"].map(String::from));
    let mut t = Table::new(header);
    let mut rec = StageRecord::default();
    let mut significant = 0;
    for f in &fits {
        match f {
            WindowOutcome::Fitted(r) => {
                significant += r.significant as usize;
                let mut row = vec![r.window_end.to_string()];
                row.extend(r.beta.iter().map(|&b| fmt_f64(b)));
                row.extend([
                    fmt_f64(r.se[1]),
                    fmt_f64(r.t_beta1),
                    r.significant.to_string(),
                    fmt_f64(r.r_squared),
                    r.n_obs.to_string(),
                ]);
                t.push(row);
            }
            WindowOutcome::Skipped { window_end, error } => {
                rec.soft(format!("window ending {window_end} skipped: {error}"))
            }
        }
    }
    rec.metadata
        .insert("windows".into(), fits.len().to_string());
    rec.metadata
        .insert("significant".into(), significant.to_string());
    out.write(REGRESSION, &t.to_bytes())?;
    rec.outputs = vec![REGRESSION.into()];
    Ok((rec, Vec::new()))
}

fn garch_fit(cfg: &PipelineConfig, out: &OutDir) -> Result<StageOutput> {
    let cols = read_indicators(out)?;
    let mut rec = StageRecord::default();
    let mut series = vec![("r", cols.r), ("mu", cols.mu)];
    match cols.lambda_min {
        Some(l) => series.push(("lambda_min", l)),
        None => rec.soft(no_emerging().message),
    }
    let pool = pool()?;
    let fits = ordered_map(&pool, &series, |(name, x)| {
        fit_indicator_volatility(x, cfg.garch_transform, cfg.garch_fit()).map_err(|e| {
            let e = AppError::from(e);
            AppError::new(e.kind, format!("series {name}: {}", e.message))
        })
    });
    let offset = match cfg.garch_transform {
        SeriesTransform::Level => 0,
        SeriesTransform::Difference => 1,
    };
    let mut t = Table::new([
        "series_name",
        "alpha0",
        "alpha1",
        "beta1",
        "log_likelihood",
        "converged",
    ]);
    let mut paths = Table::new(["date", "series_name", "sigma"]);
    for ((name, _), fit) in series.iter().zip(fits) {
        let fit = fit?;
        if fit.boundary {
            rec.soft(format!(
                "series {name}: persistence {} at the stationarity boundary",
                fit.params.persistence()
            ));
        }
        if !fit.converged {
            rec.soft(format!(
                "series {name}: optimizer stopped after {} iterations",
                fit.iterations
            ));
        }
        t.push(vec![
            name.to_string(),
            fmt_f64(fit.params.alpha0()),
            fmt_f64(fit.alpha1()),
            fmt_f64(fit.beta1()),
            fmt_f64(fit.log_likelihood),
            fit.converged.to_string(),
        ]);
        for (d, s) in cols.dates[offset..].iter().zip(fit.sigma_path()) {
            paths.push(vec![d.to_string(), name.to_string(), fmt_f64(s)]);
        }
    }
    out.write(GARCH, &t.to_bytes())?;
    out.write(GARCH_PATHS, &paths.to_bytes())?;
    rec.outputs = vec![GARCH.into(), GARCH_PATHS.into()];
    Ok((rec, Vec::new()))
}

/// Stage record of a finished run, keyed by stage name.
pub fn stage_records(out: &OutDir) -> BTreeMap<String, StageRecord> {
    out.load_manifest().stages
}
