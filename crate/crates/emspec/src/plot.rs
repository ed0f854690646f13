//! Static SVG figures drawn from the stage CSVs.

use std::fmt::Write as _;
use std::path::PathBuf;

use emspec_core::spectrum::marchenko_pastur;
use emspec_core::NaiveDate;

use crate::config::PipelineConfig;
use crate::csvio::Table;
use crate::error::{AppError, Result};
use crate::pipeline::{read_indicators, EIGENVALUES, GARCH_PATHS, OUTLIERS};
use crate::store::OutDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Indicators,
    Spectra,
    Outliers,
    Garch,
    All,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOptions {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Epoch shown by the spectra figure; defaults to the last one.
    pub date: Option<NaiveDate>,
    /// Overlay the Marchenko-Pastur density on the spectra histogram.
    pub mp: bool,
}

pub const PLOT_DIR: &str = "plots";

/// Writes the requested figures under `<out>/plots/` and returns their paths.
pub fn plot(cfg: &PipelineConfig, which: Which, opts: &PlotOptions) -> Result<Vec<PathBuf>> {
    let out = OutDir::new(&cfg.out_dir);
    let families = match which {
        Which::All => vec![
            Which::Indicators,
            Which::Spectra,
            Which::Outliers,
            Which::Garch,
        ],
        w => vec![w],
    };
    let mut written = Vec::new();
    for w in families {
        let (name, svg) = match w {
            Which::Indicators => ("indicators.svg", indicators_svg(&out, opts)?),
            Which::Spectra => ("spectra.svg", spectra_svg(&out, cfg, opts)?),
            Which::Outliers => ("outliers.svg", outliers_svg(&out, cfg, opts)?),
            Which::Garch => ("garch.svg", garch_svg(&out, opts)?),
            Which::All => unreachable!(),
        };
        let rel = format!("{PLOT_DIR}/{name}");
        out.write(&rel, svg.as_bytes())?;
        written.push(out.path(&rel));
    }
    Ok(written)
}

/// Row indices whose date lies in `[from, to]`; an empty selection is an error.
pub fn select_dates(dates: &[NaiveDate], opts: &PlotOptions) -> Result<Vec<usize>> {
    let keep: Vec<usize> = (0..dates.len())
        .filter(|&i| {
            opts.from.is_none_or(|f| dates[i] >= f) && opts.to.is_none_or(|t| dates[i] <= t)
        })
        .collect();
    if keep.is_empty() {
        let show = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_else(|| "..".into());
        return Err(AppError::usage(format!(
            "date range {} to {} selects no rows",
            show(opts.from),
            show(opts.to)
        )));
    }
    Ok(keep)
}

const W: f64 = 900.0;
const PANEL_H: f64 = 170.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 30.0;
const GAP: f64 = 45.0;

struct Svg {
    w: f64,
    h: f64,
    body: String,
}

impl Svg {
    fn new(w: f64, h: f64) -> Self {
        Self {
            w,
            h,
            body: String::new(),
        }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#
        );
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.w,
            h = self.h,
            body = self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Padded data range; a constant series gets a unit-width window.
fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn frame(&self, svg: &mut Svg, title: &str, xticks: &[(f64, String)]) {
        let _ = writeln!(
            svg.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            self.x0, self.y0, self.w, self.h
        );
        svg.text(self.x0, self.y0 - 8.0, "start", 13, title);
        for k in 0..=4 {
            let v = self.yr.0 + (self.yr.1 - self.yr.0) * k as f64 / 4.0;
            let y = self.py(v);
            svg.line(self.x0 - 4.0, y, self.x0, y, r#"stroke="black""#);
            svg.text(self.x0 - 6.0, y + 4.0, "end", 10, &tick(v));
        }
        for (x, label) in xticks {
            let x = self.px(*x);
            svg.line(
                x,
                self.y0 + self.h,
                x,
                self.y0 + self.h + 4.0,
                r#"stroke="black""#,
            );
            svg.text(x, self.y0 + self.h + 16.0, "middle", 10, label);
        }
    }

    fn polyline(&self, svg: &mut Svg, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            svg.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            coords.join(" ")
        );
    }

    fn hline(&self, svg: &mut Svg, y: f64, style: &str) {
        let y = self.py(y);
        svg.line(self.x0, y, self.x0 + self.w, y, style);
    }
}

fn date_ticks(dates: &[NaiveDate]) -> Vec<(f64, String)> {
    let n = dates.len();
    let k = n.min(5);
    (0..k)
        .map(|j| {
            let i = if k == 1 { 0 } else { j * (n - 1) / (k - 1) };
            (i as f64, dates[i].to_string())
        })
        .collect()
}

struct Track {
    name: String,
    ys: Vec<Option<f64>>,
    /// Values the y range must also cover.
    extend: Vec<f64>,
}

impl Track {
    fn new(name: impl Into<String>, ys: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            ys,
            extend: Vec::new(),
        }
    }
}

/// Stacked time-series panels sharing a date axis.
fn series_figure(
    dates: &[NaiveDate],
    series: &[Track],
    extra: impl Fn(&mut Svg, usize, &Panel),
) -> String {
    let h = TOP + series.len() as f64 * (PANEL_H + GAP) + 10.0;
    let mut svg = Svg::new(W, h);
    let xr = (0.0, (dates.len().max(2) - 1) as f64);
    let ticks = date_ticks(dates);
    for (k, Track { name, ys, extend }) in series.iter().enumerate() {
        let panel = Panel {
            x0: LEFT,
            y0: TOP + k as f64 * (PANEL_H + GAP),
            w: W - LEFT - 20.0,
            h: PANEL_H,
            xr,
            yr: span(ys.iter().flatten().chain(extend).copied()),
        };
        panel.frame(&mut svg, name, &ticks);
        let pts: Vec<(f64, f64)> = ys
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|y| (i as f64, y)))
            .collect();
        panel.polyline(&mut svg, &pts, "#1f4e9a");
        extra(&mut svg, k, &panel);
    }
    svg.finish()
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn indicators_svg(out: &OutDir, opts: &PlotOptions) -> Result<String> {
    let cols = read_indicators(out)?;
    let t = Table::read(&out.path(crate::pipeline::INDICATORS))?;
    let idx = select_dates(&cols.dates, opts)?;
    let some = |v: &[f64]| pick(v, &idx).into_iter().map(Some).collect::<Vec<_>>();
    let series = vec![
        Track::new("market return r(t)", some(&cols.r)),
        Track::new("mean correlation mu(t)", some(&cols.mu)),
        Track::new(
            "smallest emerging eigenvalue lambda_min(t)",
            pick(&t.floats("lambda_min")?, &idx),
        ),
        Track::new(
            "largest eigenvalue lambda_max(t)",
            pick(&t.floats("lambda_max")?, &idx),
        ),
    ];
    Ok(series_figure(
        &pick(&cols.dates, &idx),
        &series,
        |_, _, _| {},
    ))
}

fn outliers_svg(out: &OutDir, cfg: &PipelineConfig, opts: &PlotOptions) -> Result<String> {
    let t = Table::read(&out.require(OUTLIERS, "outliers")?)?;
    let dates = t.dates("end_date")?;
    if dates.is_empty() {
        let mut svg = Svg::new(W, 2.0 * TOP + PANEL_H);
        svg.text(
            W / 2.0,
            TOP + PANEL_H / 2.0,
            "middle",
            12,
            "no epoch had enough emerging eigenvalues to test",
        );
        return Ok(svg.finish());
    }
    let idx = select_dates(&dates, opts)?;
    let score = pick(&t.floats("neg_log10_p")?, &idx);
    let reject: Vec<bool> = pick(&t.strings("reject")?, &idx)
        .iter()
        .map(|s| s == "true")
        .collect();
    let threshold = threshold_line(cfg.level);
    let series = vec![Track {
        name: format!(
            "-log10 p (threshold {} at level {})",
            tick(threshold),
            cfg.level
        ),
        ys: score.clone(),
        extend: vec![0.0, threshold],
    }];
    Ok(series_figure(
        &pick(&dates, &idx),
        &series,
        |svg, _, panel| {
            panel.hline(
                svg,
                threshold,
                r##"stroke="#c0392b" stroke-dasharray="6,4""##,
            );
            for (i, (s, r)) in score.iter().zip(&reject).enumerate() {
                if let (Some(s), true) = (s, r) {
                    let _ = writeln!(
                        svg.body,
                        r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#c0392b"/>"##,
                        panel.px(i as f64),
                        panel.py(*s)
                    );
                }
            }
        },
    ))
}

/// `-log10(level)`.
pub fn threshold_line(level: f64) -> f64 {
    -level.log10()
}

fn garch_svg(out: &OutDir, opts: &PlotOptions) -> Result<String> {
    let t = Table::read(&out.require(GARCH_PATHS, "garch-fit")?)?;
    let dates = t.dates("date")?;
    let names = t.strings("series_name")?;
    let sigma = t.floats("sigma")?;
    let mut order: Vec<String> = Vec::new();
    for n in &names {
        if !order.contains(n) {
            order.push(n.clone());
        }
    }
    // all series share the date axis of the first one
    let axis: Vec<NaiveDate> = dates
        .iter()
        .zip(&names)
        .filter(|(_, n)| **n == order[0])
        .map(|(d, _)| *d)
        .collect();
    let idx = select_dates(&axis, opts)?;
    let keep: std::collections::BTreeSet<NaiveDate> = idx.iter().map(|&i| axis[i]).collect();
    let series: Vec<Track> = order
        .iter()
        .map(|name| {
            let ys = dates
                .iter()
                .zip(&names)
                .zip(&sigma)
                .filter(|((d, n), _)| *n == name && keep.contains(d))
                .map(|(_, s)| *s)
                .collect();
            Track::new(format!("conditional volatility sigma_t of {name}"), ys)
        })
        .collect();
    Ok(series_figure(&pick(&axis, &idx), &series, |_, _, _| {}))
}

fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as isize;
        counts[b.clamp(0, bins as isize - 1) as usize] += 1;
    }
    counts
}

fn spectra_svg(out: &OutDir, cfg: &PipelineConfig, opts: &PlotOptions) -> Result<String> {
    let t = Table::read(&out.require(EIGENVALUES, "indicators")?)?;
    let dates = t.dates("end_date")?;
    let parts = t.strings("part")?;
    let values = t.floats("eigenvalue")?;
    let date = match opts.date {
        Some(d) => d,
        None => *dates
            .last()
            .ok_or_else(|| AppError::input("eigenvalues.csv has no rows"))?,
    };
    let rows: Vec<usize> = (0..dates.len()).filter(|&i| dates[i] == date).collect();
    if rows.is_empty() {
        return Err(AppError::usage(format!("no epoch ends on {date}")));
    }
    let of = |part: &str| -> Vec<f64> {
        rows.iter()
            .filter(|&&i| parts[i] == part)
            .filter_map(|&i| values[i])
            .collect()
    };
    let normal = of("normal");
    let emerging = of("emerging");
    let n = (normal.len() + emerging.len()) as f64;

    let pw = (W - 2.0 * LEFT - 20.0) / 2.0;
    let mut svg = Svg::new(W, TOP + PANEL_H * 1.6 + 40.0);
    svg.text(
        W / 2.0,
        18.0,
        "middle",
        14,
        &format!("epoch ending {date}, N = {n}, M = {}", cfg.epoch_len),
    );

    // normal spectrum as a density over all N eigenvalues
    let (lo, hi) = span(normal.iter().copied().chain([0.0]));
    let bins = ((normal.len() as f64).sqrt().ceil() as usize * 2).clamp(5, 40);
    let width = (hi - lo) / bins as f64;
    let dens: Vec<f64> = histogram(&normal, bins, lo, hi)
        .iter()
        .map(|&c| c as f64 / (n * width))
        .collect();
    let mp = if opts.mp {
        Some(marchenko_pastur(cfg.epoch_len as f64 / n, 1.0)?)
    } else {
        None
    };
    let curve: Vec<(f64, f64)> = mp
        .map(|mp| {
            (0..=400)
                .map(|k| lo + (hi - lo) * k as f64 / 400.0)
                .map(|x| (x, mp.density(x)))
                .collect()
        })
        .unwrap_or_default();
    let ytop = dens
        .iter()
        .copied()
        .chain(curve.iter().map(|p| p.1))
        .fold(0.0, f64::max);
    let left = Panel {
        x0: LEFT,
        y0: TOP + 20.0,
        w: pw,
        h: PANEL_H * 1.5,
        xr: (lo, hi),
        yr: (0.0, if ytop > 0.0 { ytop * 1.05 } else { 1.0 }),
    };
    let xt = |lo: f64, hi: f64| {
        (0..=3)
            .map(|k| lo + (hi - lo) * k as f64 / 3.0)
            .map(|v| (v, tick(v)))
            .collect::<Vec<_>>()
    };
    left.frame(&mut svg, "normal spectrum (density)", &xt(lo, hi));
    draw_bars(&mut svg, &left, lo, width, &dens, "#7f9cc9");
    if mp.is_some() {
        left.polyline(&mut svg, &curve, "#c0392b");
        svg.text(
            left.x0 + left.w - 4.0,
            left.y0 + 14.0,
            "end",
            10,
            "Marchenko-Pastur",
        );
    }

    let right = |yr: (f64, f64), xr: (f64, f64)| Panel {
        x0: 2.0 * LEFT + pw,
        y0: TOP + 20.0,
        w: pw,
        h: PANEL_H * 1.5,
        xr,
        yr,
    };
    if emerging.is_empty() {
        let p = right((0.0, 1.0), (0.0, 1.0));
        p.frame(&mut svg, "emerging spectrum", &[]);
        svg.text(
            p.x0 + p.w / 2.0,
            p.y0 + p.h / 2.0,
            "middle",
            12,
            "no emerging spectrum (M >= N)",
        );
    } else {
        let (elo, ehi) = span(emerging.iter().copied());
        let ebins = ((emerging.len() as f64).sqrt().ceil() as usize * 2).clamp(5, 40);
        let ew = (ehi - elo) / ebins as f64;
        let counts: Vec<f64> = histogram(&emerging, ebins, elo, ehi)
            .iter()
            .map(|&c| c as f64)
            .collect();
        let p = right(
            (0.0, counts.iter().fold(1.0, |a, &b| f64::max(a, b)) * 1.05),
            (elo, ehi),
        );
        p.frame(&mut svg, "emerging spectrum (counts)", &xt(elo, ehi));
        draw_bars(&mut svg, &p, elo, ew, &counts, "#e08e45");
    }
    Ok(svg.finish())
}

fn draw_bars(svg: &mut Svg, p: &Panel, lo: f64, width: f64, heights: &[f64], color: &str) {
    for (b, &h) in heights.iter().enumerate() {
        if h <= 0.0 {
            continue;
        }
        let x = p.px(lo + b as f64 * width);
        let x2 = p.px(lo + (b + 1) as f64 * width);
        let y = p.py(h);
        let _ = writeln!(
            svg.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}" stroke="white"/>"#,
            x2 - x,
            p.py(0.0) - y
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_at_default_level() {
        assert!((threshold_line(0.001) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_range_is_an_error() {
        let d = |m, day| NaiveDate::from_ymd_opt(2010, m, day).unwrap();
        let dates = [d(1, 4), d(1, 5), d(1, 6)];
        let opts = PlotOptions {
            from: Some(d(2, 1)),
            ..PlotOptions::default()
        };
        assert!(select_dates(&dates, &opts).is_err());
        let opts = PlotOptions {
            from: Some(d(1, 5)),
            to: Some(d(1, 5)),
            ..PlotOptions::default()
        };
        assert_eq!(select_dates(&dates, &opts).unwrap(), vec![1]);
    }
}
