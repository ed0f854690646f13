//! Flat `key = value` pipeline configuration.
//!
//! Values resolve in three layers: built-in defaults, then a config file, then
//! command-line flags. Relative paths in a config file are taken relative to
//! the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use emspec_core::corr::{DegeneratePolicy, EpochSpec};
use emspec_core::garch::{GarchFitConfig, SeriesTransform};
use emspec_core::modetest::SilvermanConfig;
use emspec_core::panel::AlignPolicy;
use emspec_core::spectrum::PowerMapParams;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub prices_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub sectors_path: Option<PathBuf>,
    pub epoch_len: usize,
    pub shift: usize,
    pub epsilon: f64,
    pub lags: usize,
    pub regression_window: usize,
    pub bootstrap: usize,
    pub level: f64,
    /// Required by the outlier stage.
    pub seed: Option<u64>,
    pub align: AlignPolicy,
    pub degenerate: DegeneratePolicy,
    pub garch_transform: SeriesTransform,
    pub out_dir: PathBuf,
    pub dump_matrices: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            prices_path: None,
            index_path: None,
            sectors_path: None,
            epoch_len: 20,
            shift: 1,
            epsilon: emspec_core::spectrum::DEFAULT_EPSILON,
            lags: emspec_core::lagreg::DEFAULT_LAGS,
            regression_window: emspec_core::lagreg::DEFAULT_WINDOW,
            bootstrap: emspec_core::modetest::DEFAULT_BOOTSTRAP,
            level: emspec_core::modetest::DEFAULT_LEVEL,
            seed: None,
            align: AlignPolicy::IntersectDates,
            degenerate: DegeneratePolicy::Error,
            garch_transform: SeriesTransform::Level,
            out_dir: PathBuf::from("emspec-out"),
            dump_matrices: false,
        }
    }
}

/// Command-line layer: every field optional.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct Overrides {
    /// Price file (wide `date,T1,...` or long `date,ticker,adj_close`)
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Index price file; without it r(t) is the equal-weighted constituent mean
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Optional `ticker,sector` file
    #[arg(long)]
    pub sectors: Option<PathBuf>,
    /// Epoch length M in return rows
    #[arg(long = "epoch")]
    pub epoch_len: Option<usize>,
    /// Shift between epochs in rows
    #[arg(long)]
    pub shift: Option<usize>,
    /// Power-map exponent offset
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of lags p
    #[arg(long)]
    pub lags: Option<usize>,
    /// Rolling regression window W
    #[arg(long)]
    pub window: Option<usize>,
    /// Bootstrap resamples per epoch
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Significance level of the mode test
    #[arg(long)]
    pub level: Option<f64>,
    /// Bootstrap seed; required by `outliers` and `run`
    #[arg(long)]
    pub seed: Option<u64>,
    /// `intersect` or `ffill:N`
    #[arg(long, value_parser = parse_align)]
    pub align: Option<AlignPolicy>,
    /// `error` or `drop`
    #[arg(long, value_parser = parse_degenerate)]
    pub degenerate: Option<DegeneratePolicy>,
    /// GARCH input: `level` or `diff`
    #[arg(long, value_parser = parse_transform)]
    pub transform: Option<SeriesTransform>,
    /// Output directory
    #[arg(long = "out")]
    pub out_dir: Option<PathBuf>,
    /// Also write matrices.bin
    #[arg(long)]
    pub dump_matrices: bool,
}

const KEYS: &[&str] = &[
    "prices",
    "index",
    "sectors",
    "epoch_len",
    "shift",
    "epsilon",
    "lags",
    "window",
    "bootstrap",
    "level",
    "seed",
    "align",
    "degenerate",
    "garch_transform",
    "out_dir",
    "dump_matrices",
];

impl PipelineConfig {
    /// Defaults, then `file` if given, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            cfg.apply_text(&text, path.parent())
                .map_err(|e| AppError::usage(format!("{}: {}", path.display(), e.message)))?;
        }
        cfg.apply_overrides(overrides);
        Ok(cfg)
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, base: Option<&Path>) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::usage(format!("line {}: expected key = value", no + 1)))?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|e| AppError::usage(format!("line {}: {}", no + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, base)?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        match key {
            "prices" => self.prices_path = Some(path(value)),
            "index" => self.index_path = Some(path(value)),
            "sectors" => self.sectors_path = Some(path(value)),
            "epoch_len" => self.epoch_len = number(key, value)?,
            "shift" => self.shift = number(key, value)?,
            "epsilon" => self.epsilon = number(key, value)?,
            "lags" => self.lags = number(key, value)?,
            "window" => self.regression_window = number(key, value)?,
            "bootstrap" => self.bootstrap = number(key, value)?,
            "level" => self.level = number(key, value)?,
            "seed" => self.seed = Some(number(key, value)?),
            "align" => self.align = parse_align(value).map_err(AppError::usage)?,
            "degenerate" => self.degenerate = parse_degenerate(value).map_err(AppError::usage)?,
            "garch_transform" => {
                self.garch_transform = parse_transform(value).map_err(AppError::usage)?
            }
            "out_dir" => self.out_dir = path(value),
            "dump_matrices" => {
                self.dump_matrices = value.parse().map_err(|_| {
                    AppError::usage(format!(
                        "dump_matrices: expected true or false, got `{value}`"
                    ))
                })?
            }
            other => {
                return Err(AppError::usage(format!(
                    "unknown key `{other}` (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($src:ident => $dst:ident),*) => {
                $(if let Some(v) = &o.$src { self.$dst = v.clone(); })*
            };
        }
        take!(epoch_len => epoch_len, shift => shift, epsilon => epsilon, lags => lags,
              window => regression_window, bootstrap => bootstrap, level => level,
              align => align, degenerate => degenerate, transform => garch_transform,
              out_dir => out_dir);
        if o.prices.is_some() {
            self.prices_path = o.prices.clone();
        }
        if o.index.is_some() {
            self.index_path = o.index.clone();
        }
        if o.sectors.is_some() {
            self.sectors_path = o.sectors.clone();
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        self.dump_matrices |= o.dump_matrices;
    }

    /// Every set field as ordered `(key, value)` pairs.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        for (k, p) in [
            ("prices", &self.prices_path),
            ("index", &self.index_path),
            ("sectors", &self.sectors_path),
        ] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put("epoch_len", self.epoch_len.to_string());
        put("shift", self.shift.to_string());
        put("epsilon", self.epsilon.to_string());
        put("lags", self.lags.to_string());
        put("window", self.regression_window.to_string());
        put("bootstrap", self.bootstrap.to_string());
        put("level", self.level.to_string());
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        put("align", align_str(self.align));
        put("degenerate", degenerate_str(self.degenerate).into());
        put(
            "garch_transform",
            transform_str(self.garch_transform).into(),
        );
        put("out_dir", self.out_dir.display().to_string());
        put("dump_matrices", self.dump_matrices.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn epoch_spec(&self) -> Result<EpochSpec> {
        Ok(EpochSpec::new(self.epoch_len, self.shift)?)
    }

    pub fn power_map(&self) -> Result<PowerMapParams> {
        Ok(PowerMapParams::new(self.epsilon)?)
    }

    pub fn silverman(&self) -> Result<SilvermanConfig> {
        Ok(SilvermanConfig::new(self.bootstrap, self.level)?)
    }

    pub fn garch_fit(&self) -> GarchFitConfig {
        GarchFitConfig::default()
    }

    pub fn require_seed(&self, stage: &str) -> Result<u64> {
        self.seed.ok_or_else(|| {
            AppError::usage(format!(
                "{stage} needs a seed: pass --seed or set `seed` in the config file"
            ))
        })
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AppError::usage(format!("{key}: cannot parse `{value}`")))
}

pub fn parse_align(s: &str) -> std::result::Result<AlignPolicy, String> {
    match s {
        "intersect" => Ok(AlignPolicy::IntersectDates),
        _ => s
            .strip_prefix("ffill:")
            .and_then(|n| n.parse().ok())
            .map(|max_gap| AlignPolicy::ForwardFill { max_gap })
            .ok_or_else(|| format!("align: expected `intersect` or `ffill:N`, got `{s}`")),
    }
}

pub fn align_str(p: AlignPolicy) -> String {
    match p {
        AlignPolicy::IntersectDates => "intersect".into(),
        AlignPolicy::ForwardFill { max_gap } => format!("ffill:{max_gap}"),
    }
}

pub fn parse_degenerate(s: &str) -> std::result::Result<DegeneratePolicy, String> {
    match s {
        "error" => Ok(DegeneratePolicy::Error),
        "drop" => Ok(DegeneratePolicy::Drop),
        _ => Err(format!("degenerate: expected `error` or `drop`, got `{s}`")),
    }
}

fn degenerate_str(p: DegeneratePolicy) -> &'static str {
    match p {
        DegeneratePolicy::Error => "error",
        DegeneratePolicy::Drop => "drop",
    }
}

pub fn parse_transform(s: &str) -> std::result::Result<SeriesTransform, String> {
    match s {
        "level" => Ok(SeriesTransform::Level),
        "diff" => Ok(SeriesTransform::Difference),
        _ => Err(format!("transform: expected `level` or `diff`, got `{s}`")),
    }
}

fn transform_str(t: SeriesTransform) -> &'static str {
    match t {
        SeriesTransform::Level => "level",
        SeriesTransform::Difference => "diff",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = PipelineConfig {
            prices_path: Some("/data/p.csv".into()),
            index_path: Some("/data/i.csv".into()),
            sectors_path: None,
            epoch_len: 30,
            shift: 5,
            epsilon: 0.015,
            lags: 2,
            regression_window: 200,
            bootstrap: 300,
            level: 0.01,
            seed: Some(99),
            align: AlignPolicy::ForwardFill { max_gap: 4 },
            degenerate: DegeneratePolicy::Drop,
            garch_transform: SeriesTransform::Difference,
            out_dir: "/tmp/o".into(),
            dump_matrices: true,
        };
        assert_eq!(
            PipelineConfig::from_text(&cfg.to_text(), None).unwrap(),
            cfg
        );
        let d = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_text(&d.to_text(), None).unwrap(), d);
    }

    #[test]
    fn bad_lines_name_the_line() {
        let e = PipelineConfig::from_text("epoch_len = 20\nbogus = 1\n", None).unwrap_err();
        assert!(e.message.contains("line 2"), "{e}");
        let e = PipelineConfig::from_text("# c\nshift 3", None).unwrap_err();
        assert!(e.message.contains("line 2"), "{e}");
        let e = PipelineConfig::from_text("align = ffill", None).unwrap_err();
        assert!(e.message.contains("ffill:N"), "{e}");
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let cfg = PipelineConfig::from_text(
            "prices = p.csv\nindex = /abs/i.csv",
            Some(Path::new("/etc/x")),
        )
        .unwrap();
        assert_eq!(cfg.prices_path.unwrap(), PathBuf::from("/etc/x/p.csv"));
        assert_eq!(cfg.index_path.unwrap(), PathBuf::from("/abs/i.csv"));
    }
}
