use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use emspec_core::NaiveDate;

use crate::config::{Overrides, PipelineConfig};
use crate::error::{AppError, Result};
use crate::fixtures::{self, PanelKind};
use crate::pipeline::{run_all, run_stage, Stage};
use crate::plot::{self, PlotOptions, Which};
use crate::store::{write_atomic, StageRecord};

#[derive(Debug, Parser)]
#[command(
    name = "emspec",
    version,
    about = "Emerging-spectrum market instability indicators"
)]
pub struct Cli {
    /// Config file of `key = value` lines; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage from the price file to the GARCH fits
    Run(Overrides),
    /// Parse and align price files
    Ingest(Overrides),
    /// Rolling correlations, power map, spectra and indicator series
    Indicators(Overrides),
    /// Silverman mode test on each epoch's emerging spectrum
    Outliers(Overrides),
    /// Rolling lagged regression of mu on lambda_min
    Regress(Overrides),
    /// GARCH(1,1) fits of r, mu and lambda_min
    GarchFit(Overrides),
    /// Draw SVG figures from the stage outputs
    Plot(PlotArgs),
    /// Write a simulated GARCH series or a synthetic price panel
    Simulate(SimulateArgs),
}

#[derive(Debug, clap::Args)]
pub struct PlotArgs {
    #[arg(value_enum, default_value = "all")]
    pub which: Which,
    /// First date shown
    #[arg(long, value_parser = parse_date)]
    pub from: Option<NaiveDate>,
    /// Last date shown
    #[arg(long, value_parser = parse_date)]
    pub to: Option<NaiveDate>,
    /// Epoch end date of the spectra figure
    #[arg(long, value_parser = parse_date)]
    pub date: Option<NaiveDate>,
    /// Overlay the Marchenko-Pastur density
    #[arg(long)]
    pub mp: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, clap::Args)]
#[command(group = clap::ArgGroup::new("what").required(true).args(["garch", "panel"]))]
pub struct SimulateArgs {
    /// GARCH(1,1) parameters
    #[arg(long, num_args = 3, value_names = ["A0", "A1", "B1"], allow_negative_numbers = true)]
    pub garch: Option<Vec<f64>>,
    /// Series length
    #[arg(long, default_value_t = 1000)]
    pub len: usize,
    /// Synthetic price panel
    #[arg(long, value_enum)]
    pub panel: Option<PanelKind>,
    /// Generator seed
    #[arg(long)]
    pub seed: u64,
    /// Output file; standard output if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    crate::csvio::parse_date(s).ok_or_else(|| format!("expected YYYY-MM-DD, got `{s}`"))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn report(stage: &str, rec: &StageRecord) {
    println!(
        "{stage}: wrote {} ({:.0} ms)",
        rec.outputs.join(", "),
        rec.wall_ms
    );
}

pub fn execute(cli: Cli) -> Result<()> {
    let resolve = |o: &Overrides| PipelineConfig::resolve(cli.config.as_deref(), o);
    let stage = |s: Stage, o: &Overrides| -> Result<()> {
        let rec = run_stage(s, &resolve(o)?)?;
        report(s.name(), &rec);
        Ok(())
    };
    match &cli.command {
        Command::Run(o) => {
            let cfg = resolve(o)?;
            for (s, rec) in Stage::ALL.iter().zip(run_all(&cfg)?) {
                report(s.name(), &rec);
            }
            Ok(())
        }
        Command::Ingest(o) => stage(Stage::Ingest, o),
        Command::Indicators(o) => stage(Stage::Indicators, o),
        Command::Outliers(o) => stage(Stage::Outliers, o),
        Command::Regress(o) => stage(Stage::Regress, o),
        Command::GarchFit(o) => stage(Stage::GarchFit, o),
        Command::Plot(a) => {
            let cfg = resolve(&a.overrides)?;
            let opts = PlotOptions {
                from: a.from,
                to: a.to,
                date: a.date,
                mp: a.mp,
            };
            for p in plot::plot(&cfg, a.which, &opts).map_err(|e| e.in_stage("plot"))? {
                println!("plot: wrote {}", p.display());
            }
            Ok(())
        }
        Command::Simulate(a) => simulate(a).map_err(|e| e.in_stage("simulate")),
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let bytes = match (&a.garch, a.panel) {
        (Some(g), None) => fixtures::garch_csv(g[0], g[1], g[2], a.len, a.seed)?,
        (None, Some(kind)) => fixtures::panel_csv(kind, a.seed)?,
        _ => return Err(AppError::usage("pass exactly one of --garch or --panel")),
    };
    match &a.out {
        Some(p) => write_atomic(p, &bytes),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| AppError::input(format!("stdout: {e}"))),
    }
}
