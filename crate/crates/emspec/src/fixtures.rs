//! Synthetic inputs: the bundled fixture panels and `simulate` outputs.

use emspec_core::garch::{garch_simulate, GarchParams};
use emspec_core::synth::{two_regime_panel, TwoRegimeSpec};

use crate::csvio::{fmt_f64, prices_to_csv, Table};
use crate::error::Result;

/// Panel generators exposed by `simulate --panel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PanelKind {
    /// 10 instruments, 300 price days, correlation 0.2 then 0.5
    Small,
    /// 100 instruments, 401 price days, correlation 0.1 then 0.7, one injected outlier epoch
    TwoRegime,
}

impl PanelKind {
    pub fn spec(self) -> TwoRegimeSpec {
        match self {
            PanelKind::Small => TwoRegimeSpec {
                instruments: 10,
                return_days: 299,
                rho_low: 0.2,
                rho_high: 0.5,
                switch_row: 150,
                injection: None,
                ..TwoRegimeSpec::default()
            },
            PanelKind::TwoRegime => TwoRegimeSpec::default(),
        }
    }

    /// Seed of the bundled file.
    pub fn bundled_seed(self) -> u64 {
        match self {
            PanelKind::Small => 11,
            PanelKind::TwoRegime => 3,
        }
    }
}

/// Wide price CSV of a generated panel.
pub fn panel_csv(kind: PanelKind, seed: u64) -> Result<Vec<u8>> {
    let p = two_regime_panel(&kind.spec(), seed)?;
    Ok(prices_to_csv(&p.prices))
}

/// `t,x` CSV of a simulated GARCH(1,1) series.
pub fn garch_csv(alpha0: f64, alpha1: f64, beta1: f64, len: usize, seed: u64) -> Result<Vec<u8>> {
    let params = GarchParams::garch11(alpha0, alpha1, beta1)?;
    let x = garch_simulate(&params, len, seed)?;
    let mut t = Table::new(["t", "x"]);
    for (i, v) in x.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*v)]);
    }
    Ok(t.to_bytes())
}
