//! Analysis configuration from flags and an optional TOML file.
//!
//! Flags override the built-in defaults and keys present in the file
//! override flags.

use std::fs;
use std::path::PathBuf;

use cellsync::metrics::LPairMode;
use cellsync::pipeline::{AnalysisConfig, DetrendScope};
use clap::{Args, ValueEnum};
use serde_json::Value;

use crate::failure::Failure;

#[derive(Clone, Copy, ValueEnum)]
pub enum Scope {
    Frame,
    Session,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Abs,
    Signed,
}

/// Detrending, filtering and framing.
#[derive(Args)]
pub struct PrepArgs {
    /// Polynomial detrend order (1..=12) [default: 10]
    #[arg(long)]
    pub order: Option<usize>,
    /// Fit one trend per frame or one per channel over the whole session [default: frame]
    #[arg(long, value_enum)]
    pub scope: Option<Scope>,
    /// Low-pass cutoff as a fraction of Nyquist [default: 0.1]
    #[arg(long, conflicts_with = "no_filter")]
    pub lowpass: Option<f64>,
    /// Butterworth order [default: 2]
    #[arg(long, conflicts_with = "no_filter")]
    pub filter_order: Option<usize>,
    /// Skip low-pass filtering.
    #[arg(long)]
    pub no_filter: bool,
    /// Samples per analysis frame, 0 for a single frame [default: 2000]
    #[arg(long)]
    pub frame: Option<usize>,
    /// Hours discarded at the start of the session [default: 24, or 0 for simulated sessions]
    #[arg(long)]
    pub skip_hours: Option<f64>,
    /// Do not mask self-oscillating stretches.
    #[arg(long)]
    pub no_reject: bool,
    /// TOML analysis configuration; its keys override flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Correlation and event detection.
#[derive(Args)]
pub struct DetectFlags {
    /// Rolling correlation window in samples [default: 100]
    #[arg(long)]
    pub window: Option<usize>,
    /// Correlation threshold z in (0, 1) [default: 0.7]
    #[arg(long)]
    pub z: Option<f64>,
    /// Pair-fraction level that triggers detection [default: 0.9]
    #[arg(long)]
    pub l_thresh: Option<f64>,
    /// Runs closer than this many samples are merged [default: 50]
    #[arg(long)]
    pub min_gap: Option<usize>,
    /// Events shorter than this are flagged low-confidence [default: 30]
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Pair-fraction mode used for detection [default: abs]
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Skip impedance/temperature group correlations.
    #[arg(long)]
    pub no_groups: bool,
}

pub struct Resolved {
    pub config: AnalysisConfig,
    /// Whether the initial skip was chosen by the user rather than defaulted.
    pub skip_explicit: bool,
}

pub fn resolve(prep: &PrepArgs, detect: Option<&DetectFlags>) -> Result<Resolved, Failure> {
    let mut cfg = AnalysisConfig::default();
    if let Some(o) = prep.order {
        cfg.detrend_order = o;
    }
    if let Some(s) = prep.scope {
        cfg.detrend_scope = match s {
            Scope::Frame => DetrendScope::Frame,
            Scope::Session => DetrendScope::Session,
        };
    }
    if prep.no_filter {
        cfg.lowpass = None;
    } else if let Some(lp) = cfg.lowpass.as_mut() {
        if let Some(c) = prep.lowpass {
            lp.cutoff = c;
        }
        if let Some(o) = prep.filter_order {
            lp.order = o;
        }
    }
    if let Some(f) = prep.frame {
        cfg.frame_len = f;
    }
    if let Some(h) = prep.skip_hours {
        cfg.skip_hours = h;
    }
    if prep.no_reject {
        cfg.rejection = None;
    }
    if let Some(d) = detect {
        if let Some(w) = d.window {
            cfg.window = w;
        }
        if let Some(z) = d.z {
            cfg.z = z;
        }
        if let Some(l) = d.l_thresh {
            cfg.detect.l_thresh = l;
        }
        if let Some(g) = d.min_gap {
            cfg.detect.min_gap = g;
        }
        if let Some(m) = d.min_len {
            cfg.detect.min_len = m;
        }
        if let Some(m) = d.mode {
            cfg.detect.mode = match m {
                Mode::Abs => LPairMode::Absolute,
                Mode::Signed => LPairMode::Signed,
            };
        }
        if d.no_groups {
            cfg.groups = false;
        }
    }

    let mut skip_explicit = prep.skip_hours.is_some();
    if let Some(path) = &prep.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        skip_explicit |= table.contains_key("skip_hours");
        let mut base = serde_json::to_value(&cfg).map_err(Failure::other)?;
        merge(
            &mut base,
            serde_json::to_value(table).map_err(Failure::other)?,
        );
        cfg = serde_json::from_value(base)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    }
    cfg.validate()?;
    Ok(Resolved {
        config: cfg,
        skip_explicit,
    })
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if !slot.is_null() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
