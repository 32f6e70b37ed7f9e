//! Session loading: a session file, device logs to align, or a simulation.

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use cellsync::ingest::{
    align, parse_log, read_session_file, AlignOptions, DeviceStream, ParseOptions, Schema, Session,
    SESSION_MAGIC,
};
use cellsync::simulator::{simulate, GroundTruth, SimConfig};
use clap::Args;
use serde_json::{json, Value};

use crate::failure::Failure;

#[derive(Args)]
pub struct InputArgs {
    /// Session file, device log files, or directories of *.csv device logs.
    #[arg(long, short, num_args = 1.., required_unless_present = "sim_config", conflicts_with = "sim_config")]
    pub input: Vec<PathBuf>,
    /// Simulator TOML configuration to analyze instead of recorded data.
    #[arg(long)]
    pub sim_config: Option<PathBuf>,
    /// Simulator seed [default: the seed in the configuration]
    #[arg(long, requires = "sim_config")]
    pub seed: Option<u64>,
    /// Column schema for device logs; inferred from the header when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Collect malformed log lines instead of failing on the first one.
    #[arg(long)]
    pub lenient: bool,
    /// Backward timestamp jumps up to this many seconds skip the line.
    #[arg(long, default_value_t = 0.0)]
    pub monotonic_tolerance: f64,
    /// Maximum record-to-tick distance in seconds when aligning devices.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance: f64,
    /// Tick spacing in seconds [default: median record spacing]
    #[arg(long)]
    pub period: Option<f64>,
    /// Interpolate interior ticks that a device missed.
    #[arg(long)]
    pub interpolate: bool,
}

pub struct Loaded {
    pub session: Session,
    pub truth: Option<GroundTruth>,
    /// Description of where the session came from, for the run record.
    pub source: Value,
}

impl Loaded {
    pub fn simulated(&self) -> bool {
        self.truth.is_some()
            || self
                .session
                .provenance
                .sources
                .iter()
                .any(|s| s.starts_with("simulator"))
    }
}

pub fn read_sim_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(SimConfig::from_toml(&text)
        .map_err(|e| Failure::from(e).context(path.display().to_string()))?)
}

pub fn load(args: &InputArgs) -> Result<Loaded, Failure> {
    if let Some(path) = &args.sim_config {
        let cfg = read_sim_config(path)?;
        let seed = args.seed.unwrap_or(cfg.seed);
        let (session, truth) = simulate(&cfg, seed)?;
        return Ok(Loaded {
            session,
            truth: Some(truth),
            source: json!({"kind": "simulation", "config": path, "seed": seed}),
        });
    }

    let files = collect_files(&args.input)?;
    let sessions: Vec<bool> = files
        .iter()
        .map(|f| is_session_file(f))
        .collect::<Result<_, _>>()?;
    match (files.len(), sessions.iter().filter(|&&s| s).count()) {
        (1, 1) => {
            let session = read_session_file(&files[0])
                .map_err(|e| Failure::from(e).context(files[0].display().to_string()))?;
            return Ok(Loaded {
                session,
                truth: None,
                source: json!({"kind": "session", "file": files[0]}),
            });
        }
        (_, 0) => {}
        _ => {
            return Err(Failure::input(
                "session files cannot be combined with other inputs",
            ))
        }
    }

    let schema = match &args.schema {
        Some(p) => Some(
            Schema::from_file(p).map_err(|e| Failure::from(e).context(p.display().to_string()))?,
        ),
        None => None,
    };
    let mut streams = Vec::with_capacity(files.len());
    let mut described = Vec::with_capacity(files.len());
    for path in &files {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let file = File::open(path)
            .map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))?;
        let opts = ParseOptions {
            monotonic_tolerance: args.monotonic_tolerance,
            strict: !args.lenient,
            device_id: Some(id.clone()),
        };
        let log = parse_log(BufReader::new(file), schema.as_ref(), &opts)
            .map_err(|e| Failure::from(e).context(path.display().to_string()))?;
        if !log.rejected.is_empty() {
            log::warn!(
                "{}: {} malformed lines skipped",
                path.display(),
                log.rejected.len()
            );
        }
        described.push(json!({
            "file": path,
            "device": id,
            "records": log.records.len(),
            "rejected_lines": log.rejected.len(),
        }));
        streams.push(DeviceStream::from_log(id, log));
    }
    let opts = AlignOptions {
        tolerance: args.tolerance,
        sample_period: args.period,
        interpolate: args.interpolate,
    };
    let (session, _) = align(&streams, &opts)?;
    Ok(Loaded {
        session,
        truth: None,
        source: json!({"kind": "device_logs", "devices": described}),
    })
}

fn collect_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        let meta = fs::metadata(p)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", p.display())))?;
        if meta.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Failure::input(format!("cannot list {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file() && f.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"))
                })
                .collect();
            if found.is_empty() {
                return Err(Failure::input(format!("no *.csv logs in {}", p.display())));
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Failure::input("no input files"));
    }
    Ok(files)
}

fn is_session_file(path: &Path) -> Result<bool, Failure> {
    let file = File::open(path)
        .map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(first.trim_end() == SESSION_MAGIC)
}
