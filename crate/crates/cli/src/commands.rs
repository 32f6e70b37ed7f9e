use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use cellsync::detrend::FitReport;
use cellsync::ingest::write_session;
use cellsync::metrics::{scan_window, Phase, RateReport, ScanResult, SyncEvent};
use cellsync::pipeline::{analyze, prepare, trimmed, AnalysisConfig, AnalysisResult, MaskedSpan};
use cellsync::report::{
    compare_rates, read_events_json, read_rates_csv, write_comparison_csv, write_events_csv,
    write_events_json, write_groups_csv, write_json, write_metrics_csv, write_pairs_csv,
    write_rates_csv, write_scan_csv,
};
use cellsync::simulator::{self, SimConfig};
use cellsync::synccorr::rolling_correlations;
use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{resolve, DetectFlags, PrepArgs};
use crate::failure::Failure;
use crate::input::{load, read_sim_config, InputArgs, Loaded};
use crate::outputs::Outputs;

#[derive(Args)]
pub struct SimulateArgs {
    /// Simulator TOML configuration [default: built-in defaults]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed [default: the seed in the configuration]
    #[arg(long)]
    seed: Option<u64>,
    /// Session file to write.
    #[arg(long, short)]
    out: PathBuf,
    /// Ground truth JSON to write.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
pub struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prep: PrepArgs,
    #[command(flatten)]
    detect: DetectFlags,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Also write every pair coefficient, one pairs_<frame start>.csv per frame.
    #[arg(long)]
    dump_pairs: bool,
    /// Also write the fitted trend coefficients to fits.json.
    #[arg(long)]
    dump_fits: bool,
}

#[derive(Args)]
pub struct ScanArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prep: PrepArgs,
    #[arg(long, default_value_t = 70)]
    scan_min: usize,
    #[arg(long, default_value_t = 200)]
    scan_max: usize,
    #[arg(long, default_value_t = 10)]
    scan_step: usize,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Run directory or rates.csv of the numerator run.
    a: PathBuf,
    /// Run directory or rates.csv of the denominator run.
    b: PathBuf,
    /// Write the comparison as CSV.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory written by `detect`.
    run: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = match &args.config {
        Some(p) => read_sim_config(p)?,
        None => SimConfig::default(),
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let (session, truth) = simulator::simulate(&cfg, seed)?;
    let mut out = Outputs::loose();
    out.write(&args.out, |w| Ok(write_session(&session, w)?))?;
    if let Some(t) = &args.truth {
        out.write(t, |w| Ok(write_json(&truth, w)?))?;
    }
    out.commit();
    println!(
        "{} samples, {} cells, {} injected events -> {}",
        session.n_samples(),
        cfg.n_cells,
        truth.events.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitSummary<'a> {
    channel: &'a str,
    frame_start: usize,
    report: Option<FitReport>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'static str,
    version: &'static str,
    input: &'a Value,
    config: &'a AnalysisConfig,
    n_samples: usize,
    skipped_samples: usize,
    sample_period: f64,
    channels: &'a [String],
    temperature_channels: &'a [String],
    frames: &'a [(usize, usize)],
    n_events: usize,
    fits: Vec<FitSummary<'a>>,
    masked: &'a [MaskedSpan],
}

fn run_record<'a>(
    loaded: &'a Loaded,
    cfg: &'a AnalysisConfig,
    r: &'a AnalysisResult,
) -> RunRecord<'a> {
    RunRecord {
        command: "detect",
        version: env!("CARGO_PKG_VERSION"),
        input: &loaded.source,
        config: cfg,
        n_samples: r.n_samples,
        skipped_samples: r.skipped_samples,
        sample_period: r.sample_period,
        channels: &r.channels,
        temperature_channels: &r.temperature_channels,
        frames: &r.frames,
        n_events: r.events.len(),
        fits: r
            .fits
            .iter()
            .map(|f| FitSummary {
                channel: &f.channel,
                frame_start: f.frame_start,
                report: f.report,
            })
            .collect(),
        masked: &r.masked,
    }
}

fn metadata(started: SystemTime, elapsed: f64) -> Value {
    json!({
        "started_unix": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_seconds": elapsed,
        "threads": rayon::current_num_threads(),
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn load_with_config(
    input: &InputArgs,
    prep: &PrepArgs,
    flags: Option<&DetectFlags>,
) -> Result<(Loaded, AnalysisConfig), Failure> {
    let resolved = resolve(prep, flags)?;
    let loaded = load(input)?;
    let mut cfg = resolved.config;
    if !resolved.skip_explicit && loaded.simulated() {
        log::info!("simulated session: no initial rejection");
        cfg.skip_hours = 0.0;
    }
    Ok((loaded, cfg))
}

pub fn detect(args: DetectArgs) -> Result<(), Failure> {
    let (loaded, cfg) = load_with_config(&args.input, &args.prep, Some(&args.detect))?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let result = analyze(&loaded.session, &cfg)?;

    let mut out = Outputs::in_dir(&args.out)?;
    out.write("events.json", |w| Ok(write_events_json(&result.events, w)?))?;
    out.write("events.csv", |w| Ok(write_events_csv(&result.events, w)?))?;
    out.write("rates.csv", |w| Ok(write_rates_csv(&result.rates, w)?))?;
    out.write("rates.txt", |w| {
        write!(w, "{}", result.rates).map_err(Failure::other)
    })?;
    out.write("metrics.csv", |w| {
        Ok(write_metrics_csv(&result.metrics, w)?)
    })?;
    if let Some(g) = &result.groups {
        out.write("groups.csv", |w| Ok(write_groups_csv(g, w)?))?;
    }
    if let Some(t) = &loaded.truth {
        out.write("truth.json", |w| Ok(write_json(t, w)?))?;
    }
    if args.dump_fits {
        out.write("fits.json", |w| Ok(write_json(&result.fits, w)?))?;
    }
    if args.dump_pairs {
        let frames = prepare(&trimmed(&loaded.session, &cfg)?, &cfg)?;
        for f in &frames {
            let pairs = rolling_correlations(&f.impedance_refs(), cfg.window)
                .map_err(cellsync::Error::from)?;
            out.write(format!("pairs_{}.csv", f.range.start), |w| {
                Ok(write_pairs_csv(&pairs, f.range.start, w)?)
            })?;
        }
    }
    out.write("run.json", |w| {
        Ok(write_json(&run_record(&loaded, &cfg, &result), w)?)
    })?;
    let meta = metadata(started, clock.elapsed().as_secs_f64());
    out.write("meta.json", |w| Ok(write_json(&meta, w)?))?;
    out.commit();

    println!(
        "{} samples in {} frames, {} events -> {}",
        result.n_samples,
        result.frames.len(),
        result.events.len(),
        args.out.display()
    );
    print!("{}", result.rates);
    Ok(())
}

/// Per-window maximum over frames; the smallest window wins ties.
fn combine_scans(frames: &[ScanResult]) -> ScanResult {
    let mut curve: Vec<(usize, f64)> = frames[0]
        .curve
        .iter()
        .map(|&(w, _)| (w, f64::NAN))
        .collect();
    for f in frames {
        for (slot, &(_, peak)) in curve.iter_mut().zip(&f.curve) {
            slot.1 = slot.1.max(peak);
        }
    }
    let mut best = (curve[0].0, f64::NAN);
    for &(w, p) in &curve {
        if !p.is_nan() && (best.1.is_nan() || p > best.1) {
            best = (w, p);
        }
    }
    ScanResult {
        best_window: best.0,
        best_peak: best.1,
        curve,
    }
}

pub fn scan(args: ScanArgs) -> Result<(), Failure> {
    if args.scan_step == 0 || args.scan_min < 2 || args.scan_min > args.scan_max {
        return Err(Failure::config(format!(
            "invalid scan range {}..={} step {}",
            args.scan_min, args.scan_max, args.scan_step
        )));
    }
    let (loaded, cfg) = load_with_config(&args.input, &args.prep, None)?;
    let frames = prepare(&trimmed(&loaded.session, &cfg)?, &cfg)?;
    let mut per_frame = Vec::new();
    for f in frames.iter().filter(|f| f.range.len() >= args.scan_max) {
        let s = scan_window(
            &f.impedance_refs(),
            args.scan_min,
            args.scan_max,
            args.scan_step,
        )
        .map_err(cellsync::Error::from)?;
        per_frame.push((f.range.clone(), s));
    }
    if per_frame.is_empty() {
        return Err(Failure::config(format!(
            "no frame is as long as the largest window {}",
            args.scan_max
        )));
    }
    let results: Vec<ScanResult> = per_frame.iter().map(|(_, s)| s.clone()).collect();
    let overall = combine_scans(&results);

    let mut out = Outputs::in_dir(&args.out)?;
    out.write("scan.csv", |w| Ok(write_scan_csv(&overall, w)?))?;
    out.write("scan_frames.csv", |w| {
        writeln!(w, "frame_start,frame_end,best_window,best_peak").map_err(Failure::other)?;
        for (r, s) in &per_frame {
            writeln!(w, "{},{},{},{}", r.start, r.end, s.best_window, s.best_peak)
                .map_err(Failure::other)?;
        }
        Ok(())
    })?;
    out.commit();
    println!(
        "best window {} (peak r_mean {:.4}) over {} frames -> {}",
        overall.best_window,
        overall.best_peak,
        per_frame.len(),
        args.out.display()
    );
    Ok(())
}

fn rates_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("rates.csv")
    } else {
        p.to_path_buf()
    }
}

fn read_rates(p: &Path) -> Result<RateReport, Failure> {
    let path = rates_path(p);
    let file = File::open(&path)
        .map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))?;
    read_rates_csv(BufReader::new(file))
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn compare(args: CompareArgs) -> Result<(), Failure> {
    let a = read_rates(&args.a)?;
    let b = read_rates(&args.b)?;
    let cmp = compare_rates(&a, &b);
    if let Some(path) = &args.out {
        let mut out = Outputs::loose();
        out.write(path, |w| Ok(write_comparison_csv(&cmp, w)?))?;
        out.commit();
    }
    print!("{cmp}");
    Ok(())
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::InPhase => "in-phase",
        Phase::AntiPhase => "anti-phase",
        Phase::Mixed => "mixed",
    }
}

fn summarize(events: &[SyncEvent]) -> String {
    let count = |p| events.iter().filter(|e| e.phase == p).count();
    let mut s = format!(
        "{} events: {} in-phase, {} anti-phase, {} mixed, {} low-confidence\n",
        events.len(),
        count(Phase::InPhase),
        count(Phase::AntiPhase),
        count(Phase::Mixed),
        events.iter().filter(|e| e.low_confidence).count()
    );
    if !events.is_empty() {
        s.push_str(&format!(
            "{:>10} {:>10} {:>8} {:>8} {:>10}  cells\n",
            "start", "end", "r_mean", "l_pair", "phase"
        ));
    }
    for e in events {
        let cells: Vec<String> = e.involved_cells.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!(
            "{:>10} {:>10} {:>8.3} {:>8.3} {:>10}  {}{}\n",
            e.start,
            e.end,
            e.peak_r_mean,
            e.peak_l_pair,
            phase_name(e.phase),
            cells.join(" "),
            if e.low_confidence {
                " (low confidence)"
            } else {
                ""
            }
        ));
    }
    s
}

pub fn report(args: ReportArgs) -> Result<(), Failure> {
    if !args.run.is_dir() {
        return Err(Failure::input(format!(
            "{} is not a run directory",
            args.run.display()
        )));
    }
    let rates = read_rates(&args.run)?;
    let path = args.run.join("events.json");
    let text = fs::read(&path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let events = read_events_json(text.as_slice())
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    print!("{rates}\n{}", summarize(&events));
    Ok(())
}
