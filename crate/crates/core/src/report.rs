//! Run artifacts: events (JSON and CSV), rate tables, metric and group
//! curves, window scans, fits, and the comparison of two runs' rates.
//!
//! Floats are written in shortest round-trip form and `NaN` as `NaN`, so a
//! rerun with the same inputs writes identical bytes.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{GroupCorrelations, MetricsSeries, RateReport, RateRow, ScanResult, SyncEvent};
use crate::synccorr::PairSeries;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("rate table line {line}: {message}")]
    Format { line: u64, message: String },
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        v.to_string()
    }
}

pub fn write_events_json<W: Write>(events: &[SyncEvent], mut out: W) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut out, events)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_events_json<R: Read>(input: R) -> Result<Vec<SyncEvent>, ReportError> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_events_csv<W: Write>(events: &[SyncEvent], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "start",
        "end",
        "peak_index",
        "peak_r_mean",
        "peak_l_pair",
        "window",
        "phase",
        "trigger",
        "low_confidence",
        "involved_cells",
    ])?;
    for e in events {
        let cells: Vec<String> = e.involved_cells.iter().map(usize::to_string).collect();
        w.write_record([
            e.start.to_string(),
            e.end.to_string(),
            e.peak_index.to_string(),
            num(e.peak_r_mean),
            num(e.peak_l_pair),
            e.window.to_string(),
            serde_json::to_value(e.phase)?.as_str().unwrap_or_default().to_string(),
            serde_json::to_value(e.trigger)?.as_str().unwrap_or_default().to_string(),
            e.low_confidence.to_string(),
            cells.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const RATE_HEADER: [&str; 11] = [
    "criterion",
    "metric",
    "threshold",
    "n_smp",
    "n_events",
    "rate",
    "t_exp",
    "n_samples",
    "sample_period",
    "frame_len",
    "window",
];

pub fn write_rates_csv<W: Write>(report: &RateReport, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.criterion.clone(),
            r.metric.as_str().to_string(),
            num(r.threshold),
            r.n_smp.to_string(),
            r.n_events.to_string(),
            num(r.rate),
            num(report.t_exp),
            report.n_samples.to_string(),
            num(report.sample_period),
            report.frame_len.to_string(),
            report.window.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rates_csv<R: Read>(input: R) -> Result<RateReport, ReportError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != RATE_HEADER {
        return Err(ReportError::Format {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut report = RateReport {
        frame_len: 0,
        window: 0,
        n_samples: 0,
        sample_period: 0.0,
        t_exp: 0.0,
        rows: Vec::new(),
    };
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |m: String| ReportError::Format { line, message: m };
        macro_rules! parse {
            ($i:expr) => {
                field($i)
                    .parse()
                    .map_err(|_| bad(format!("bad {} {:?}", RATE_HEADER[$i], field($i))))?
            };
        }
        report.rows.push(RateRow {
            criterion: field(0).to_string(),
            metric: field(1).parse().map_err(|e| bad(format!("{e}")))?,
            threshold: parse!(2),
            n_smp: parse!(3),
            n_events: parse!(4),
            rate: parse!(5),
        });
        report.t_exp = parse!(6);
        report.n_samples = parse!(7);
        report.sample_period = parse!(8);
        report.frame_len = parse!(9);
        report.window = parse!(10);
    }
    Ok(report)
}

pub fn write_metrics_csv<W: Write>(metrics: &MetricsSeries, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "r_mean", "l_pair_signed", "l_pair_abs", "n_defined"])?;
    for k in 0..metrics.len() {
        w.write_record([
            (metrics.start + k).to_string(),
            num(metrics.r_mean[k]),
            num(metrics.l_pair_signed[k]),
            num(metrics.l_pair_abs[k]),
            metrics.n_defined[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_groups_csv<W: Write>(groups: &GroupCorrelations, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "imp_imp", "temp_temp", "imp_temp"])?;
    for k in 0..groups.len() {
        w.write_record([
            (groups.start + k).to_string(),
            num(groups.imp_imp[k]),
            num(groups.temp_temp[k]),
            num(groups.imp_temp[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(scan: &ScanResult, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window", "peak_r_mean"])?;
    for &(win, peak) in &scan.curve {
        w.write_record([win.to_string(), num(peak)])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format dump `(index, i, j, r)` of every pair coefficient; `offset` is
/// the sample index of the first input sample.
pub fn write_pairs_csv<W: Write>(pairs: &PairSeries, offset: usize, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "i", "j", "r"])?;
    for t in 0..pairs.len() {
        for (p, r) in pairs.at(t) {
            w.write_record([
                (offset + pairs.first_end() + t).to_string(),
                p.i.to_string(),
                p.j.to_string(),
                num(r),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Ratio {
    Finite(f64),
    /// Nonzero numerator over a zero denominator.
    Infinite,
}

impl Ratio {
    /// `a / b`; equal rates, including two zeros, give 1.
    pub fn of(a: f64, b: f64) -> Self {
        if a == b {
            Ratio::Finite(1.0)
        } else if b == 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Finite(a / b)
        }
    }

    /// `f64::INFINITY` for [`Ratio::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Ratio::Finite(v) => v,
            Ratio::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v:.3}"),
            Ratio::Infinite => write!(f, "∞ (B=0)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub criterion: String,
    pub n_smp_a: usize,
    pub n_smp_b: usize,
    pub n_events_a: usize,
    pub n_events_b: usize,
    pub rate_a: f64,
    pub rate_b: f64,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Criteria present in only one of the runs.
    pub unmatched: Vec<String>,
}

impl Comparison {
    pub fn row(&self, criterion: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }
}

/// Per-criterion rate ratio `A / B` for the criteria both reports share.
pub fn compare_rates(a: &RateReport, b: &RateReport) -> Comparison {
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for ra in &a.rows {
        match b.row(&ra.criterion) {
            Some(rb) => rows.push(ComparisonRow {
                criterion: ra.criterion.clone(),
                n_smp_a: ra.n_smp,
                n_smp_b: rb.n_smp,
                n_events_a: ra.n_events,
                n_events_b: rb.n_events,
                rate_a: ra.rate,
                rate_b: rb.rate,
                ratio: Ratio::of(ra.rate, rb.rate),
            }),
            None => unmatched.push(ra.criterion.clone()),
        }
    }
    unmatched.extend(
        b.rows
            .iter()
            .filter(|rb| a.row(&rb.criterion).is_none())
            .map(|rb| rb.criterion.clone()),
    );
    Comparison { rows, unmatched }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>10} {:>10} {:>12} {:>12} {:>10}",
            "metric", "N_smp A", "N_smp B", "rate A", "rate B", "A/B"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:>10} {:>10} {:>12.3e} {:>12.3e} {:>10}",
                r.criterion,
                r.n_smp_a,
                r.n_smp_b,
                r.rate_a,
                r.rate_b,
                r.ratio.to_string()
            )?;
        }
        for c in &self.unmatched {
            writeln!(f, "{c:<22} present in one run only")?;
        }
        Ok(())
    }
}

pub fn write_comparison_csv<W: Write>(cmp: &Comparison, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["criterion", "n_smp_a", "n_smp_b", "n_events_a", "n_events_b", "rate_a", "rate_b", "ratio"])?;
    for r in &cmp.rows {
        let ratio = match r.ratio {
            Ratio::Finite(v) => num(v),
            Ratio::Infinite => "inf".to_string(),
        };
        w.write_record([
            r.criterion.clone(),
            r.n_smp_a.to_string(),
            r.n_smp_b.to_string(),
            r.n_events_a.to_string(),
            r.n_events_b.to_string(),
            num(r.rate_a),
            num(r.rate_b),
            ratio,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RateMetric;

    fn report(rates: &[(usize, f64)]) -> RateReport {
        RateReport {
            frame_len: 2000,
            window: 100,
            n_samples: 1000,
            sample_period: 2.5,
            t_exp: 2500.0,
            rows: rates
                .iter()
                .enumerate()
                .map(|(k, &(n, rate))| RateRow {
                    criterion: format!("r_mean>0.{}", k + 5),
                    metric: RateMetric::RMean,
                    threshold: 0.5 + 0.1 * k as f64,
                    n_smp: n,
                    n_events: n / 10,
                    rate,
                })
                .collect(),
        }
    }

    #[test]
    fn rates_round_trip() {
        let r = report(&[(90, 90.0 / 2500.0), (0, 0.0), (7, 7.0 / 2500.0)]);
        let mut buf = Vec::new();
        write_rates_csv(&r, &mut buf).unwrap();
        assert_eq!(read_rates_csv(buf.as_slice()).unwrap(), r);
        assert!(read_rates_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn ratios() {
        assert_eq!(Ratio::of(2.0, 0.5), Ratio::Finite(4.0));
        assert_eq!(Ratio::of(0.0, 0.0), Ratio::Finite(1.0));
        assert_eq!(Ratio::of(1e-5, 1e-5), Ratio::Finite(1.0));
        assert_eq!(Ratio::of(3.0, 0.0), Ratio::Infinite);
        assert_eq!(Ratio::Infinite.to_string(), "∞ (B=0)");
    }

    #[test]
    fn comparison_of_identical_runs() {
        let r = report(&[(90, 0.036), (0, 0.0)]);
        let c = compare_rates(&r, &r);
        assert!(c.rows.iter().all(|row| row.ratio == Ratio::Finite(1.0)));
        assert!(c.unmatched.is_empty());
    }

    #[test]
    fn zero_denominator_is_marked() {
        let a = report(&[(5, 0.002)]);
        let b = report(&[(0, 0.0)]);
        let c = compare_rates(&a, &b);
        assert_eq!(c.rows[0].ratio, Ratio::Infinite);
        assert!(c.to_string().contains("∞ (B=0)"));
    }
}
