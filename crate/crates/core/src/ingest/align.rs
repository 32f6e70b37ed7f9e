use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::parse::{ParsedLog, SampleRecord};
use super::session::{ChannelKind, ChannelSeries, Provenance, Session};
use super::IngestError;

/// Records of one acquisition device plus the labels of its channels.
#[derive(Debug, Clone)]
pub struct DeviceStream {
    pub device_id: String,
    pub impedance_labels: Vec<String>,
    pub temp_labels: Vec<String>,
    pub records: Vec<SampleRecord>,
    pub source: Option<String>,
}

impl DeviceStream {
    pub fn from_log(device_id: impl Into<String>, log: ParsedLog) -> Self {
        Self {
            device_id: device_id.into(),
            impedance_labels: log.schema.impedance_labels(),
            temp_labels: log.schema.fluid_temp_labels(),
            records: log.records,
            source: None,
        }
    }

    fn env_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.records.iter().flat_map(|r| r.env.keys()).collect();
        names.into_iter().cloned().collect()
    }
}

#[derive(Debug, Clone)]
pub struct AlignOptions {
    /// Maximum distance in seconds between a record and the tick it is matched to.
    pub tolerance: f64,
    /// Tick spacing; estimated as the median record spacing when `None`.
    pub sample_period: Option<f64>,
    /// Fill interior missing ticks by linear interpolation between matched
    /// neighbours of the same device.
    pub interpolate: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            tolerance: 1.0,
            sample_period: None,
            interpolate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceAlignment {
    pub device_id: String,
    /// Median of (record time - tick time) over matched records, seconds.
    pub clock_offset: f64,
    pub total_records: usize,
    pub kept_records: usize,
    pub dropped_records: usize,
    pub missing_ticks: usize,
    pub interpolated_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub sample_period: f64,
    pub devices: Vec<DeviceAlignment>,
    pub total_records: usize,
    pub kept_records: usize,
    pub dropped_records: usize,
    pub interpolated_samples: usize,
}

impl AlignmentReport {
    pub fn device(&self, id: &str) -> Option<&DeviceAlignment> {
        self.devices.iter().find(|d| d.device_id == id)
    }

    /// Clock offset of device `b` relative to device `a`.
    pub fn relative_offset(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.device(b)?.clock_offset - self.device(a)?.clock_offset)
    }
}

/// Matches every stream onto a common tick grid.
///
/// The grid starts at the latest first timestamp over all streams and runs
/// while ticks stay within `tolerance` of the earliest last timestamp. Each
/// record goes to its nearest tick if it lies within `tolerance`; otherwise it
/// is dropped. Ticks that receive no record are `NaN`. Streams are ordered by
/// device id, so the result does not depend on the order of `streams`.
pub fn align(streams: &[DeviceStream], opts: &AlignOptions) -> Result<(Session, AlignmentReport), IngestError> {
    if streams.is_empty() {
        return Err(IngestError::NoStreams);
    }
    if !(opts.tolerance >= 0.0) {
        return Err(IngestError::InvalidArgument("tolerance must be non-negative".into()));
    }
    let mut order: Vec<&DeviceStream> = streams.iter().collect();
    order.sort_by(|a, b| a.device_id.cmp(&b.device_id));
    let mut ids = HashSet::new();
    for s in &order {
        if !ids.insert(s.device_id.as_str()) {
            return Err(IngestError::DuplicateDevice(s.device_id.clone()));
        }
        if s.records.is_empty() {
            return Err(IngestError::NoOverlap);
        }
    }

    let period = match opts.sample_period {
        Some(p) if p > 0.0 && p.is_finite() => p,
        Some(p) => return Err(IngestError::SamplePeriod(format!("{p} is not positive"))),
        None => estimate_period(&order)?,
    };
    let start = order
        .iter()
        .map(|s| s.records[0].timestamp)
        .fold(f64::NEG_INFINITY, f64::max);
    let end = order
        .iter()
        .map(|s| s.records.last().unwrap().timestamp)
        .fold(f64::INFINITY, f64::min);
    if end < start {
        return Err(IngestError::NoOverlap);
    }
    let n_ticks = ((end + opts.tolerance - start) / period + 1e-9).floor() as usize + 1;

    let mut channels = Vec::new();
    let mut devices = Vec::new();
    for s in &order {
        let (dev_channels, report) = align_stream(s, start, period, n_ticks, opts)?;
        channels.extend(dev_channels);
        devices.push(report);
    }

    let report = AlignmentReport {
        sample_period: period,
        total_records: devices.iter().map(|d| d.total_records).sum(),
        kept_records: devices.iter().map(|d| d.kept_records).sum(),
        dropped_records: devices.iter().map(|d| d.dropped_records).sum(),
        interpolated_samples: devices.iter().map(|d| d.interpolated_samples).sum(),
        devices,
    };
    let session = Session {
        sample_period: period,
        t0: start,
        channels,
        provenance: Provenance {
            sources: order
                .iter()
                .map(|s| s.source.clone().unwrap_or_else(|| s.device_id.clone()))
                .collect(),
            parent_offset: 0,
            alignment: Some(report.clone()),
        },
    };
    session.validate()?;
    Ok((session, report))
}

fn estimate_period(streams: &[&DeviceStream]) -> Result<f64, IngestError> {
    let mut diffs: Vec<f64> = streams
        .iter()
        .flat_map(|s| s.records.windows(2).map(|w| w[1].timestamp - w[0].timestamp))
        .filter(|d| *d > 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(IngestError::SamplePeriod("fewer than two records per stream".into()));
    }
    diffs.sort_by(f64::total_cmp);
    Ok(diffs[diffs.len() / 2])
}

fn align_stream(
    s: &DeviceStream,
    t0: f64,
    period: f64,
    n_ticks: usize,
    opts: &AlignOptions,
) -> Result<(Vec<ChannelSeries>, DeviceAlignment), IngestError> {
    let mut slot: Vec<Option<usize>> = vec![None; n_ticks];
    let mut offsets = Vec::new();
    for (ri, rec) in s.records.iter().enumerate() {
        let k = ((rec.timestamp - t0) / period).round();
        if k < 0.0 || k >= n_ticks as f64 {
            continue;
        }
        let k = k as usize;
        let tick = t0 + k as f64 * period;
        if (rec.timestamp - tick).abs() > opts.tolerance {
            continue;
        }
        if let Some(prev) = slot[k] {
            return Err(IngestError::AmbiguousMatch {
                device: s.device_id.clone(),
                tick_time: tick,
                timestamps: vec![s.records[prev].timestamp, rec.timestamp],
            });
        }
        slot[k] = Some(ri);
        offsets.push(rec.timestamp - tick);
    }

    let kept = offsets.len();
    let clock_offset = if offsets.is_empty() {
        0.0
    } else {
        offsets.sort_by(f64::total_cmp);
        let m = offsets.len() / 2;
        if offsets.len() % 2 == 1 {
            offsets[m]
        } else {
            0.5 * (offsets[m - 1] + offsets[m])
        }
    };

    let env = s.env_names();
    let mut columns: Vec<ChannelSeries> = Vec::new();
    let col = |f: &dyn Fn(&SampleRecord) -> f64| -> Vec<f64> {
        slot.iter()
            .map(|o| o.map_or(f64::NAN, |ri| f(&s.records[ri])))
            .collect()
    };
    for (i, l) in s.impedance_labels.iter().enumerate() {
        columns.push(ChannelSeries::new(
            format!("{}/Z{l}", s.device_id),
            ChannelKind::Impedance,
            "Ohm",
            col(&|r| r.impedance.get(i).copied().unwrap_or(f64::NAN)),
        ));
    }
    for (i, l) in s.temp_labels.iter().enumerate() {
        columns.push(ChannelSeries::new(
            format!("{}/T{l}", s.device_id),
            ChannelKind::FluidTemp,
            "°C",
            col(&|r| r.fluid_temp.get(i).copied().unwrap_or(f64::NAN)),
        ));
    }
    for name in &env {
        columns.push(ChannelSeries::new(
            format!("{}/{name}", s.device_id),
            ChannelKind::Env,
            env_unit(name),
            col(&|r| r.env.get(name).copied().unwrap_or(f64::NAN)),
        ));
    }

    let mut interpolated = 0;
    if opts.interpolate {
        let matched: Vec<usize> = (0..n_ticks).filter(|&k| slot[k].is_some()).collect();
        for w in matched.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a < 2 {
                continue;
            }
            interpolated += b - a - 1;
            for ch in columns.iter_mut() {
                let (va, vb) = (ch.values[a], ch.values[b]);
                for k in a + 1..b {
                    let frac = (k - a) as f64 / (b - a) as f64;
                    ch.values[k] = va + (vb - va) * frac;
                }
            }
        }
    }

    let report = DeviceAlignment {
        device_id: s.device_id.clone(),
        clock_offset,
        total_records: s.records.len(),
        kept_records: kept,
        dropped_records: s.records.len() - kept,
        missing_ticks: n_ticks - kept - interpolated,
        interpolated_samples: interpolated,
    };
    Ok((columns, report))
}

fn env_unit(name: &str) -> &'static str {
    let n = name.to_ascii_lowercase();
    if n.starts_with("acc") {
        "m/s^2"
    } else if n.starts_with("mag") {
        "uT"
    } else if n.starts_with("rf") {
        "dBm"
    } else if n.starts_with("pressure") {
        "hPa"
    } else if n.starts_with("humidity") {
        "%"
    } else if n.starts_with("air_temp") {
        "°C"
    } else if n.starts_with("co2") {
        "ppm"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn stream(id: &str, times: impl IntoIterator<Item = f64>) -> DeviceStream {
        let records = times
            .into_iter()
            .enumerate()
            .map(|(i, t)| SampleRecord {
                timestamp: t,
                device_id: id.into(),
                impedance: vec![100.0 + i as f64],
                fluid_temp: vec![25.0],
                env: BTreeMap::from([("co2".to_string(), 400.0)]),
            })
            .collect();
        DeviceStream {
            device_id: id.into(),
            impedance_labels: vec!["1".into()],
            temp_labels: vec!["1".into()],
            records,
            source: None,
        }
    }

    #[test]
    fn identical_timestamps_need_no_interpolation() {
        let times: Vec<f64> = (0..100).map(|i| 1000.0 + 2.0 * i as f64).collect();
        let opts = AlignOptions {
            interpolate: true,
            ..AlignOptions::default()
        };
        let (s, r) = align(&[stream("A", times.clone()), stream("B", times)], &opts).unwrap();
        assert_eq!(s.n_samples(), 100);
        assert_eq!(r.interpolated_samples, 0);
        assert_eq!(r.dropped_records, 0);
        assert_eq!(s.channels.len(), 6);
        assert_eq!(s.channel("B/co2").unwrap().unit, "ppm");
        assert_eq!(r.sample_period, 2.0);
    }

    #[test]
    fn shifted_stream_matches_every_record() {
        let a: Vec<f64> = (0..500).map(|i| 2.0 * i as f64).collect();
        let b: Vec<f64> = a.iter().map(|t| t + 0.4).collect();
        let opts = AlignOptions {
            tolerance: 1.0,
            sample_period: Some(2.0),
            interpolate: false,
        };
        let (s, r) = align(&[stream("A", a.clone()), stream("B", b.clone())], &opts).unwrap();
        assert_eq!(r.dropped_records, 0);
        assert_eq!(r.kept_records, 1000);
        let off = r.relative_offset("A", "B").unwrap();
        assert!((off - 0.4).abs() < 1e-9, "{off}");

        // Exhaustive check: every record sits on the tick nearest to it.
        for (id, times) in [("A", &a), ("B", &b)] {
            let z = &s.channel(&format!("{id}/Z1")).unwrap().values;
            for (i, t) in times.iter().enumerate() {
                let nearest = (0..s.n_samples())
                    .min_by(|&x, &y| {
                        (s.time_of(x) - t).abs().total_cmp(&(s.time_of(y) - t).abs())
                    })
                    .unwrap();
                assert_eq!(z[nearest], 100.0 + i as f64);
            }
        }
    }

    #[test]
    fn disjoint_streams_fail() {
        let a = (0..10).map(|i| i as f64);
        let b = (0..10).map(|i| 100.0 + i as f64);
        assert!(matches!(
            align(&[stream("A", a), stream("B", b)], &AlignOptions::default()),
            Err(IngestError::NoOverlap)
        ));
    }

    #[test]
    fn double_match_is_ambiguous() {
        let a = vec![0.0, 2.0, 4.0, 6.0];
        let b = vec![0.0, 1.8, 2.2, 4.0, 6.0];
        let opts = AlignOptions {
            tolerance: 0.5,
            sample_period: Some(2.0),
            interpolate: false,
        };
        match align(&[stream("A", a), stream("B", b)], &opts) {
            Err(IngestError::AmbiguousMatch { timestamps, .. }) => assert_eq!(timestamps, vec![1.8, 2.2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gaps_are_missing_or_interpolated() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().copied().filter(|t| *t != 4.0 && *t != 5.0).collect();
        let opts = AlignOptions {
            tolerance: 0.1,
            sample_period: Some(1.0),
            interpolate: false,
        };
        let (s, r) = align(&[stream("A", a.clone()), stream("B", b.clone())], &opts).unwrap();
        let z = &s.channel("B/Z1").unwrap().values;
        assert!(z[4].is_nan() && z[5].is_nan());
        assert_eq!(r.device("B").unwrap().missing_ticks, 2);

        let interp = AlignOptions {
            interpolate: true,
            ..opts
        };
        let (s, r) = align(&[stream("A", a), stream("B", b)], &interp).unwrap();
        let z = &s.channel("B/Z1").unwrap().values;
        // records 3 (t=3) and 4 (t=6) carry 103 and 104
        assert!((z[4] - (103.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(r.interpolated_samples, 2);
    }

    #[test]
    fn dropped_plus_kept_is_total() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..80).map(|i| 20.0 + i as f64 * 0.7).collect();
        let opts = AlignOptions {
            tolerance: 0.2,
            sample_period: Some(1.0),
            interpolate: false,
        };
        let (_, r) = align(&[stream("A", a), stream("B", b)], &opts).unwrap();
        assert_eq!(r.dropped_records + r.kept_records, r.total_records);
        assert!(r.dropped_records > 0);
    }
}
