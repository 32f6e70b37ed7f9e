//! Session CSV format.
//!
//! ```text
//! # cellsync-session v1
//! # sample_period=2
//! # t0=1660000000
//! # parent_offset=0
//! # source=devA.csv
//! # channel=cell0/Z;impedance;Ohm
//! # channel=cell0/T;fluid_temp;°C
//! index,cell0/Z,cell0/T
//! 0,100012.5,25.001
//! 1,NaN,25.002
//! ```
//!
//! Comment lines carry the metadata, one `# channel=` line per column in
//! column order. Values are written in shortest round-trip form; `NaN` is a
//! missing sample.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::parse::fmt_value;
use super::session::{ChannelSeries, Provenance, Session};
use super::IngestError;

pub const SESSION_MAGIC: &str = "# cellsync-session v1";

pub fn write_session<W: Write>(session: &Session, out: W) -> Result<(), IngestError> {
    session.validate()?;
    let mut w = BufWriter::new(out);
    writeln!(w, "{SESSION_MAGIC}")?;
    writeln!(w, "# sample_period={}", fmt_value(session.sample_period))?;
    writeln!(w, "# t0={}", fmt_value(session.t0))?;
    writeln!(w, "# parent_offset={}", session.provenance.parent_offset)?;
    for s in &session.provenance.sources {
        writeln!(w, "# source={s}")?;
    }
    for c in &session.channels {
        writeln!(w, "# channel={};{};{}", c.id, c.kind, c.unit)?;
    }
    write!(w, "index")?;
    for c in &session.channels {
        write!(w, ",{}", c.id)?;
    }
    writeln!(w)?;
    let mut line = String::new();
    for i in 0..session.n_samples() {
        line.clear();
        line.push_str(&i.to_string());
        for c in &session.channels {
            line.push(',');
            line.push_str(&fmt_value(c.values[i]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_session_file(session: &Session, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_session(session, File::create(path)?)
}

pub fn read_session<R: Read>(input: R) -> Result<Session, IngestError> {
    let reader = BufReader::new(input);
    let mut sample_period = None;
    let mut t0 = None;
    let mut provenance = Provenance::default();
    let mut channels: Vec<ChannelSeries> = Vec::new();
    let mut header_seen = false;
    let mut magic_seen = false;

    let bad = |line: usize, message: String| IngestError::Format { line, message };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if line == SESSION_MAGIC {
                magic_seen = true;
                continue;
            }
            let meta = meta.trim();
            let Some((key, value)) = meta.split_once('=') else {
                continue;
            };
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(lineno, format!("bad number {v:?}")))
            };
            match key {
                "sample_period" => sample_period = Some(num(value)?),
                "t0" => t0 = Some(num(value)?),
                "parent_offset" => {
                    provenance.parent_offset = value
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad offset {value:?}")))?
                }
                "source" => provenance.sources.push(value.to_string()),
                "channel" => {
                    let parts: Vec<&str> = value.split(';').collect();
                    if parts.len() != 3 {
                        return Err(bad(lineno, "channel needs id;kind;unit".into()));
                    }
                    let kind = parts[1].parse().map_err(|e| bad(lineno, e))?;
                    channels.push(ChannelSeries::new(parts[0], kind, parts[2], Vec::new()));
                }
                _ => {}
            }
            continue;
        }
        if !magic_seen {
            return Err(bad(lineno, "missing session header".into()));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if !header_seen {
            let ids: Vec<&str> = channels.iter().map(|c| c.id.as_str()).collect();
            if fields.first() != Some(&"index") || fields[1..] != ids[..] {
                return Err(bad(lineno, "column header does not match channel list".into()));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != channels.len() + 1 {
            return Err(bad(
                lineno,
                format!("expected {} fields, found {}", channels.len() + 1, fields.len()),
            ));
        }
        for (c, f) in channels.iter_mut().zip(&fields[1..]) {
            let v = if f.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                f.parse::<f64>()
                    .map_err(|_| bad(lineno, format!("bad value {f:?}")))?
            };
            c.values.push(v);
        }
    }
    if !magic_seen {
        return Err(bad(0, "empty session file".into()));
    }
    let session = Session {
        sample_period: sample_period.ok_or_else(|| bad(0, "missing sample_period".into()))?,
        t0: t0.ok_or_else(|| bad(0, "missing t0".into()))?,
        channels,
        provenance,
    };
    session.validate()?;
    Ok(session)
}

pub fn read_session_file(path: impl AsRef<Path>) -> Result<Session, IngestError> {
    read_session(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ChannelKind;

    #[test]
    fn round_trip_keeps_bits() {
        let mut s = Session::new(
            2.5,
            1_660_000_000.25,
            vec![
                ChannelSeries::new("c0/Z", ChannelKind::Impedance, "Ohm", vec![100000.1, f64::NAN, 1e-300]),
                ChannelSeries::new("c0/T", ChannelKind::FluidTemp, "°C", vec![25.0, 25.000000001, -0.0]),
            ],
        )
        .unwrap();
        s.provenance.sources.push("sim".into());
        s.provenance.parent_offset = 7;
        let mut buf = Vec::new();
        write_session(&s, &mut buf).unwrap();
        let back = read_session(buf.as_slice()).unwrap();
        assert_eq!(back.sample_period, s.sample_period);
        assert_eq!(back.t0, s.t0);
        assert_eq!(back.provenance, s.provenance);
        for (a, b) in s.channels.iter().zip(&back.channels) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.unit, b.unit);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_session("hello\n".as_bytes()).is_err());
        assert!(read_session("".as_bytes()).is_err());
        let bad = format!("{SESSION_MAGIC}\n# sample_period=1\n# t0=0\n# channel=a;impedance;Ohm\nindex,a\n0,1,2\n");
        assert!(matches!(read_session(bad.as_bytes()), Err(IngestError::Format { line: 6, .. })));
    }
}
