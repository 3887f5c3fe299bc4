//! Event CSV files and JSON helpers.

use std::fs;
use std::path::Path;

use hawkes_vb::EventData;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const EVENTS_HEADER: &str = "dim,time";
/// Events closer than this after rounding are moved apart.
const TIE_JITTER: f64 = 1e-9;

/// `(dim, time)` pairs sorted by time, then dimension.
fn sorted_pairs(events: &EventData) -> Vec<(usize, f64)> {
    let mut pairs: Vec<(usize, f64)> = events
        .all()
        .iter()
        .enumerate()
        .flat_map(|(k, ts)| ts.iter().map(move |&t| (k, t)))
        .collect();
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    pairs
}

/// CSV text of `events`, times with 6 decimals.
pub fn format_events(events: &EventData) -> String {
    let mut out = String::from(EVENTS_HEADER);
    out.push('\n');
    for (k, t) in sorted_pairs(events) {
        out.push_str(&format!("{k},{t:.6}\n"));
    }
    out
}

/// Parses event CSV text into `dims` dimensions observed on `[start, horizon]`.
///
/// Times that coincide after rounding are pushed apart by 1e-9, with a warning.
pub fn parse_events(text: &str, dims: usize, horizon: f64, start: f64) -> Result<EventData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::data(format!("events file: {e}")))?;
    if header.iter().collect::<Vec<_>>().join(",") != EVENTS_HEADER {
        return Err(CliError::data(format!(
            "events file must start with the header `{EVENTS_HEADER}`"
        )));
    }
    let mut pairs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("events file: {e}")))?;
        let bad = || {
            CliError::data(format!(
                "events file line {}: expected `dim,time`",
                line + 2
            ))
        };
        if record.len() != 2 {
            return Err(bad());
        }
        let k: usize = record[0].trim().parse().map_err(|_| bad())?;
        let t: f64 = record[1].trim().parse().map_err(|_| bad())?;
        if k >= dims {
            return Err(CliError::data(format!(
                "events file line {}: dimension {k} >= {dims}",
                line + 2
            )));
        }
        pairs.push((k, t));
    }
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut jittered = 0;
    for i in 1..pairs.len() {
        if pairs[i].1 <= pairs[i - 1].1 {
            pairs[i].1 = pairs[i - 1].1 + TIE_JITTER;
            jittered += 1;
        }
    }
    if jittered > 0 {
        log::warn!("{jittered} tied event times moved apart by {TIE_JITTER}");
    }
    let mut times = vec![Vec::new(); dims];
    for (k, t) in pairs {
        times[k].push(t);
    }
    Ok(EventData::new(times, horizon, start)?)
}

/// Rounds `events` to the file precision, as if written and read back.
pub fn round_events(events: &EventData) -> Result<EventData> {
    parse_events(
        &format_events(events),
        events.dims(),
        events.horizon(),
        events.start(),
    )
}

pub fn write_events(path: &Path, events: &EventData) -> Result<()> {
    write_text(path, &format_events(events))
}

pub fn read_events(path: &Path, dims: usize, horizon: f64, start: f64) -> Result<EventData> {
    parse_events(&read_text(path)?, dims, horizon, start)
}

/// Number of dimensions named in an events file (largest index plus one).
pub fn count_dims(path: &Path) -> Result<usize> {
    let text = read_text(path)?;
    let mut dims = 0;
    for line in text.lines().skip(1) {
        if let Some(k) = line
            .split(',')
            .next()
            .and_then(|s| s.trim().parse::<usize>().ok())
        {
            dims = dims.max(k + 1);
        }
    }
    Ok(dims.max(1))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a JSON file; syntax and schema errors are data errors.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
