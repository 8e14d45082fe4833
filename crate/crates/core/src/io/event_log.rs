//! JSONL event logs, one record per line.

use std::path::Path;

use crate::error::{Error, Result};
use crate::record::EventRecord;

/// Serialises records exactly as [`write_event_log`] stores them.
pub fn encode_event_log(records: &[EventRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Parses and checks a log: `t` strictly increasing, propensity in `(0, 1]`.
/// Errors cite the 1-based line number.
pub fn parse_event_log(text: &str) -> Result<Vec<EventRecord>> {
    let mut out: Vec<EventRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let schema = |message: String| Error::Schema {
            line: line_no,
            message,
        };
        let rec: EventRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        if !(rec.propensity > 0.0 && rec.propensity <= 1.0) {
            return Err(schema(format!("propensity {} outside (0, 1]", rec.propensity)));
        }
        if let Some(prev) = out.last() {
            if rec.t <= prev.t {
                return Err(schema(format!("t = {} does not increase (previous {})", rec.t, prev.t)));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_event_log(path: &Path, records: &[EventRecord]) -> Result<()> {
    super::write_atomic(path, encode_event_log(records)?.as_bytes())
}

pub fn read_event_log(path: &Path) -> Result<Vec<EventRecord>> {
    parse_event_log(&std::fs::read_to_string(path)?)
}
