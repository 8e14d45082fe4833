//! Persistence: JSON run configs, JSONL event logs, binary embedding
//! snapshots and embedding-dump ingestion.

mod config;
mod event_log;
mod ingest;
mod snapshot;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::{load_config, parse_config, RunConfig, UpdateModeName};
pub use event_log::{encode_event_log, parse_event_log, read_event_log, write_event_log};
pub use ingest::{ingest_embedding_dump, parse_labels, IngestedDump};
pub use snapshot::{
    decode_table, encode_table, read_catalog, read_table, write_catalog, write_table, VectorTable,
    SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
};

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
