//! Replayable streams from precomputed embedding dumps.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::catalog::{Catalog, ItemId};
use crate::error::{Error, Result};
use crate::policy::QueryEmbedding;
use crate::record::LabeledQuery;

use super::snapshot::{read_table, VectorTable};

/// An ingested dump: queries in file order with their labels, plus the items.
#[derive(Clone, Debug)]
pub struct IngestedDump {
    pub stream: Vec<LabeledQuery>,
    pub catalog: Catalog,
    pub labels: BTreeMap<String, ItemId>,
}

/// Parses `query_id item_id` pairs, one per line, separated by a comma or
/// whitespace. Blank lines and lines starting with `#` are skipped.
pub fn parse_labels(text: &str) -> Result<BTreeMap<String, ItemId>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let schema = |message: String| Error::Schema {
            line: i + 1,
            message,
        };
        let parts: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let [query, item] = parts[..] else {
            return Err(schema(format!("expected `query_id item_id`, got {line:?}")));
        };
        if out.insert(query.to_string(), ItemId::new(item)).is_some() {
            return Err(schema(format!("query `{query}` is labelled twice")));
        }
    }
    Ok(out)
}

fn build(queries: VectorTable, items: VectorTable, labels: BTreeMap<String, ItemId>) -> Result<IngestedDump> {
    if queries.dim != items.dim {
        return Err(Error::DimensionMismatch {
            expected: items.dim,
            found: queries.dim,
        });
    }
    let catalog = items.into_catalog()?;
    let mut seen = HashSet::new();
    for id in &queries.ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    for (query, item) in &labels {
        if !seen.contains(query.as_str()) {
            return Err(Error::UnknownId(query.clone()));
        }
        if !catalog.contains(item.as_str()) {
            return Err(Error::UnknownId(item.to_string()));
        }
    }
    let mut stream = Vec::with_capacity(queries.len());
    for (i, id) in queries.ids.iter().enumerate() {
        let target = labels
            .get(id)
            .ok_or(Error::MissingGroundTruth(i as u64 + 1))?
            .clone();
        stream.push(LabeledQuery {
            query: QueryEmbedding::new(id.clone(), queries.row(i).to_vec()),
            target,
        });
    }
    Ok(IngestedDump { stream, catalog, labels })
}

/// Loads query and item vector tables plus a label file into a labelled
/// stream and catalog. Every query needs exactly one label.
pub fn ingest_embedding_dump(queries_path: &Path, items_path: &Path, labels_path: &Path) -> Result<IngestedDump> {
    let queries = read_table(queries_path)?;
    let items = read_table(items_path)?;
    let labels = parse_labels(&std::fs::read_to_string(labels_path)?)?;
    build(queries, items, labels)
}
