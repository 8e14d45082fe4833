//! Records shared by the simulator, metrics and the event-log format.

use serde::{Deserialize, Serialize};

use crate::catalog::ItemId;
use crate::policy::QueryEmbedding;

/// One line of the JSONL event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub t: u64,
    pub query_id: String,
    pub chosen: ItemId,
    pub success: bool,
    pub propensity: f64,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<u64>,
}

/// A query paired with its ground-truth item (full information).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledQuery {
    pub query: QueryEmbedding,
    pub target: ItemId,
}
