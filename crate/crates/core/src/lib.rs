//! Online adaptation of retrieval embeddings from bandit feedback.
//!
//! A [`Catalog`] of item embeddings defines a softmax retrieval policy over
//! items for each query. After every round the [`Learner`] observes only
//! whether the sampled item was correct and nudges the catalog with an
//! importance-weighted gradient step. The [`variants`] module wires the same
//! learner into rerankers, changing catalogs and multi-hop chains, the
//! [`simulator`] supplies seeded synthetic environments, and [`metrics`]
//! measures regret against a hindsight-fitted catalog.

pub mod catalog;
pub mod error;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod policy;
pub mod record;
pub mod simulator;
pub mod variants;

pub use catalog::{Catalog, ItemId, Precision, ProjectionMode};
pub use error::{Error, Result};
pub use learner::{
    apply_update, estimate_gradient_batched, estimate_gradient_chosen_only, estimate_gradient_full, BatchEvent,
    Feedback, GradientBatch, Judge, Learner, LearningRateSchedule, Round, ScheduleKind, UpdateMode,
};
pub use metrics::{
    cross_entropy_loss, ndcg_at_k, recall_at_k, regret_curve, rolling_accuracy, train_oracle, OracleFit,
    OracleOptions, RankedList, RegretLedger,
};
pub use policy::{
    sample_k_without_replacement, sample_one, score, ProbabilityVector, QueryEmbedding, RandomSource,
};
pub use record::{EventRecord, LabeledQuery};
pub use simulator::{
    initial_catalog, make_environment, run_episode, DistributionShift, EpisodeConfig, EpisodeLog, Environment,
    Variant,
};
