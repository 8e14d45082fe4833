//! Synthetic online environments.
//!
//! Every item owns a latent unit direction. A query for item `i` is that
//! direction plus isotropic Gaussian noise, renormalised, so the ground-truth
//! item of every round is defined by construction. Initial catalogs corrupt
//! the latent directions with a separate noise level to model a misaligned
//! embedding model.

use serde::{Deserialize, Serialize};

use crate::catalog::{l2_norm, Catalog, ItemId, ProjectionMode};
use crate::error::{Error, Result};
use crate::learner::{Learner, LearningRateSchedule, UpdateMode};
use crate::policy::{QueryEmbedding, RandomSource};
use crate::record::{EventRecord, LabeledQuery};
use crate::variants::{
    apply_delta, step_multihop, step_with_rerank, CatalogDelta, InitEmbedder, MultiHopRound, NewItem,
    StubReranker,
};

const STREAM_LATENT: u64 = 0;
const STREAM_QUERIES: u64 = 1;
const STREAM_SHIFT: u64 = 2;
const STREAM_WITHHOLD: u64 = 3;
const STREAM_PASSES: u64 = 4;
const STREAM_POLICY: u64 = 5;
const STREAM_PROBES: u64 = 6;
const STREAM_INIT_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Plain,
    Rerank,
    Dynamic,
    Multihop,
}

/// From round `round` on, a `fraction` of query clusters is served by a
/// different ground-truth item.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionShift {
    pub round: u64,
    pub fraction: f64,
}

/// Everything needed to build an environment and run one episode on it.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    /// Length `T` of the base query list.
    pub horizon: usize,
    pub num_items: usize,
    pub dim: usize,
    /// Candidates per round for the rerank variant.
    pub k: usize,
    pub variant: Variant,
    pub update_mode: UpdateMode,
    pub schedule: LearningRateSchedule,
    pub projection: ProjectionMode,
    /// Each base query is served this many times, reshuffled per pass.
    pub repeat_passes: usize,
    /// Query noise `σ`.
    pub query_noise: f64,
    /// Initial-embedding corruption `σ_init`.
    pub init_noise: f64,
    /// Stub reranker strength `α`.
    pub reranker_accuracy: f64,
    pub shift: Option<DistributionShift>,
    /// Sub-queries per task for the multi-hop variant.
    pub hops: usize,
    /// Share of items held back until `insert_round` (dynamic variant).
    pub withheld_fraction: f64,
    /// Defaults to the first round of the second half.
    pub insert_round: Option<u64>,
    pub propensity_floor: Option<f64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            horizon: 1000,
            num_items: 20,
            dim: 8,
            k: 1,
            variant: Variant::Plain,
            update_mode: UpdateMode::Full,
            schedule: LearningRateSchedule::default(),
            projection: ProjectionMode::None,
            repeat_passes: 1,
            query_noise: 0.3,
            init_noise: 0.8,
            reranker_accuracy: 1.0,
            shift: None,
            hops: 2,
            withheld_fraction: 0.5,
            insert_round: None,
            propensity_floor: None,
        }
    }
}

impl EpisodeConfig {
    /// First violated constraint as `(config key, message)`.
    pub fn check(&self) -> Option<(&'static str, String)> {
        let fail = |k: &'static str, m: &str| Some((k, m.to_string()));
        if self.horizon < 1 {
            return fail("T", "must be at least 1");
        }
        if self.num_items < 1 {
            return fail("I", "must be at least 1");
        }
        if self.dim < 1 {
            return fail("d", "must be at least 1");
        }
        if self.k < 1 || self.k > self.num_items {
            return Some(("K", format!("must satisfy 1 <= K <= I (I = {})", self.num_items)));
        }
        if self.repeat_passes < 1 {
            return fail("repeat_passes", "must be at least 1");
        }
        if !(self.schedule.c.is_finite() && self.schedule.c > 0.0) {
            return fail("c", "must be positive");
        }
        if let UpdateMode::Batched { batch_size: 0 } = self.update_mode {
            return fail("batch_size", "must be at least 1");
        }
        if !(self.query_noise.is_finite() && self.query_noise >= 0.0) {
            return fail("sigma", "must be non-negative");
        }
        if !(self.init_noise.is_finite() && self.init_noise >= 0.0) {
            return fail("sigma_init", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.reranker_accuracy) {
            return fail("alpha", "must lie in [0, 1]");
        }
        if let Some(s) = self.shift {
            if s.round < 1 {
                return fail("shift_round", "must be at least 1");
            }
            if !(0.0..=1.0).contains(&s.fraction) {
                return fail("shift_fraction", "must lie in [0, 1]");
            }
        }
        if self.hops < 1 {
            return fail("hops", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.withheld_fraction) {
            return fail("withheld_fraction", "must lie in [0, 1)");
        }
        if self.insert_round == Some(0) {
            return fail("insert_round", "must be at least 1");
        }
        if let Some(f) = self.propensity_floor {
            if !(f > 0.0 && f <= 1.0) {
                return fail("propensity_floor", "must lie in (0, 1]");
            }
        }
        if self.variant == Variant::Multihop {
            if let UpdateMode::Batched { .. } = self.update_mode {
                return fail("update_mode", "batched updates are not available for multi-hop");
            }
        }
        None
    }

    fn validate(&self) -> Result<()> {
        match self.check() {
            Some((key, msg)) => Err(Error::InvalidConfig(format!("{key}: {msg}"))),
            None => Ok(()),
        }
    }

    fn hops_per_query(&self) -> usize {
        if self.variant == Variant::Multihop {
            self.hops
        } else {
            1
        }
    }

    fn same_environment(&self, other: &EpisodeConfig) -> bool {
        self.horizon == other.horizon
            && self.num_items == other.num_items
            && self.dim == other.dim
            && self.repeat_passes == other.repeat_passes
            && self.query_noise == other.query_noise
            && self.shift == other.shift
            && self.hops_per_query() == other.hops_per_query()
            && self.withheld_fraction == other.withheld_fraction
    }

    /// Total rounds `T × repeat_passes`.
    pub fn total_rounds(&self) -> u64 {
        (self.horizon * self.repeat_passes) as u64
    }
}

/// One sub-query and the latent cluster it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct SubQuery {
    pub cluster: usize,
    pub query: QueryEmbedding,
}

#[derive(Clone, Debug)]
struct BaseQuery {
    id: String,
    hops: Vec<SubQuery>,
}

/// View of one round of the stream.
#[derive(Clone, Copy, Debug)]
pub struct RoundView<'a> {
    pub query_id: &'a str,
    pub subqueries: &'a [SubQuery],
}

/// A seeded synthetic environment: latent item directions, the query stream,
/// the optional distribution shift and the dynamic-catalog hold-out set.
#[derive(Clone, Debug)]
pub struct Environment {
    config: EpisodeConfig,
    seed: u64,
    items: Vec<ItemId>,
    latents: Vec<f64>,
    queries: Vec<BaseQuery>,
    order: Vec<usize>,
    shift_targets: Vec<usize>,
    late_items: Vec<usize>,
}

fn item_id(index: usize) -> ItemId {
    ItemId::new(format!("item{index:05}"))
}

fn normalize(v: &mut [f64]) {
    let n = l2_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn noisy_copy(base: &[f64], sigma: f64, rng: &mut RandomSource) -> Vec<f64> {
    if sigma == 0.0 {
        return base.to_vec();
    }
    let mut v: Vec<f64> = base.iter().map(|x| x + sigma * rng.normal()).collect();
    normalize(&mut v);
    v
}

/// Builds the environment for `config` under `seed`.
pub fn make_environment(config: &EpisodeConfig, seed: u64) -> Result<Environment> {
    config.validate()?;
    let (n, d) = (config.num_items, config.dim);

    let mut rng = RandomSource::with_stream(seed, STREAM_LATENT);
    let mut latents = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        normalize(&mut v);
        latents.extend(v);
    }

    let hops = config.hops_per_query();
    let mut rng = RandomSource::with_stream(seed, STREAM_QUERIES);
    let queries = (0..config.horizon)
        .map(|j| {
            let id = format!("q{j:06}");
            let subs = (0..hops)
                .map(|h| {
                    let cluster = rng.below(n);
                    let vector = noisy_copy(&latents[cluster * d..(cluster + 1) * d], config.query_noise, &mut rng);
                    let qid = if hops == 1 { id.clone() } else { format!("{id}/h{h}") };
                    SubQuery {
                        cluster,
                        query: QueryEmbedding::new(qid, vector),
                    }
                })
                .collect();
            BaseQuery { id, hops: subs }
        })
        .collect();

    let mut shift_targets: Vec<usize> = (0..n).collect();
    if let Some(shift) = config.shift {
        let mut rng = RandomSource::with_stream(seed, STREAM_SHIFT);
        let moved = ((shift.fraction * n as f64).round() as usize).min(n);
        let mut clusters: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut clusters);
        if n > 1 {
            for &c in &clusters[..moved] {
                let other = rng.below(n - 1);
                shift_targets[c] = if other >= c { other + 1 } else { other };
            }
        }
    }

    let mut late_items = Vec::new();
    if config.variant == Variant::Dynamic {
        let mut rng = RandomSource::with_stream(seed, STREAM_WITHHOLD);
        let held = ((config.withheld_fraction * n as f64).round() as usize).min(n - 1);
        let mut all: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut all);
        late_items = all[..held].to_vec();
        late_items.sort_unstable();
    }

    let mut order: Vec<usize> = (0..config.horizon).collect();
    let mut rng = RandomSource::with_stream(seed, STREAM_PASSES);
    for _ in 1..config.repeat_passes {
        let mut pass: Vec<usize> = (0..config.horizon).collect();
        rng.shuffle(&mut pass);
        order.extend(pass);
    }

    Ok(Environment {
        config: config.clone(),
        seed,
        items: (0..n).map(item_id).collect(),
        latents,
        queries,
        order,
        shift_targets,
        late_items,
    })
}

impl Environment {
    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn latent(&self, index: usize) -> &[f64] {
        let d = self.config.dim;
        &self.latents[index * d..(index + 1) * d]
    }

    fn item_index(&self, id: &str) -> Option<usize> {
        self.items.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    /// Items withheld until the insertion round (dynamic variant only).
    pub fn late_items(&self) -> Vec<ItemId> {
        self.late_items.iter().map(|&i| self.items[i].clone()).collect()
    }

    pub fn num_rounds(&self) -> u64 {
        self.order.len() as u64
    }

    /// Round `t` (1-based) of the stream.
    pub fn round(&self, t: u64) -> Result<RoundView<'_>> {
        let base = t
            .checked_sub(1)
            .and_then(|i| self.order.get(i as usize))
            .map(|&j| &self.queries[j])
            .ok_or(Error::UndefinedRound(t))?;
        Ok(RoundView {
            query_id: &base.id,
            subqueries: &base.hops,
        })
    }

    fn target_of(&self, t: u64, cluster: usize) -> usize {
        match self.config.shift {
            Some(s) if t >= s.round => self.shift_targets[cluster],
            _ => cluster,
        }
    }

    /// Ground-truth item of hop `hop` in round `t`.
    pub fn target(&self, t: u64, hop: usize) -> Result<ItemId> {
        let view = self.round(t)?;
        let sub = view.subqueries.get(hop).ok_or(Error::UndefinedRound(t))?;
        Ok(self.items[self.target_of(t, sub.cluster)].clone())
    }

    /// `𝟙{chosen = i*_t}` for the first (or only) hop of round `t`.
    pub fn feedback_oracle(&self, t: u64, chosen: &ItemId) -> Result<bool> {
        self.feedback_hop(t, 0, chosen)
    }

    pub fn feedback_hop(&self, t: u64, hop: usize, chosen: &ItemId) -> Result<bool> {
        Ok(self.target(t, hop)? == *chosen)
    }

    /// Base query list (one pass, first hop) with the targets valid at round 1.
    pub fn base_queries(&self) -> Vec<LabeledQuery> {
        self.queries
            .iter()
            .map(|b| LabeledQuery {
                query: b.hops[0].query.clone(),
                target: self.items[self.target_of(1, b.hops[0].cluster)].clone(),
            })
            .collect()
    }

    /// Draws `n` fresh queries from the query model on a stream separate from
    /// the episode's, labelled with the targets valid at round `t`.
    pub fn sample_queries(&self, n: usize, t: u64, seed: u64) -> Vec<LabeledQuery> {
        let d = self.config.dim;
        let mut rng = RandomSource::with_stream(seed, STREAM_PROBES);
        (0..n)
            .map(|j| {
                let cluster = rng.below(self.items.len());
                let vector = noisy_copy(&self.latents[cluster * d..(cluster + 1) * d], self.config.query_noise, &mut rng);
                LabeledQuery {
                    query: QueryEmbedding::new(format!("probe{j:06}"), vector),
                    target: self.items[self.target_of(t, cluster)].clone(),
                }
            })
            .collect()
    }

    /// Initial embedding of item `index`: `normalize(latent + σ_init·ξ)` with a
    /// per-item noise stream, so the result does not depend on call order.
    pub fn init_row(&self, index: usize, init_noise: f64) -> Vec<f64> {
        let mut rng = RandomSource::with_stream(self.seed, STREAM_INIT_BASE + index as u64);
        noisy_copy(self.latent(index), init_noise, &mut rng)
    }

    fn catalog_from(&self, init_noise: f64, keep: impl Fn(usize) -> bool) -> Result<Catalog> {
        let rows = (0..self.items.len())
            .filter(|&i| keep(i))
            .map(|i| (self.items[i].clone(), self.init_row(i, init_noise)));
        Ok(Catalog::new(self.config.dim, rows)?.with_projection(self.config.projection))
    }
}

/// `Θ₁` with rows `normalize(latent_i + σ_init·ξ_i)`; `σ_init = 0` gives the
/// latent directions themselves.
pub fn initial_catalog(env: &Environment, init_noise: f64) -> Result<Catalog> {
    if !(init_noise.is_finite() && init_noise >= 0.0) {
        return Err(Error::InvalidArgument("init noise must be non-negative".into()));
    }
    env.catalog_from(init_noise, |_| true)
}

/// [`InitEmbedder`] that draws from the environment's noisy-latent rule.
pub struct NoisyLatentInit<'a> {
    pub env: &'a Environment,
    pub init_noise: f64,
}

impl InitEmbedder for NoisyLatentInit<'_> {
    fn init_embedding(&mut self, id: &ItemId, dim: usize) -> Result<Vec<f64>> {
        if dim != self.env.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.env.dim(),
                found: dim,
            });
        }
        let index = self
            .env
            .item_index(id.as_str())
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        Ok(self.env.init_row(index, self.init_noise))
    }
}

/// Query and ground truth behind one event record.
#[derive(Clone, Debug)]
pub struct StepContext {
    pub round: u64,
    pub hop: usize,
    pub query: QueryEmbedding,
    pub target: ItemId,
}

/// Outcome of one episode.
#[derive(Clone, Debug)]
pub struct EpisodeLog {
    pub records: Vec<EventRecord>,
    /// Parallel to `records`.
    pub contexts: Vec<StepContext>,
    /// Per round; for multi-hop, whether every hop succeeded.
    pub round_success: Vec<bool>,
    pub initial_catalog: Catalog,
    pub final_catalog: Catalog,
    /// Catalog right after the dynamic insertion, before that round's update.
    pub insertion_catalog: Option<Catalog>,
    pub insert_round: Option<u64>,
    pub late_items: Vec<ItemId>,
    /// Largest query norm seen (`q̄` of the boundedness assumption).
    pub query_norm_bound: f64,
}

impl EpisodeLog {
    pub fn successes(&self) -> &[bool] {
        &self.round_success
    }

    pub fn accuracy(&self) -> f64 {
        let hits = self.round_success.iter().filter(|&&s| s).count();
        hits as f64 / self.round_success.len().max(1) as f64
    }

    /// Full-information view of the stream, in order.
    pub fn labeled_queries(&self) -> Vec<LabeledQuery> {
        self.contexts
            .iter()
            .map(|c| LabeledQuery {
                query: c.query.clone(),
                target: c.target.clone(),
            })
            .collect()
    }

    /// Per-record online loss; errors on the first record without one.
    pub fn online_losses(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.loss.ok_or(Error::MissingGroundTruth(r.t)))
            .collect()
    }
}

struct Runner<'e> {
    config: &'e EpisodeConfig,
    learner: Learner,
    rng: RandomSource,
    reranker: StubReranker,
    catalog: Catalog,
    log: EpisodeLog,
}

impl<'e> Runner<'e> {
    fn new(config: &'e EpisodeConfig, seed: u64, catalog: Catalog) -> Result<Self> {
        let mut learner = Learner::new(config.schedule, config.update_mode)?;
        if let Some(f) = config.propensity_floor {
            learner = learner.with_propensity_floor(f)?;
        }
        Ok(Runner {
            config,
            learner,
            rng: RandomSource::with_stream(seed, STREAM_POLICY),
            reranker: StubReranker::new(config.reranker_accuracy)?,
            log: EpisodeLog {
                records: Vec::new(),
                contexts: Vec::new(),
                round_success: Vec::new(),
                initial_catalog: catalog.clone(),
                final_catalog: catalog.clone(),
                insertion_catalog: None,
                insert_round: None,
                late_items: Vec::new(),
                query_norm_bound: 0.0,
            },
            catalog,
        })
    }

    fn record(&mut self, round: &crate::learner::Round, query: &QueryEmbedding, target: &ItemId, t: u64, hop: usize) {
        let loss = round
            .probabilities
            .get(target.as_str())
            .map(|p| -p.ln())
            .filter(|l| l.is_finite());
        let seq = self.log.records.len() as u64 + 1;
        self.log.records.push(EventRecord {
            t: seq,
            query_id: query.id.clone(),
            chosen: round.feedback.chosen.clone(),
            success: round.feedback.success,
            propensity: round.feedback.propensity,
            eta: round.eta,
            loss,
            generation: Some(round.probabilities.generation()),
        });
        self.log.contexts.push(StepContext {
            round: t,
            hop,
            query: query.clone(),
            target: target.clone(),
        });
        self.log.query_norm_bound = self.log.query_norm_bound.max(query.norm());
    }

    /// One plain or reranked round.
    fn single(&mut self, t: u64, query: &QueryEmbedding, target: &ItemId) -> Result<()> {
        let mut judge = |_: &QueryEmbedding, c: &ItemId| c == target;
        let round = match self.config.variant {
            Variant::Rerank => {
                self.reranker.set_target(Some(target.clone()));
                step_with_rerank(
                    &mut self.learner,
                    query,
                    &mut self.catalog,
                    self.config.k,
                    &mut self.reranker,
                    &mut self.rng,
                    t,
                    &mut judge,
                )?
                .round
            }
            _ => self.learner.step(query, &mut self.catalog, &mut self.rng, t, &mut judge)?,
        };
        self.record(&round, query, target, t, 0);
        self.log.round_success.push(round.feedback.success);
        Ok(())
    }

    fn finish(mut self, t_last: u64) -> Result<EpisodeLog> {
        self.learner.flush(&mut self.catalog, t_last.max(1))?;
        self.log.final_catalog = self.catalog;
        Ok(self.log)
    }
}

/// Runs the configured variant over every round of `env`.
pub fn run_episode(env: &Environment, config: &EpisodeConfig) -> Result<EpisodeLog> {
    config.validate()?;
    if !env.config().same_environment(config) {
        return Err(Error::InvalidConfig(
            "episode configuration does not match the environment".into(),
        ));
    }
    let total = env.num_rounds();
    let late = if config.variant == Variant::Dynamic {
        env.late_items.clone()
    } else {
        Vec::new()
    };
    let start = env.catalog_from(config.init_noise, |i| late.binary_search(&i).is_err())?;
    let mut runner = Runner::new(config, env.seed(), start)?;
    let insert_round = (config.variant == Variant::Dynamic)
        .then(|| config.insert_round.unwrap_or(total / 2 + 1));
    runner.log.insert_round = insert_round;
    runner.log.late_items = late.iter().map(|&i| env.items[i].clone()).collect();

    for t in 1..=total {
        let view = env.round(t)?;
        match config.variant {
            Variant::Plain | Variant::Rerank => {
                let target = env.target(t, 0)?;
                runner.single(t, &view.subqueries[0].query, &target)?;
            }
            Variant::Dynamic => {
                if insert_round == Some(t) && !late.is_empty() {
                    let delta = CatalogDelta {
                        added: runner
                            .log
                            .late_items
                            .iter()
                            .map(|id| NewItem { id: id.clone(), init: None })
                            .collect(),
                        removed: Vec::new(),
                        effective_at: t,
                    };
                    let mut init = NoisyLatentInit {
                        env,
                        init_noise: config.init_noise,
                    };
                    apply_delta(&mut runner.learner, &delta, &mut init, &mut runner.catalog)?;
                    runner.log.insertion_catalog = Some(runner.catalog.clone());
                }
                let target = env.target(t, 0)?;
                runner.single(t, &view.subqueries[0].query, &target)?;
            }
            Variant::Multihop => {
                let task = MultiHopRound {
                    subqueries: view.subqueries.iter().map(|s| s.query.clone()).collect(),
                };
                let targets = (0..task.subqueries.len())
                    .map(|h| env.target(t, h))
                    .collect::<Result<Vec<_>>>()?;
                let hops = step_multihop(
                    &mut runner.learner,
                    &task,
                    &mut runner.catalog,
                    &mut runner.rng,
                    t,
                    &mut |h: usize, _: &QueryEmbedding, c: &ItemId| *c == targets[h],
                )?;
                let mut chain = true;
                for hop in &hops {
                    runner.record(&hop.round, &task.subqueries[hop.hop], &targets[hop.hop], t, hop.hop);
                    chain &= hop.round.feedback.success;
                }
                runner.log.round_success.push(chain);
            }
        }
    }
    runner.finish(total)
}

/// Runs the learner over a recorded stream (for example an ingested embedding
/// dump). Supports the plain and rerank variants; passes after the first are
/// reshuffled with `seed`.
pub fn replay(
    stream: &[LabeledQuery],
    catalog: Catalog,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeLog> {
    if stream.is_empty() {
        return Err(Error::EmptyEvents);
    }
    if !matches!(config.variant, Variant::Plain | Variant::Rerank) {
        return Err(Error::InvalidConfig(
            "replay supports the plain and rerank variants".into(),
        ));
    }
    if config.k < 1 || config.k > catalog.len() {
        return Err(Error::InvalidConfig(format!(
            "K: must satisfy 1 <= K <= I (I = {})",
            catalog.len()
        )));
    }
    let catalog = catalog.with_projection(config.projection);
    let mut runner = Runner::new(config, seed, catalog)?;
    let mut order: Vec<usize> = (0..stream.len()).collect();
    let mut rng = RandomSource::with_stream(seed, STREAM_PASSES);
    for _ in 1..config.repeat_passes.max(1) {
        let mut pass: Vec<usize> = (0..stream.len()).collect();
        rng.shuffle(&mut pass);
        order.extend(pass);
    }
    for (i, &j) in order.iter().enumerate() {
        let ev = &stream[j];
        runner.single(i as u64 + 1, &ev.query, &ev.target)?;
    }
    runner.finish(order.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::top1_accuracy;

    fn small(variant: Variant) -> EpisodeConfig {
        EpisodeConfig {
            horizon: 200,
            num_items: 6,
            dim: 4,
            variant,
            schedule: LearningRateSchedule::inverse_sqrt(0.5).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn latents_are_unit_and_noiseless_queries_match() {
        let cfg = EpisodeConfig {
            query_noise: 0.0,
            ..small(Variant::Plain)
        };
        let env = make_environment(&cfg, 3).unwrap();
        for i in 0..cfg.num_items {
            assert!((l2_norm(env.latent(i)) - 1.0).abs() < 1e-12);
        }
        for t in 1..=env.num_rounds() {
            let sub = &env.round(t).unwrap().subqueries[0];
            assert_eq!(sub.query.vector, env.latent(sub.cluster));
        }
    }

    #[test]
    fn environment_is_deterministic() {
        let cfg = small(Variant::Plain);
        let a = make_environment(&cfg, 42).unwrap();
        let b = make_environment(&cfg, 42).unwrap();
        assert_eq!(a.latents, b.latents);
        for t in 1..=a.num_rounds() {
            assert_eq!(a.round(t).unwrap().subqueries, b.round(t).unwrap().subqueries);
        }
        let c = make_environment(&cfg, 43).unwrap();
        assert_ne!(a.latents, c.latents);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = EpisodeConfig {
            k: 7,
            ..small(Variant::Rerank)
        };
        assert!(matches!(make_environment(&cfg, 1), Err(Error::InvalidConfig(m)) if m.starts_with("K")));
        let cfg = EpisodeConfig {
            horizon: 0,
            ..small(Variant::Plain)
        };
        assert!(make_environment(&cfg, 1).is_err());
    }

    #[test]
    fn initial_catalog_rules() {
        let cfg = EpisodeConfig {
            projection: ProjectionMode::UnitBall,
            ..small(Variant::Plain)
        };
        let env = make_environment(&cfg, 5).unwrap();
        let exact = initial_catalog(&env, 0.0).unwrap();
        for (i, (_, row)) in exact.rows().enumerate() {
            assert_eq!(row, env.latent(i));
        }
        let noisy = initial_catalog(&env, 2.0).unwrap();
        assert!(noisy.max_row_norm() <= 1.0 + 1e-12);
        assert_eq!(noisy.projection(), ProjectionMode::UnitBall);
    }

    #[test]
    fn feedback_oracle_and_shift() {
        let cfg = EpisodeConfig {
            shift: Some(DistributionShift { round: 101, fraction: 1.0 }),
            ..small(Variant::Plain)
        };
        let env = make_environment(&cfg, 9).unwrap();
        for t in [1, 100] {
            let star = env.target(t, 0).unwrap();
            let cluster = env.round(t).unwrap().subqueries[0].cluster;
            assert_eq!(star, env.items()[cluster]);
            assert!(env.feedback_oracle(t, &star).unwrap());
            let other = env.items().iter().find(|i| **i != star).unwrap();
            assert!(!env.feedback_oracle(t, other).unwrap());
        }
        // Every cluster is remapped after the shift.
        for t in 101..=200 {
            let cluster = env.round(t).unwrap().subqueries[0].cluster;
            let star = env.target(t, 0).unwrap();
            assert_ne!(star, env.items()[cluster]);
            assert!(env.feedback_oracle(t, &star).unwrap());
        }
        assert!(matches!(
            env.feedback_oracle(201, &env.items()[0]),
            Err(Error::UndefinedRound(201))
        ));
        assert!(matches!(env.feedback_oracle(0, &env.items()[0]), Err(Error::UndefinedRound(0))));
    }

    #[test]
    fn repeat_passes_cycle_the_list() {
        let cfg = EpisodeConfig {
            horizon: 30,
            repeat_passes: 3,
            ..small(Variant::Plain)
        };
        let env = make_environment(&cfg, 2).unwrap();
        assert_eq!(env.num_rounds(), 90);
        let mut ids: Vec<&str> = (61..=90).map(|t| env.round(t).unwrap().query_id).collect();
        ids.sort();
        let mut first: Vec<&str> = (1..=30).map(|t| env.round(t).unwrap().query_id).collect();
        first.sort();
        assert_eq!(ids, first);
        let log = run_episode(&env, &cfg).unwrap();
        assert_eq!(log.records.len(), 90);
    }

    #[test]
    fn episodes_replay_bitwise() {
        for variant in [Variant::Plain, Variant::Rerank, Variant::Dynamic, Variant::Multihop] {
            let cfg = EpisodeConfig {
                k: 3,
                ..small(variant)
            };
            let env = make_environment(&cfg, 17).unwrap();
            let a = run_episode(&env, &cfg).unwrap();
            let b = run_episode(&env, &cfg).unwrap();
            assert_eq!(a.records, b.records);
            assert_eq!(a.final_catalog.data(), b.final_catalog.data());
        }
    }

    #[test]
    fn multihop_records_every_hop() {
        let cfg = EpisodeConfig {
            hops: 3,
            ..small(Variant::Multihop)
        };
        let env = make_environment(&cfg, 1).unwrap();
        let log = run_episode(&env, &cfg).unwrap();
        assert_eq!(log.records.len(), 600);
        assert_eq!(log.round_success.len(), 200);
        let ts: Vec<u64> = log.records.iter().map(|r| r.t).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log.records[1].query_id, format!("{}", log.contexts[1].query.id));
    }

    #[test]
    fn dynamic_support_matches_live_items() {
        let cfg = small(Variant::Dynamic);
        let env = make_environment(&cfg, 4).unwrap();
        let log = run_episode(&env, &cfg).unwrap();
        let late = &log.late_items;
        assert_eq!(late.len(), 3);
        assert_eq!(log.initial_catalog.len(), 3);
        let insert = log.insert_round.unwrap();
        for (rec, ctx) in log.records.iter().zip(&log.contexts) {
            let is_late = late.contains(&rec.chosen);
            assert!(!is_late || ctx.round >= insert, "ghost item chosen at round {}", ctx.round);
            if late.contains(&ctx.target) && ctx.round < insert {
                assert!(rec.loss.is_none());
            }
        }
        assert_eq!(log.insertion_catalog.as_ref().unwrap().len(), 6);
        assert_eq!(log.final_catalog.len(), 6);
    }

    #[test]
    fn perfect_init_beats_corrupted_init_top1() {
        let cfg = EpisodeConfig {
            num_items: 50,
            dim: 16,
            query_noise: 0.3,
            ..small(Variant::Plain)
        };
        let env = make_environment(&cfg, 21).unwrap();
        let probes = env.sample_queries(10_000, 1, 99);
        let good = top1_accuracy(&initial_catalog(&env, 0.0).unwrap(), &probes).unwrap();
        let bad = top1_accuracy(&initial_catalog(&env, 1.0).unwrap(), &probes).unwrap();
        assert!(good > bad, "good {good} bad {bad}");
    }

    #[test]
    fn huge_init_noise_is_chance_level() {
        let cfg = EpisodeConfig {
            num_items: 10,
            dim: 8,
            ..small(Variant::Plain)
        };
        // Average over a few environments: one random catalog can be lucky.
        let mut acc = 0.0;
        let seeds = 5;
        for s in 0..seeds {
            let env = make_environment(&cfg, 100 + s).unwrap();
            let probes = env.sample_queries(10_000, 1, 7 + s);
            acc += top1_accuracy(&initial_catalog(&env, 100.0).unwrap(), &probes).unwrap();
        }
        acc /= seeds as f64;
        assert!((acc - 0.1).abs() < 0.05, "accuracy {acc}");
    }

    #[test]
    fn replay_runs_a_stream() {
        let cfg = small(Variant::Plain);
        let env = make_environment(&cfg, 8).unwrap();
        let stream = env.base_queries();
        let cat = initial_catalog(&env, 0.5).unwrap();
        let a = replay(&stream, cat.clone(), &cfg, 1).unwrap();
        let b = replay(&stream, cat.clone(), &cfg, 1).unwrap();
        assert_eq!(a.records.len(), stream.len());
        assert_eq!(a.records, b.records);
        let dyn_cfg = small(Variant::Dynamic);
        assert!(replay(&stream, cat, &dyn_cfg, 1).is_err());
    }
}
