//! Deployment variants built on the core learner: K candidates with a
//! reranker, a catalog whose membership changes between rounds, and
//! multi-hop retrieval with per-hop judge feedback.

use std::collections::BTreeSet;

use crate::catalog::{Catalog, ItemId};
use crate::error::{Error, Result};
use crate::learner::{Judge, Learner, Round, UpdateMode};
use crate::policy::{sample_k_indices, sample_one_index, score, QueryEmbedding, RandomSource};

/// Picks the final item among sampled candidates.
pub trait Reranker {
    /// Returns an index into `candidates`.
    fn rerank(
        &mut self,
        query: &QueryEmbedding,
        candidates: &[ItemId],
        rng: &mut RandomSource,
    ) -> usize;
}

/// Uniformly random choice; a singleton set consumes no randomness.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformReranker;

impl Reranker for UniformReranker {
    fn rerank(&mut self, _: &QueryEmbedding, candidates: &[ItemId], rng: &mut RandomSource) -> usize {
        if candidates.len() == 1 {
            0
        } else {
            rng.below(candidates.len())
        }
    }
}

/// Simulated reranker of strength `alpha`: with probability `alpha` it returns
/// the current target when the target is among the candidates, otherwise a
/// uniform candidate.
#[derive(Clone, Debug)]
pub struct StubReranker {
    alpha: f64,
    target: Option<ItemId>,
}

impl StubReranker {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(StubReranker { alpha, target: None })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Ground truth for the upcoming round.
    pub fn set_target(&mut self, target: Option<ItemId>) {
        self.target = target;
    }
}

impl Reranker for StubReranker {
    fn rerank(&mut self, query: &QueryEmbedding, candidates: &[ItemId], rng: &mut RandomSource) -> usize {
        if let Some(pos) = self
            .target
            .as_ref()
            .and_then(|t| candidates.iter().position(|c| c == t))
        {
            if rng.uniform() < self.alpha {
                return pos;
            }
        }
        UniformReranker.rerank(query, candidates, rng)
    }
}

/// Learner round plus the candidate set the reranker saw.
#[derive(Clone, Debug)]
pub struct RerankRound {
    pub round: Round,
    pub candidates: Vec<ItemId>,
}

/// Samples `k` candidates without replacement, lets the reranker choose, and
/// updates with the chosen item's single-draw softmax probability as the
/// importance weight.
#[allow(clippy::too_many_arguments)]
pub fn step_with_rerank(
    learner: &mut Learner,
    query: &QueryEmbedding,
    catalog: &mut Catalog,
    k: usize,
    reranker: &mut impl Reranker,
    rng: &mut RandomSource,
    t: u64,
    judge: &mut impl Judge,
) -> Result<RerankRound> {
    if k > catalog.len() {
        return Err(Error::KTooLarge {
            k,
            items: catalog.len(),
        });
    }
    let p = score(query, catalog)?;
    let candidates: Vec<ItemId> = sample_k_indices(&p, k, rng)?
        .into_iter()
        .map(|i| p.id(i).clone())
        .collect();
    let pick = reranker.rerank(query, &candidates, rng);
    let chosen = candidates
        .get(pick)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("reranker returned index {pick} of {}", candidates.len())))?;
    let success = judge.judge(query, &chosen);
    let round = learner.observe(query, catalog, p, chosen, success, t)?;
    Ok(RerankRound { round, candidates })
}

/// Produces the initial embedding of an item entering the catalog.
pub trait InitEmbedder {
    fn init_embedding(&mut self, id: &ItemId, dim: usize) -> Result<Vec<f64>>;
}

/// An item entering the catalog; `init: None` defers to the [`InitEmbedder`].
#[derive(Clone, Debug, PartialEq)]
pub struct NewItem {
    pub id: ItemId,
    pub init: Option<Vec<f64>>,
}

/// Membership change that takes effect at the start of round `effective_at`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CatalogDelta {
    pub added: Vec<NewItem>,
    pub removed: Vec<ItemId>,
    pub effective_at: u64,
}

impl CatalogDelta {
    pub fn empty(effective_at: u64) -> Self {
        CatalogDelta {
            effective_at,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Validates and applies a delta: removals first, then additions. Any pending
/// batched events are flushed against the pre-delta catalog. Nothing is
/// mutated if validation fails.
pub fn apply_delta(
    learner: &mut Learner,
    delta: &CatalogDelta,
    embedder: &mut impl InitEmbedder,
    catalog: &mut Catalog,
) -> Result<()> {
    let removed: BTreeSet<&str> = delta.removed.iter().map(|i| i.as_str()).collect();
    if removed.len() != delta.removed.len() {
        return Err(Error::InvalidArgument("item removed twice in one delta".into()));
    }
    for id in &delta.removed {
        if !catalog.contains(id.as_str()) {
            return Err(Error::UnknownId(id.to_string()));
        }
    }
    let mut seen = BTreeSet::new();
    for item in &delta.added {
        if removed.contains(item.id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "item `{}` both added and removed",
                item.id
            )));
        }
        if catalog.is_retired(item.id.as_str()) {
            return Err(Error::IdRetired(item.id.to_string()));
        }
        if catalog.contains(item.id.as_str()) || !seen.insert(item.id.as_str()) {
            return Err(Error::DuplicateId(item.id.to_string()));
        }
        if let Some(v) = &item.init {
            if v.len() != catalog.dim() {
                return Err(Error::DimensionMismatch {
                    expected: catalog.dim(),
                    found: v.len(),
                });
            }
        }
    }
    if delta.is_empty() {
        return Ok(());
    }
    let inits = delta
        .added
        .iter()
        .map(|item| match &item.init {
            Some(v) => Ok(v.clone()),
            None => embedder.init_embedding(&item.id, catalog.dim()),
        })
        .collect::<Result<Vec<_>>>()?;

    learner.flush(catalog, delta.effective_at.saturating_sub(1).max(1))?;
    for id in &delta.removed {
        catalog.remove_item(id.as_str())?;
    }
    for (item, init) in delta.added.iter().zip(inits) {
        catalog.add_item(item.id.clone(), &init)?;
    }
    Ok(())
}

/// Round record with the membership change that preceded it.
#[derive(Clone, Debug)]
pub struct DynamicRound {
    pub round: Round,
    pub added: Vec<ItemId>,
    pub removed: Vec<ItemId>,
}

/// Applies `delta`, then runs the plain learner step over the current items.
#[allow(clippy::too_many_arguments)]
pub fn step_dynamic(
    learner: &mut Learner,
    delta: &CatalogDelta,
    embedder: &mut impl InitEmbedder,
    query: &QueryEmbedding,
    catalog: &mut Catalog,
    rng: &mut RandomSource,
    t: u64,
    judge: &mut impl Judge,
) -> Result<DynamicRound> {
    if delta.effective_at != t {
        return Err(Error::InvalidArgument(format!(
            "delta is effective at round {}, stepping round {t}",
            delta.effective_at
        )));
    }
    apply_delta(learner, delta, embedder, catalog)?;
    let round = learner.step(query, catalog, rng, t, judge)?;
    Ok(DynamicRound {
        round,
        added: delta.added.iter().map(|i| i.id.clone()).collect(),
        removed: delta.removed.clone(),
    })
}

/// Per-hop success signal `y_{t,h}`.
pub trait HopJudge {
    fn judge(&mut self, hop: usize, subquery: &QueryEmbedding, chosen: &ItemId) -> bool;
}

impl<F> HopJudge for F
where
    F: FnMut(usize, &QueryEmbedding, &ItemId) -> bool,
{
    fn judge(&mut self, hop: usize, subquery: &QueryEmbedding, chosen: &ItemId) -> bool {
        self(hop, subquery, chosen)
    }
}

/// Ordered sub-task embeddings of one multi-hop task.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiHopRound {
    pub subqueries: Vec<QueryEmbedding>,
}

#[derive(Clone, Debug)]
pub struct HopRound {
    pub hop: usize,
    pub round: Round,
}

/// Runs the learner once per sub-query, each hop scoring against the catalog
/// already updated by the previous hop. The whole round uses `η_t`.
pub fn step_multihop(
    learner: &mut Learner,
    task: &MultiHopRound,
    catalog: &mut Catalog,
    rng: &mut RandomSource,
    t: u64,
    judge: &mut impl HopJudge,
) -> Result<Vec<HopRound>> {
    if task.subqueries.is_empty() {
        return Err(Error::InvalidArgument("multi-hop round has no sub-queries".into()));
    }
    if let UpdateMode::Batched { .. } = learner.mode() {
        return Err(Error::InvalidConfig(
            "multi-hop rounds update between hops; batched mode is not supported".into(),
        ));
    }
    for q in &task.subqueries {
        q.validate(catalog.dim())?;
    }
    let mut out = Vec::with_capacity(task.subqueries.len());
    for (hop, q) in task.subqueries.iter().enumerate() {
        let p = score(q, catalog)?;
        let idx = sample_one_index(&p, rng);
        let chosen = p.id(idx).clone();
        let y = judge.judge(hop, q, &chosen);
        let round = learner.observe(q, catalog, p, chosen, y, t)?;
        out.push(HopRound { hop, round });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::dot;
    use crate::learner::LearningRateSchedule;
    use crate::policy::ordered_draw_probability;

    fn id(s: &str) -> ItemId {
        ItemId::new(s)
    }

    fn catalog() -> Catalog {
        Catalog::new(
            2,
            [
                (id("a"), vec![0.5, 0.1]),
                (id("b"), vec![-0.2, 0.4]),
                (id("c"), vec![0.0, -0.3]),
                (id("d"), vec![0.3, 0.3]),
            ],
        )
        .unwrap()
    }

    fn learner() -> Learner {
        Learner::new(LearningRateSchedule::constant(0.3).unwrap(), UpdateMode::Full).unwrap()
    }

    struct NoInit;
    impl InitEmbedder for NoInit {
        fn init_embedding(&mut self, _: &ItemId, dim: usize) -> Result<Vec<f64>> {
            Ok(vec![0.0; dim])
        }
    }

    #[test]
    fn rerank_k1_uniform_matches_plain_step_bitwise() {
        let q = QueryEmbedding::new("q", vec![0.8, -0.4]);
        let (mut c1, mut c2) = (catalog(), catalog());
        let (mut l1, mut l2) = (learner(), learner());
        let (mut r1, mut r2) = (RandomSource::new(11), RandomSource::new(11));
        let mut judge = |_: &QueryEmbedding, c: &ItemId| c.as_str() == "b";
        for t in 1..=50 {
            let a = l1.step(&q, &mut c1, &mut r1, t, &mut judge).unwrap();
            let b = step_with_rerank(&mut l2, &q, &mut c2, 1, &mut UniformReranker, &mut r2, t, &mut judge).unwrap();
            assert_eq!(a.feedback, b.round.feedback);
        }
        assert_eq!(c1.data(), c2.data());
    }

    #[test]
    fn rerank_k1_distribution_by_enumeration() {
        // With K = 1 the candidate is the single draw, so P(i_t = j) is the
        // probability of the one-element sequence [j]; the update for a given
        // choice must match the plain learner's update for that choice.
        let q = QueryEmbedding::new("q", vec![0.8, -0.4]);
        let base = catalog();
        let p = score(&q, &base).unwrap();
        for j in 0..base.len() {
            assert!((ordered_draw_probability(p.probs(), &[j]) - p.probs()[j]).abs() < 1e-15);
            let chosen = p.id(j).clone();
            let success = chosen.as_str() == "c";
            let mut plain = base.clone();
            learner().observe(&q, &mut plain, p.clone(), chosen.clone(), success, 1).unwrap();
            let mut reranked = base.clone();
            let mut single = RandomSource::new(0);
            let pick = UniformReranker.rerank(&q, std::slice::from_ref(&chosen), &mut single);
            assert_eq!(pick, 0);
            learner().observe(&q, &mut reranked, p.clone(), chosen, success, 1).unwrap();
            assert_eq!(plain.data(), reranked.data());
        }
    }

    #[test]
    fn oracle_reranker_succeeds_when_target_sampled() {
        let q = QueryEmbedding::new("q", vec![0.1, 0.2]);
        let mut c = catalog();
        let mut rr = StubReranker::new(1.0).unwrap();
        rr.set_target(Some(id("c")));
        let mut rng = RandomSource::new(4);
        for t in 1..=30 {
            let r = step_with_rerank(&mut learner(), &q, &mut c, 4, &mut rr, &mut rng, t, &mut |_: &QueryEmbedding, x: &ItemId| x.as_str() == "c").unwrap();
            assert!(r.round.feedback.success);
            assert_eq!(r.candidates.len(), 4);
        }
        assert!(matches!(
            step_with_rerank(&mut learner(), &q, &mut c, 5, &mut rr, &mut rng, 1, &mut |_: &QueryEmbedding, _: &ItemId| true),
            Err(Error::KTooLarge { k: 5, items: 4 })
        ));
    }

    #[test]
    fn dynamic_empty_delta_matches_step() {
        let q = QueryEmbedding::new("q", vec![0.8, -0.4]);
        let (mut c1, mut c2) = (catalog(), catalog());
        let (mut l1, mut l2) = (learner(), learner());
        let (mut r1, mut r2) = (RandomSource::new(2), RandomSource::new(2));
        let mut judge = |_: &QueryEmbedding, c: &ItemId| c.as_str() == "a";
        for t in 1..=20 {
            l1.step(&q, &mut c1, &mut r1, t, &mut judge).unwrap();
            step_dynamic(&mut l2, &CatalogDelta::empty(t), &mut NoInit, &q, &mut c2, &mut r2, t, &mut judge).unwrap();
        }
        assert_eq!(c1.data(), c2.data());
        assert_eq!(c1.generation(), c2.generation());
    }

    #[test]
    fn dynamic_removal_renormalises() {
        let mut c = Catalog::new(1, [(id("hi"), vec![9.0]), (id("lo1"), vec![0.0]), (id("lo2"), vec![0.5])]).unwrap();
        let q1 = QueryEmbedding::new("q", vec![1.0]);
        let delta = CatalogDelta {
            removed: vec![id("hi")],
            effective_at: 1,
            ..Default::default()
        };
        let mut rng = RandomSource::new(1);
        let r = step_dynamic(&mut learner(), &delta, &mut NoInit, &q1, &mut c, &mut rng, 1, &mut |_: &QueryEmbedding, _: &ItemId| false).unwrap();
        let p = &r.round.probabilities;
        assert_eq!(p.ids(), &[id("lo1"), id("lo2")]);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_validation_is_atomic() {
        let mut c = catalog();
        let before = c.clone();
        let bad = CatalogDelta {
            added: vec![NewItem { id: id("e"), init: None }],
            removed: vec![id("zz")],
            effective_at: 1,
        };
        assert!(matches!(apply_delta(&mut learner(), &bad, &mut NoInit, &mut c), Err(Error::UnknownId(_))));
        let dup = CatalogDelta {
            added: vec![NewItem { id: id("a"), init: None }],
            removed: vec![],
            effective_at: 1,
        };
        assert!(matches!(apply_delta(&mut learner(), &dup, &mut NoInit, &mut c), Err(Error::DuplicateId(_))));
        assert_eq!(c.data(), before.data());
        assert_eq!(c.generation(), before.generation());
    }

    #[test]
    fn multihop_single_hop_matches_step() {
        let q = QueryEmbedding::new("q", vec![0.8, -0.4]);
        let (mut c1, mut c2) = (catalog(), catalog());
        let (mut l1, mut l2) = (learner(), learner());
        let (mut r1, mut r2) = (RandomSource::new(6), RandomSource::new(6));
        let task = MultiHopRound { subqueries: vec![q.clone()] };
        for t in 1..=20 {
            l1.step(&q, &mut c1, &mut r1, t, &mut |_: &QueryEmbedding, c: &ItemId| c.as_str() == "d").unwrap();
            step_multihop(&mut l2, &task, &mut c2, &mut r2, t, &mut |_: usize, _: &QueryEmbedding, c: &ItemId| c.as_str() == "d").unwrap();
        }
        assert_eq!(c1.data(), c2.data());
    }

    #[test]
    fn multihop_failures_push_away_and_hops_see_updates() {
        let mut c = catalog();
        let task = MultiHopRound {
            subqueries: vec![
                QueryEmbedding::new("h0", vec![1.0, 0.2]),
                QueryEmbedding::new("h1", vec![-0.3, 1.0]),
                QueryEmbedding::new("h2", vec![0.5, 0.5]),
            ],
        };
        let mut rng = RandomSource::new(12);
        let start = c.generation();
        let mut before = Vec::new();
        let hops = step_multihop(&mut learner(), &task, &mut c, &mut rng, 1, &mut |h: usize, q: &QueryEmbedding, chosen: &ItemId| {
            let _ = (h, q, chosen);
            false
        })
        .unwrap();
        for (h, hop) in hops.iter().enumerate() {
            assert_eq!(hop.round.probabilities.generation(), start + h as u64);
            before.push(hop.round.feedback.chosen.clone());
        }
        assert_eq!(c.generation(), start + 3);

        // Re-run a single failing hop and check the chosen logit drops.
        let mut c = catalog();
        let q = task.subqueries[0].clone();
        let one = MultiHopRound { subqueries: vec![q.clone()] };
        let r = step_multihop(&mut learner(), &one, &mut c, &mut rng, 1, &mut |_: usize, _: &QueryEmbedding, _: &ItemId| false).unwrap();
        let chosen = r[0].round.feedback.chosen.clone();
        let old = dot(catalog().row(chosen.as_str()).unwrap(), &q.vector);
        let new = dot(c.row(chosen.as_str()).unwrap(), &q.vector);
        assert!(new < old);

        let batched = Learner::new(LearningRateSchedule::constant(0.1).unwrap(), UpdateMode::Batched { batch_size: 2 }).unwrap();
        assert!(matches!(
            step_multihop(&mut batched.clone(), &task, &mut c, &mut rng, 1, &mut |_: usize, _: &QueryEmbedding, _: &ItemId| true),
            Err(Error::InvalidConfig(_))
        ));
    }
}
