//! Losses, regret against a hindsight oracle, and ranking metrics.

use std::collections::BTreeSet;

use crate::catalog::{project_in_place, Catalog, ItemId};
use crate::error::{Error, Result};
use crate::policy::{logits, ProbabilityVector};
use crate::record::LabeledQuery;
use crate::simulator::EpisodeLog;

/// `−ln p_{i*}`.
pub fn cross_entropy_loss(p: &ProbabilityVector, target: &str) -> Result<f64> {
    p.get(target)
        .map(|v| -v.ln())
        .ok_or_else(|| Error::UnknownId(target.to_string()))
}

/// Per-event cross-entropy of `catalog` on a labelled stream.
pub fn stream_losses(catalog: &Catalog, events: &[LabeledQuery]) -> Result<Vec<f64>> {
    let targets = resolve_targets(catalog, events)?;
    let mut buf = vec![0.0; catalog.len()];
    Ok(events
        .iter()
        .zip(targets)
        .map(|(e, i)| event_loss(catalog.data(), catalog.dim(), &e.query.vector, i, &mut buf))
        .collect())
}

fn resolve_targets(catalog: &Catalog, events: &[LabeledQuery]) -> Result<Vec<usize>> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    events
        .iter()
        .map(|e| {
            e.query.validate(catalog.dim())?;
            catalog
                .position(e.target.as_str())
                .ok_or_else(|| Error::UnknownId(e.target.to_string()))
        })
        .collect()
}

/// Log-sum-exp loss; leaves the softmax in `buf`.
fn event_loss(data: &[f64], dim: usize, q: &[f64], target: usize, buf: &mut [f64]) -> f64 {
    for (slot, row) in buf.iter_mut().zip(data.chunks_exact(dim)) {
        *slot = row.iter().zip(q).map(|(a, b)| a * b).sum();
    }
    let z_star = buf[target];
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in buf.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in buf.iter_mut() {
        *v /= sum;
    }
    max + sum.ln() - z_star
}

fn total_loss_and_gradient(
    data: &[f64],
    dim: usize,
    events: &[LabeledQuery],
    targets: &[usize],
    grad: Option<&mut [f64]>,
    buf: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    match grad {
        Some(grad) => {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (e, &i) in events.iter().zip(targets) {
                let q = &e.query.vector;
                total += event_loss(data, dim, q, i, buf);
                buf[i] -= 1.0;
                for (w, g) in buf.iter().zip(grad.chunks_exact_mut(dim)) {
                    for (gk, qk) in g.iter_mut().zip(q) {
                        *gk += w * qk;
                    }
                }
            }
        }
        None => {
            for (e, &i) in events.iter().zip(targets) {
                total += event_loss(data, dim, &e.query.vector, i, buf);
            }
        }
    }
    total
}

/// Settings for [`train_oracle`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Pass budget (one pass = one full-batch gradient step).
    pub passes: usize,
    /// Initial step size; adapted by backtracking.
    pub learning_rate: f64,
    /// Stop once a pass improves the total loss by less than this.
    pub tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            passes: 10_000,
            learning_rate: 0.1,
            tolerance: 1e-9,
        }
    }
}

/// Result of [`train_oracle`].
#[derive(Clone, Debug)]
pub struct OracleFit {
    pub catalog: Catalog,
    pub total_loss: f64,
    pub passes: usize,
}

/// Full-information fit of a fixed catalog to a labelled stream by
/// full-batch gradient descent. A step that does not lower the total loss is
/// retried at half the step size; an accepted step lets the size grow again.
/// The catalog's projection mode is honoured after every step.
pub fn train_oracle(events: &[LabeledQuery], init: &Catalog, options: OracleOptions) -> Result<OracleFit> {
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    if !(options.learning_rate.is_finite() && options.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("oracle learning rate must be positive".into()));
    }
    let targets = resolve_targets(init, events)?;
    let dim = init.dim();
    let mode = init.projection();
    let mut buf = vec![0.0; init.len()];
    let mut theta = init.data().to_vec();
    let mut grad = vec![0.0; theta.len()];
    let mut trial = vec![0.0; theta.len()];
    let mut trial_grad = vec![0.0; theta.len()];
    let mut loss = total_loss_and_gradient(&theta, dim, events, &targets, Some(&mut grad), &mut buf);
    let mut lr = options.learning_rate;
    let mut passes = 0;

    while passes < options.passes {
        passes += 1;
        let mut accepted = None;
        for _ in 0..60 {
            for ((t, th), g) in trial.iter_mut().zip(&theta).zip(&grad) {
                *t = th - lr * g;
            }
            for row in trial.chunks_exact_mut(dim) {
                project_in_place(row, mode);
            }
            let l = total_loss_and_gradient(&trial, dim, events, &targets, Some(&mut trial_grad), &mut buf);
            if l < loss {
                accepted = Some(l);
                break;
            }
            lr *= 0.5;
        }
        let Some(new_loss) = accepted else { break };
        let improvement = loss - new_loss;
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        loss = new_loss;
        lr *= 1.5;
        if improvement < options.tolerance {
            break;
        }
    }

    Ok(OracleFit {
        catalog: init.with_data(theta),
        total_loss: loss,
        passes,
    })
}

/// Per-round online and oracle losses with cumulative regret.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretLedger {
    online: Vec<f64>,
    oracle: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RegretLedger {
    pub fn from_losses(online: Vec<f64>, oracle: Vec<f64>) -> Result<Self> {
        if online.len() != oracle.len() {
            return Err(Error::InvalidArgument(format!(
                "{} online losses but {} oracle losses",
                online.len(),
                oracle.len()
            )));
        }
        let mut acc = 0.0;
        let cumulative = online
            .iter()
            .zip(&oracle)
            .map(|(a, b)| {
                acc += a - b;
                acc
            })
            .collect();
        Ok(RegretLedger {
            online,
            oracle,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        self.online.is_empty()
    }

    pub fn online(&self) -> &[f64] {
        &self.online
    }

    pub fn oracle(&self) -> &[f64] {
        &self.oracle
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// `R_T`; 0 for an empty ledger.
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Regret of an episode against a fixed oracle catalog.
pub fn regret_curve(log: &EpisodeLog, oracle: &Catalog) -> Result<RegretLedger> {
    let online = log.online_losses()?;
    let fixed = stream_losses(oracle, &log.labeled_queries())?;
    RegretLedger::from_losses(online, fixed)
}

/// Items by descending score, ties broken by id.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    items: Vec<ItemId>,
    relevant: BTreeSet<ItemId>,
}

impl RankedList {
    /// Takes an already ordered list; rejects duplicates.
    pub fn new(items: Vec<ItemId>, relevant: impl IntoIterator<Item = ItemId>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for id in &items {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.to_string()));
            }
        }
        Ok(RankedList {
            items,
            relevant: relevant.into_iter().collect(),
        })
    }

    pub fn from_probabilities(p: &ProbabilityVector, relevant: impl IntoIterator<Item = ItemId>) -> Self {
        let mut order: Vec<usize> = (0..p.len()).collect();
        // Ids are already sorted, so a stable sort keeps the id tie-break.
        order.sort_by(|&a, &b| p.probs()[b].total_cmp(&p.probs()[a]));
        RankedList {
            items: order.into_iter().map(|i| p.id(i).clone()).collect(),
            relevant: relevant.into_iter().collect(),
        }
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn relevant(&self) -> &BTreeSet<ItemId> {
        &self.relevant
    }

    fn check(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.relevant.is_empty() {
            return Err(Error::NoRelevantItems);
        }
        Ok(())
    }
}

pub fn recall_at_k(list: &RankedList, k: usize) -> Result<f64> {
    list.check(k)?;
    let hits = list.items.iter().take(k).filter(|i| list.relevant.contains(*i)).count();
    Ok(hits as f64 / list.relevant.len() as f64)
}

/// Binary-relevance NDCG with discount `1/log₂(rank + 1)`.
pub fn ndcg_at_k(list: &RankedList, k: usize) -> Result<f64> {
    list.check(k)?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = list
        .items
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| list.relevant.contains(*id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal: f64 = (1..=k.min(list.relevant.len())).map(discount).sum();
    Ok(dcg / ideal)
}

/// Mean Recall@k, NDCG@k and top-1 accuracy over a labelled query set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetrievalSummary {
    pub recall: f64,
    pub ndcg: f64,
    pub top1: f64,
    pub queries: usize,
}

pub fn evaluate_retrieval(catalog: &Catalog, queries: &[LabeledQuery], k: usize) -> Result<RetrievalSummary> {
    if queries.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let mut sum = RetrievalSummary {
        recall: 0.0,
        ndcg: 0.0,
        top1: 0.0,
        queries: queries.len(),
    };
    for lq in queries {
        if !catalog.contains(lq.target.as_str()) {
            return Err(Error::UnknownId(lq.target.to_string()));
        }
        let p = crate::policy::score(&lq.query, catalog)?;
        let list = RankedList::from_probabilities(&p, [lq.target.clone()]);
        sum.recall += recall_at_k(&list, k)?;
        sum.ndcg += ndcg_at_k(&list, k)?;
        if list.items[0] == lq.target {
            sum.top1 += 1.0;
        }
    }
    let n = queries.len() as f64;
    sum.recall /= n;
    sum.ndcg /= n;
    sum.top1 /= n;
    Ok(sum)
}

/// Share of queries whose highest-scoring item (ties to the smallest id) is
/// the target.
pub fn top1_accuracy(catalog: &Catalog, queries: &[LabeledQuery]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let mut hits = 0usize;
    for lq in queries {
        let z = logits(&lq.query, catalog)?;
        let mut best = 0;
        for (i, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = i;
            }
        }
        if catalog.ids()[best] == lq.target {
            hits += 1;
        }
    }
    Ok(hits as f64 / queries.len() as f64)
}

/// Mean of every length-`window` run of consecutive success bits.
pub fn rolling_accuracy(successes: &[bool], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if window > successes.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: successes.len(),
        });
    }
    let mut hits = successes[..window].iter().filter(|&&s| s).count();
    let mut out = Vec::with_capacity(successes.len() - window + 1);
    out.push(hits as f64 / window as f64);
    for i in window..successes.len() {
        hits += successes[i] as usize;
        hits -= successes[i - window] as usize;
        out.push(hits as f64 / window as f64);
    }
    Ok(out)
}

/// Success rate over `successes[from..to]`.
pub fn window_accuracy(successes: &[bool], from: usize, to: usize) -> Result<f64> {
    if from >= to || to > successes.len() {
        return Err(Error::InvalidArgument(format!(
            "window {from}..{to} is empty or exceeds {} rounds",
            successes.len()
        )));
    }
    let hits = successes[from..to].iter().filter(|&&s| s).count();
    Ok(hits as f64 / (to - from) as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{score, QueryEmbedding, RandomSource};
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<ItemId> {
        (0..n).map(|i| ItemId::new(format!("x{i}"))).collect()
    }

    fn random_catalog(n: usize, d: usize, rng: &mut RandomSource, scale: f64) -> Catalog {
        Catalog::new(
            d,
            ids(n).into_iter().map(|id| (id, (0..d).map(|_| scale * rng.normal()).collect())),
        )
        .unwrap()
    }

    fn random_events(n: usize, d: usize, items: usize, rng: &mut RandomSource) -> Vec<LabeledQuery> {
        (0..n)
            .map(|j| LabeledQuery {
                query: QueryEmbedding::new(format!("q{j}"), (0..d).map(|_| rng.normal()).collect()),
                target: ItemId::new(format!("x{}", rng.below(items))),
            })
            .collect()
    }

    fn total(cat: &Catalog, ev: &[LabeledQuery]) -> f64 {
        stream_losses(cat, ev).unwrap().iter().sum()
    }

    #[test]
    fn cross_entropy_examples() {
        let cat = Catalog::new(2, ids(4).into_iter().map(|i| (i, vec![0.0, 0.0]))).unwrap();
        let p = score(&QueryEmbedding::new("q", vec![1.0, 1.0]), &cat).unwrap();
        assert!((cross_entropy_loss(&p, "x2").unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(matches!(cross_entropy_loss(&p, "nope"), Err(Error::UnknownId(_))));

        let one = Catalog::new(2, [(ItemId::new("a"), vec![1.0, 0.0])]).unwrap();
        let p = score(&QueryEmbedding::new("q", vec![1.0, 0.0]), &one).unwrap();
        assert_eq!(cross_entropy_loss(&p, "a").unwrap(), 0.0);

        // Ten equal rows give p = 0.1.
        let cat = Catalog::new(1, ids(10).into_iter().map(|i| (i, vec![0.0]))).unwrap();
        let p = score(&QueryEmbedding::new("q", vec![1.0]), &cat).unwrap();
        assert!((cross_entropy_loss(&p, "x0").unwrap() - std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn stream_losses_agree_with_score() {
        let mut rng = RandomSource::new(4);
        let cat = random_catalog(5, 3, &mut rng, 1.0);
        let ev = random_events(20, 3, 5, &mut rng);
        let fast = stream_losses(&cat, &ev).unwrap();
        for (e, l) in ev.iter().zip(fast) {
            let p = score(&e.query, &cat).unwrap();
            let slow = cross_entropy_loss(&p, e.target.as_str()).unwrap();
            assert!((l - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_single_separable_event_descends_toward_zero() {
        let cat = Catalog::new(2, ids(3).into_iter().map(|i| (i, vec![0.0, 0.0]))).unwrap();
        let ev = vec![LabeledQuery {
            query: QueryEmbedding::new("q", vec![1.0, 0.5]),
            target: ItemId::new("x1"),
        }];
        let mut last = total(&cat, &ev);
        for passes in [1, 5, 20, 100] {
            let fit = train_oracle(
                &ev,
                &cat,
                OracleOptions {
                    passes,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(fit.total_loss < last);
            last = fit.total_loss;
        }
        assert!(last < 0.05, "loss {last}");
    }

    #[test]
    fn oracle_beats_random_search() {
        let mut rng = RandomSource::new(12);
        let init = random_catalog(3, 2, &mut rng, 1.0);
        let ev = random_events(5, 2, 3, &mut rng);
        let fit = train_oracle(&ev, &init, OracleOptions::default()).unwrap();
        for _ in 0..10_000 {
            let probe = random_catalog(3, 2, &mut rng, 3.0);
            assert!(fit.total_loss <= total(&probe, &ev) + 1e-9);
        }
        assert!((fit.total_loss - total(&fit.catalog, &ev)).abs() < 1e-9);
    }

    #[test]
    fn oracle_is_deterministic_and_descends() {
        let mut rng = RandomSource::new(2);
        let init = random_catalog(4, 3, &mut rng, 1.0);
        let ev = random_events(30, 3, 4, &mut rng);
        let opts = OracleOptions {
            passes: 200,
            ..Default::default()
        };
        let a = train_oracle(&ev, &init, opts).unwrap();
        let b = train_oracle(&ev, &init, opts).unwrap();
        assert_eq!(a.catalog.data(), b.catalog.data());
        assert!(a.total_loss <= total(&init, &ev));
    }

    #[test]
    fn oracle_respects_unit_ball() {
        let mut rng = RandomSource::new(3);
        let init = random_catalog(3, 2, &mut rng, 0.3).with_projection(crate::catalog::ProjectionMode::UnitBall);
        let ev = random_events(10, 2, 3, &mut rng);
        let fit = train_oracle(&ev, &init, OracleOptions::default()).unwrap();
        assert!(fit.catalog.max_row_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn oracle_errors() {
        let mut rng = RandomSource::new(1);
        let cat = random_catalog(2, 2, &mut rng, 1.0);
        assert!(matches!(
            train_oracle(&[], &cat, OracleOptions::default()),
            Err(Error::EmptyEvents)
        ));
        let ev = vec![LabeledQuery {
            query: QueryEmbedding::new("q", vec![1.0, 0.0]),
            target: ItemId::new("ghost"),
        }];
        assert!(matches!(
            train_oracle(&ev, &cat, OracleOptions::default()),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn objective_is_midpoint_convex() {
        let mut rng = RandomSource::new(77);
        for _ in 0..200 {
            let a = random_catalog(4, 3, &mut rng, 2.0);
            let b = random_catalog(4, 3, &mut rng, 2.0);
            let ev = random_events(6, 3, 4, &mut rng);
            let mid: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| 0.5 * (x + y)).collect();
            let m = a.with_data(mid);
            assert!(total(&m, &ev) <= 0.5 * (total(&a, &ev) + total(&b, &ev)) + 1e-12);
        }
    }

    #[test]
    fn ledger_definition() {
        let l = RegretLedger::from_losses(vec![1.0, 0.5, 0.2], vec![0.4, 0.6, 0.2]).unwrap();
        assert_eq!(l.len(), 3);
        let expect = [0.6, 0.5, 0.5];
        for (c, e) in l.cumulative().iter().zip(expect) {
            assert!((c - e).abs() < 1e-12);
        }
        let one = RegretLedger::from_losses(vec![0.7], vec![0.7]).unwrap();
        assert_eq!(one.total(), 0.0);
        assert!(RegretLedger::from_losses(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn recall_examples() {
        let items = ids(12);
        let at = |r: usize| RankedList::new(items.clone(), [items[r - 1].clone()]).unwrap();
        assert_eq!(recall_at_k(&at(3), 10).unwrap(), 1.0);
        assert_eq!(recall_at_k(&at(11), 10).unwrap(), 0.0);
        let two = RankedList::new(items.clone(), [items[0].clone(), items[11].clone()]).unwrap();
        assert_eq!(recall_at_k(&two, 10).unwrap(), 0.5);
        let none = RankedList::new(items.clone(), []).unwrap();
        assert!(matches!(recall_at_k(&none, 3), Err(Error::NoRelevantItems)));
        assert!(RankedList::new(vec![items[0].clone(), items[0].clone()], []).is_err());
    }

    #[test]
    fn ndcg_examples() {
        let items = ids(5);
        let at = |r: usize| RankedList::new(items.clone(), [items[r - 1].clone()]).unwrap();
        assert_eq!(ndcg_at_k(&at(1), 3).unwrap(), 1.0);
        let expect = 1.0 / 3f64.log2();
        assert!((ndcg_at_k(&at(2), 2).unwrap() - expect).abs() < 1e-12);
        assert!((ndcg_at_k(&at(2), 5).unwrap() - 0.6309297535714574).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&at(4), 3).unwrap(), 0.0);
    }

    #[test]
    fn ranking_ties_follow_ids() {
        let cat = Catalog::new(1, ids(3).into_iter().map(|i| (i, vec![0.0]))).unwrap();
        let p = score(&QueryEmbedding::new("q", vec![1.0]), &cat).unwrap();
        let list = RankedList::from_probabilities(&p, []);
        assert_eq!(list.items(), &ids(3)[..]);
    }

    #[test]
    fn rolling_accuracy_examples() {
        assert_eq!(rolling_accuracy(&[true; 5], 2).unwrap(), vec![1.0; 4]);
        let alt: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert_eq!(rolling_accuracy(&alt, 2).unwrap(), vec![0.5; 9]);
        let mixed = [true, true, false, true];
        assert_eq!(rolling_accuracy(&mixed, 4).unwrap(), vec![0.75]);
        assert!(matches!(rolling_accuracy(&mixed, 5), Err(Error::WindowTooLarge { .. })));
        assert!(rolling_accuracy(&mixed, 0).is_err());
    }

    #[test]
    fn loglog_slope_recovers_power() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 0.5).abs() < 1e-12);
        assert!(loglog_slope(&xs, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn recall_monotone_and_ndcg_bounded(
            n in 1usize..30,
            rel in proptest::collection::vec(0usize..30, 1..5),
            seed in any::<u64>(),
        ) {
            let mut items = ids(n);
            RandomSource::new(seed).shuffle(&mut items);
            let relevant: Vec<ItemId> = rel.iter().map(|r| ItemId::new(format!("x{}", r % n))).collect();
            let list = RankedList::new(items, relevant).unwrap();
            let mut prev = 0.0;
            for k in 1..=n + 2 {
                let r = recall_at_k(&list, k).unwrap();
                prop_assert!(r >= prev);
                prev = r;
                let g = ndcg_at_k(&list, k).unwrap();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
            }
        }
    }
}
