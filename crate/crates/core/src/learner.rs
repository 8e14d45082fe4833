//! Embedding updates from bandit feedback.
//!
//! The estimators turn one observed `(p, q, chosen, success)` tuple into
//! per-item directions whose expectation over the sampled choice equals the
//! full-information cross-entropy gradient `(p_i − 𝟙{i = i*}) q`.

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ItemId};
use crate::error::{Error, Result};
use crate::policy::{sample_one_index, score, ProbabilityVector, QueryEmbedding, RandomSource};

/// Tolerance for `Feedback::propensity` against the scored probability.
pub const PROPENSITY_TOLERANCE: f64 = 1e-12;

/// Bandit feedback for one decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Feedback {
    pub chosen: ItemId,
    pub success: bool,
    /// Probability of `chosen` under the policy at decision time.
    pub propensity: f64,
}

/// Per-item update directions for one round or batch.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBatch {
    pub round: u64,
    pub generation: u64,
    dim: usize,
    ids: Vec<ItemId>,
    data: Vec<f64>,
}

impl GradientBatch {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[ItemId] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|i| i.as_str() == id)
            .map(|k| &self.data[k * self.dim..(k + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, &[f64])> {
        self.ids.iter().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    fn from_coefficients(p: &ProbabilityVector, coef: &[f64], q: &[f64]) -> Self {
        let dim = q.len();
        let mut data = Vec::with_capacity(coef.len() * dim);
        for &c in coef {
            data.extend(q.iter().map(|x| c * x));
        }
        GradientBatch {
            round: 0,
            generation: p.generation(),
            dim,
            ids: p.ids().to_vec(),
            data,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    #[default]
    InverseSqrt,
}

/// Step size `η_t`: constant `c`, or `c / √t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub kind: ScheduleKind,
    pub c: f64,
}

impl Default for LearningRateSchedule {
    fn default() -> Self {
        LearningRateSchedule {
            kind: ScheduleKind::InverseSqrt,
            c: 1e-5,
        }
    }
}

impl LearningRateSchedule {
    pub fn new(kind: ScheduleKind, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning-rate constant must be positive, got {c}"
            )));
        }
        Ok(LearningRateSchedule { kind, c })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(ScheduleKind::Constant, c)
    }

    pub fn inverse_sqrt(c: f64) -> Result<Self> {
        Self::new(ScheduleKind::InverseSqrt, c)
    }

    /// Step size for round `t` (1-based; `t = 0` is treated as 1).
    pub fn eta(&self, t: u64) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.c,
            ScheduleKind::InverseSqrt => self.c / (t.max(1) as f64).sqrt(),
        }
    }
}

fn check_bound_inputs(theta_bar: f64, p_min: f64, q_bar: f64, horizon: u64) -> Result<()> {
    if !(theta_bar > 0.0 && q_bar > 0.0 && p_min > 0.0 && p_min < 1.0 && horizon > 0) {
        return Err(Error::InvalidArgument(
            "need theta_bar > 0, q_bar > 0, 0 < p_min < 1, horizon > 0".into(),
        ));
    }
    Ok(())
}

/// Fixed step size that balances the two regret terms for a known horizon.
///
/// `theta_bar` bounds `‖Θ₁ − Θ*‖²_F`, `p_min` bounds `p_{t,i*}` from below and
/// `q_bar` bounds `‖q_t‖²`.
pub fn balanced_learning_rate(theta_bar: f64, p_min: f64, q_bar: f64, horizon: u64) -> Result<f64> {
    check_bound_inputs(theta_bar, p_min, q_bar, horizon)?;
    Ok((p_min * theta_bar / (q_bar * (1.0 - p_min) * (1.0 + 2.0 * p_min) * horizon as f64)).sqrt())
}

/// Expected-regret bound attained by [`balanced_learning_rate`].
pub fn balanced_regret_bound(theta_bar: f64, p_min: f64, q_bar: f64, horizon: u64) -> Result<f64> {
    check_bound_inputs(theta_bar, p_min, q_bar, horizon)?;
    Ok((theta_bar * q_bar * (1.0 - p_min) * (1.0 + 2.0 * p_min) * horizon as f64 / p_min).sqrt())
}

/// How a round's feedback is turned into a catalog mutation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Every item moves (the estimator touches all rows).
    #[default]
    Full,
    /// Only the chosen item moves.
    ChosenOnly,
    /// Full-mode gradients averaged over `batch_size` rounds, applied at once.
    Batched { batch_size: usize },
}

/// Resolves the chosen index and checks the propensity contract.
/// With a floor, an underflowed (zero) propensity is clipped instead of rejected.
fn resolve_feedback(p: &ProbabilityVector, fb: &Feedback, floor: Option<f64>) -> Result<usize> {
    let idx = p
        .position(fb.chosen.as_str())
        .ok_or_else(|| Error::UnknownId(fb.chosen.to_string()))?;
    let zero = fb.propensity <= 0.0 || p.probs()[idx] <= 0.0;
    if zero && (floor.is_none() || fb.propensity < 0.0) {
        return Err(Error::ZeroPropensity);
    }
    if (fb.propensity - p.probs()[idx]).abs() > PROPENSITY_TOLERANCE {
        return Err(Error::PropensityMismatch {
            expected: p.probs()[idx],
            found: fb.propensity,
        });
    }
    Ok(idx)
}

fn check_query(q: &QueryEmbedding) -> Result<()> {
    if q.vector.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

/// Coefficients `p_i − 𝟙{i = chosen}·𝟙{success}/denom`.
fn full_coefficients(probs: &[f64], chosen: usize, success: bool, denom: f64) -> Vec<f64> {
    let mut coef = probs.to_vec();
    if success {
        coef[chosen] -= 1.0 / denom;
    }
    coef
}

fn denominator(propensity: f64, floor: Option<f64>) -> f64 {
    match floor {
        Some(f) => propensity.max(f),
        None => propensity,
    }
}

fn full_with_floor(
    p: &ProbabilityVector,
    q: &QueryEmbedding,
    fb: &Feedback,
    floor: Option<f64>,
) -> Result<GradientBatch> {
    let idx = resolve_feedback(p, fb, floor)?;
    check_query(q)?;
    let coef = full_coefficients(p.probs(), idx, fb.success, denominator(fb.propensity, floor));
    Ok(GradientBatch::from_coefficients(p, &coef, &q.vector))
}

fn chosen_only_with_floor(
    p: &ProbabilityVector,
    q: &QueryEmbedding,
    fb: &Feedback,
    floor: Option<f64>,
) -> Result<GradientBatch> {
    let idx = resolve_feedback(p, fb, floor)?;
    check_query(q)?;
    let coef = if fb.success {
        1.0 - 1.0 / denominator(fb.propensity, floor)
    } else {
        1.0
    };
    Ok(GradientBatch {
        round: 0,
        generation: p.generation(),
        dim: q.dim(),
        ids: vec![p.id(idx).clone()],
        data: q.vector.iter().map(|x| coef * x).collect(),
    })
}

/// `g_i = (p_i − 𝟙{i = i_t}·𝟙{success}/p_{i_t}) q` for every item.
pub fn estimate_gradient_full(
    p: &ProbabilityVector,
    q: &QueryEmbedding,
    fb: &Feedback,
) -> Result<GradientBatch> {
    full_with_floor(p, q, fb, None)
}

/// `g_{i_t} = (1 − 𝟙{success}/p_{i_t}) q`; all other items untouched.
pub fn estimate_gradient_chosen_only(
    p: &ProbabilityVector,
    q: &QueryEmbedding,
    fb: &Feedback,
) -> Result<GradientBatch> {
    chosen_only_with_floor(p, q, fb, None)
}

/// One logged decision awaiting a batched update.
#[derive(Clone, Debug)]
pub struct BatchEvent {
    pub probabilities: ProbabilityVector,
    pub query: QueryEmbedding,
    pub feedback: Feedback,
}

fn batched_with_floor(events: &[BatchEvent], floor: Option<f64>) -> Result<GradientBatch> {
    let first = events.first().ok_or(Error::EmptyBatch)?;
    let generation = first.probabilities.generation();
    let dim = first.query.dim();
    let mut sum: Option<GradientBatch> = None;
    for ev in events {
        if ev.probabilities.generation() != generation {
            return Err(Error::GenerationMismatch {
                expected: generation,
                found: ev.probabilities.generation(),
            });
        }
        if ev.query.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ev.query.dim(),
            });
        }
        let g = full_with_floor(&ev.probabilities, &ev.query, &ev.feedback, floor)?;
        match sum.as_mut() {
            None => sum = Some(g),
            Some(acc) => acc.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b),
        }
    }
    let mut acc = sum.expect("non-empty batch");
    let j = events.len() as f64;
    acc.data.iter_mut().for_each(|v| *v /= j);
    Ok(acc)
}

/// Mean of the per-event full gradients, all taken at the batch-start catalog.
pub fn estimate_gradient_batched(events: &[BatchEvent]) -> Result<GradientBatch> {
    batched_with_floor(events, None)
}

/// `θ_i ← project(θ_i − η g_i)` for every item in `g`, using the catalog's
/// projection mode. Rows absent from `g` are unchanged.
pub fn apply_update(catalog: &mut Catalog, g: &GradientBatch, eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    if !g.is_empty() && g.dim != catalog.dim() {
        return Err(Error::DimensionMismatch {
            expected: catalog.dim(),
            found: g.dim,
        });
    }
    catalog.update_rows(g.iter(), -eta)
}

/// Success/failure signal for a chosen item.
pub trait Judge {
    fn judge(&mut self, query: &QueryEmbedding, chosen: &ItemId) -> bool;
}

impl<F> Judge for F
where
    F: FnMut(&QueryEmbedding, &ItemId) -> bool,
{
    fn judge(&mut self, query: &QueryEmbedding, chosen: &ItemId) -> bool {
        self(query, chosen)
    }
}

/// Everything that happened in one learner round.
#[derive(Clone, Debug)]
pub struct Round {
    pub t: u64,
    pub feedback: Feedback,
    pub eta: f64,
    /// Distribution the choice was drawn from (its generation is the catalog
    /// state at decision time).
    pub probabilities: ProbabilityVector,
    /// Whether the catalog was mutated this round (false while a batch fills).
    pub applied: bool,
}

impl Round {
    pub fn chosen(&self) -> &ItemId {
        &self.feedback.chosen
    }
}

/// Stateful driver of the online update: schedule, update mode, optional
/// propensity floor and the pending batch.
#[derive(Clone, Debug)]
pub struct Learner {
    schedule: LearningRateSchedule,
    mode: UpdateMode,
    propensity_floor: Option<f64>,
    pending: Vec<BatchEvent>,
}

impl Learner {
    pub fn new(schedule: LearningRateSchedule, mode: UpdateMode) -> Result<Self> {
        if let UpdateMode::Batched { batch_size: 0 } = mode {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(Learner {
            schedule,
            mode,
            propensity_floor: None,
            pending: Vec::new(),
        })
    }

    /// Clips the importance-weight denominator at `floor`. This biases the
    /// estimator; leave unset to keep it unbiased.
    pub fn with_propensity_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "propensity floor must lie in (0, 1], got {floor}"
            )));
        }
        self.propensity_floor = Some(floor);
        Ok(self)
    }

    pub fn schedule(&self) -> LearningRateSchedule {
        self.schedule
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// One round: score, sample, ask the judge, update.
    pub fn step(
        &mut self,
        query: &QueryEmbedding,
        catalog: &mut Catalog,
        rng: &mut RandomSource,
        t: u64,
        judge: &mut impl Judge,
    ) -> Result<Round> {
        check_round(t)?;
        let p = score(query, catalog)?;
        let idx = sample_one_index(&p, rng);
        let chosen = p.id(idx).clone();
        let success = judge.judge(query, &chosen);
        self.observe(query, catalog, p, chosen, success, t)
    }

    /// Learns from a decision that was made elsewhere (reranked, multi-hop).
    /// `p` must be the distribution scored on the current catalog.
    pub fn observe(
        &mut self,
        query: &QueryEmbedding,
        catalog: &mut Catalog,
        p: ProbabilityVector,
        chosen: ItemId,
        success: bool,
        t: u64,
    ) -> Result<Round> {
        check_round(t)?;
        if p.generation() != catalog.generation() {
            return Err(Error::GenerationMismatch {
                expected: catalog.generation(),
                found: p.generation(),
            });
        }
        let propensity = p
            .get(chosen.as_str())
            .ok_or_else(|| Error::UnknownId(chosen.to_string()))?;
        let feedback = Feedback {
            chosen,
            success,
            propensity,
        };
        let eta = self.schedule.eta(t);
        let applied = match self.mode {
            UpdateMode::Full => {
                let mut g = full_with_floor(&p, query, &feedback, self.propensity_floor)?;
                g.round = t;
                apply_update(catalog, &g, eta)?;
                true
            }
            UpdateMode::ChosenOnly => {
                let mut g = chosen_only_with_floor(&p, query, &feedback, self.propensity_floor)?;
                g.round = t;
                apply_update(catalog, &g, eta)?;
                true
            }
            UpdateMode::Batched { batch_size } => {
                if let Some(first) = self.pending.first() {
                    if first.probabilities.generation() != p.generation() {
                        return Err(Error::GenerationMismatch {
                            expected: first.probabilities.generation(),
                            found: p.generation(),
                        });
                    }
                }
                self.pending.push(BatchEvent {
                    probabilities: p.clone(),
                    query: query.clone(),
                    feedback: feedback.clone(),
                });
                if self.pending.len() >= batch_size {
                    self.flush(catalog, t)?
                } else {
                    false
                }
            }
        };
        Ok(Round {
            t,
            feedback,
            eta,
            probabilities: p,
            applied,
        })
    }

    /// Applies any pending batched events with `η_t`. Returns whether an
    /// update happened.
    pub fn flush(&mut self, catalog: &mut Catalog, t: u64) -> Result<bool> {
        if self.pending.is_empty() {
            return Ok(false);
        }
        let mut g = batched_with_floor(&self.pending, self.propensity_floor)?;
        g.round = t;
        apply_update(catalog, &g, self.schedule.eta(t))?;
        self.pending.clear();
        Ok(true)
    }
}

fn check_round(t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidArgument("round index starts at 1".into()));
    }
    Ok(())
}
