//! Softmax retrieval distribution and seeded sampling.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::catalog::{dot, l2_norm, Catalog, ItemId};
use crate::error::{Error, Result};

/// A query (or sub-task) embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryEmbedding {
    pub id: String,
    pub vector: Vec<f64>,
}

impl QueryEmbedding {
    pub fn new(id: impl Into<String>, vector: Vec<f64>) -> Self {
        QueryEmbedding {
            id: id.into(),
            vector,
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.vector)
    }

    /// Checks dimension and finiteness against a catalog dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.vector.len(),
            });
        }
        if self.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Optional boundedness check, `‖q‖₂ ≤ bound`.
    pub fn check_bound(&self, bound: f64) -> Result<()> {
        let norm = self.norm();
        if norm > bound {
            return Err(Error::QueryNormExceeded { norm, bound });
        }
        Ok(())
    }
}

/// Retrieval distribution over the items of one catalog generation.
///
/// Entries follow the catalog's row order (ascending id).
#[derive(Clone, Debug)]
pub struct ProbabilityVector {
    ids: Arc<Vec<ItemId>>,
    probs: Vec<f64>,
    generation: u64,
}

impl ProbabilityVector {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn ids(&self) -> &[ItemId] {
        &self.ids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .ok()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.position(id).map(|i| self.probs[i])
    }

    pub fn id(&self, index: usize) -> &ItemId {
        &self.ids[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, f64)> {
        self.ids.iter().zip(self.probs.iter().copied())
    }

    /// Index of the most probable item; ties go to the smallest id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Inner-product logits `qᵀθ_i` in catalog row order.
pub fn logits(q: &QueryEmbedding, catalog: &Catalog) -> Result<Vec<f64>> {
    q.validate(catalog.dim())?;
    let out: Vec<f64> = catalog
        .data()
        .chunks_exact(catalog.dim())
        .map(|row| dot(row, &q.vector))
        .collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(out)
}

/// Softmax in place with max-logit subtraction.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Softmax retrieval distribution `p_i ∝ exp(qᵀθ_i)`.
pub fn score(q: &QueryEmbedding, catalog: &Catalog) -> Result<ProbabilityVector> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let mut probs = logits(q, catalog)?;
    softmax_in_place(&mut probs);
    Ok(ProbabilityVector {
        ids: catalog.shared_ids(),
        probs,
        generation: catalog.generation(),
    })
}

/// Deterministic random stream: ChaCha8 keyed by a 64-bit seed and a stream
/// number, so independent consumers derived from one seed never overlap.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

/// One inverse-CDF draw over the entries not yet taken.
fn draw_remaining(weights: &[f64], taken: &[bool], rng: &mut RandomSource) -> usize {
    let total: f64 = weights
        .iter()
        .zip(taken)
        .filter(|(_, &t)| !t)
        .map(|(w, _)| *w)
        .sum();
    let u = rng.uniform() * total;
    let mut cumulative = 0.0;
    let mut last_positive = None;
    let mut first_free = None;
    for (i, (&w, &t)) in weights.iter().zip(taken).enumerate() {
        if t {
            continue;
        }
        first_free.get_or_insert(i);
        if w > 0.0 {
            cumulative += w;
            last_positive = Some(i);
            if u < cumulative {
                return i;
            }
        }
    }
    // Rounding left u at the top of the range, or every remaining weight is 0.
    last_positive
        .or(first_free)
        .expect("draw_remaining called with nothing left")
}

/// Samples one index with probability `p_i`, consuming exactly one uniform.
pub fn sample_one_index(p: &ProbabilityVector, rng: &mut RandomSource) -> usize {
    let taken = vec![false; p.len()];
    draw_remaining(&p.probs, &taken, rng)
}

/// Samples one item with probability `p_i`.
pub fn sample_one(p: &ProbabilityVector, rng: &mut RandomSource) -> ItemId {
    p.id(sample_one_index(p, rng)).clone()
}

/// Sequential draws without replacement (Plackett-Luce order): draw from `p`,
/// drop the drawn item, renormalise, repeat. Returns indices in draw order.
pub fn sample_k_indices(
    p: &ProbabilityVector,
    k: usize,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if k > p.len() {
        return Err(Error::KTooLarge { k, items: p.len() });
    }
    let mut taken = vec![false; p.len()];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let i = draw_remaining(&p.probs, &taken, rng);
        taken[i] = true;
        out.push(i);
    }
    Ok(out)
}

pub fn sample_k_without_replacement(
    p: &ProbabilityVector,
    k: usize,
    rng: &mut RandomSource,
) -> Result<Vec<ItemId>> {
    Ok(sample_k_indices(p, k, rng)?
        .into_iter()
        .map(|i| p.id(i).clone())
        .collect())
}

/// Exact probability that sequential sampling emits `sequence` (indices, in
/// order) as its first draws.
pub fn ordered_draw_probability(probs: &[f64], sequence: &[usize]) -> f64 {
    let mut remaining = 1.0;
    let mut prob = 1.0;
    for &i in sequence {
        prob *= probs[i] / remaining;
        remaining -= probs[i];
    }
    prob
}
