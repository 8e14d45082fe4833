//! The live item-embedding matrix.
//!
//! Rows are kept in ascending [`ItemId`] order in one contiguous buffer, so the
//! row order doubles as the deterministic item ordering used by the sampler.
//! Every mutation bumps [`Catalog::generation`]; readers that hold a
//! [`ProbabilityVector`](crate::policy::ProbabilityVector) can tell whether it
//! was computed against the current state.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable identifier of a catalog item (tool, document, function).
///
/// Cloning is a reference-count bump.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(Arc<str>);

impl ItemId {
    pub fn new(id: impl AsRef<str>) -> Self {
        ItemId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId::new(s)
    }
}

impl From<String> for ItemId {
    fn from(s: String) -> Self {
        ItemId(Arc::from(s))
    }
}

impl Borrow<str> for ItemId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Constraint applied to rows after every mutation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    #[default]
    None,
    UnitBall,
}

/// Storage precision of row values.
///
/// Values are always held as `f64`; in `F32` mode every stored value is rounded
/// to the nearest `f32` after each mutation, and snapshots are written as `f32`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    #[inline]
    fn round(self, v: f64) -> f64 {
        match self {
            Precision::F64 => v,
            Precision::F32 => v as f32 as f64,
        }
    }
}

/// Projects `v` according to `mode`, returning a new vector.
pub fn project_row(v: &[f64], mode: ProjectionMode) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut out = v.to_vec();
    project_in_place(&mut out, mode);
    Ok(out)
}

/// In-place variant of [`project_row`]; the caller guarantees finite input.
pub(crate) fn project_in_place(v: &mut [f64], mode: ProjectionMode) {
    if let ProjectionMode::UnitBall = mode {
        let norm = l2_norm(v);
        if norm > 1.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Item-embedding matrix with stable identities.
#[derive(Clone, Debug)]
pub struct Catalog {
    dim: usize,
    ids: Arc<Vec<ItemId>>,
    data: Vec<f64>,
    retired: BTreeSet<ItemId>,
    projection: ProjectionMode,
    precision: Precision,
    generation: u64,
}

impl Catalog {
    /// Builds a catalog from `(id, vector)` pairs. Generation starts at 0.
    pub fn new<I>(dim: usize, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ItemId, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut rows: Vec<(ItemId, Vec<f64>)> = items.into_iter().collect();
        for (_, v) in &rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId(w[0].0.to_string()));
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, v) in rows {
            ids.push(id);
            data.extend_from_slice(&v);
        }
        Ok(Catalog {
            dim,
            ids: Arc::new(ids),
            data,
            retired: BTreeSet::new(),
            projection: ProjectionMode::None,
            precision: Precision::F64,
            generation: 0,
        })
    }

    /// Sets the projection mode and projects the existing rows.
    pub fn with_projection(mut self, mode: ProjectionMode) -> Self {
        self.projection = mode;
        let dim = self.dim;
        for row in self.data.chunks_exact_mut(dim) {
            project_in_place(row, mode);
        }
        self
    }

    /// Sets the storage precision and rounds the existing rows.
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        for v in &mut self.data {
            *v = precision.round(*v);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn projection(&self) -> ProjectionMode {
        self.projection
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Item ids in ascending order; index `i` names row `i`.
    pub fn ids(&self) -> &[ItemId] {
        &self.ids
    }

    pub(crate) fn shared_ids(&self) -> Arc<Vec<ItemId>> {
        Arc::clone(&self.ids)
    }

    /// Row-major values, `len() * dim()` entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .ok()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position(id).is_some()
    }

    pub fn is_retired(&self, id: &str) -> bool {
        self.retired.contains(id)
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.row_at(i))
    }

    pub fn row_at(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&ItemId, &[f64])> {
        self.ids.iter().zip(self.data.chunks_exact(self.dim))
    }

    /// Inserts a new row, projected and rounded per the catalog's modes.
    pub fn add_item(&mut self, id: ItemId, init: &[f64]) -> Result<()> {
        if init.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: init.len(),
            });
        }
        if init.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if self.retired.contains(id.as_str()) {
            return Err(Error::IdRetired(id.to_string()));
        }
        let pos = match self.ids.binary_search(&id) {
            Ok(_) => return Err(Error::DuplicateId(id.to_string())),
            Err(pos) => pos,
        };
        let mut row = init.to_vec();
        project_in_place(&mut row, self.projection);
        for v in &mut row {
            *v = self.precision.round(*v);
        }
        Arc::make_mut(&mut self.ids).insert(pos, id);
        let at = pos * self.dim;
        self.data.splice(at..at, row);
        self.generation += 1;
        Ok(())
    }

    /// Removes a row and retires its id for the rest of the run. Returns the
    /// removed vector.
    pub fn remove_item(&mut self, id: &str) -> Result<Vec<f64>> {
        let pos = self
            .position(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        let removed = Arc::make_mut(&mut self.ids).remove(pos);
        self.retired.insert(removed);
        let at = pos * self.dim;
        let row = self.data.drain(at..at + self.dim).collect();
        self.generation += 1;
        Ok(row)
    }

    /// Applies `row <- project(row + scale * direction)` for every pair, as a
    /// single mutation. Validation happens before any row is touched. An empty
    /// update still counts as a mutation.
    pub fn update_rows<'a, I>(&mut self, updates: I, scale: f64) -> Result<()>
    where
        I: IntoIterator<Item = (&'a ItemId, &'a [f64])>,
    {
        if !scale.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let mut resolved = Vec::new();
        for (id, dir) in updates {
            if dir.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: dir.len(),
                });
            }
            if dir.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
            let pos = self
                .position(id.as_str())
                .ok_or_else(|| Error::UnknownId(id.to_string()))?;
            resolved.push((pos, dir));
        }
        let dim = self.dim;
        for (pos, dir) in resolved {
            let row = &mut self.data[pos * dim..(pos + 1) * dim];
            for (r, g) in row.iter_mut().zip(dir) {
                *r += scale * g;
            }
            project_in_place(row, self.projection);
            for v in row.iter_mut() {
                *v = self.precision.round(*v);
            }
        }
        self.generation += 1;
        Ok(())
    }

    /// Frobenius distance to another catalog holding the same item set.
    pub fn frobenius_distance(&self, other: &Catalog) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.ids != other.ids {
            return Err(Error::InvalidArgument(
                "catalogs hold different item sets".into(),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Largest row norm; 0 for an empty catalog.
    pub fn max_row_norm(&self) -> f64 {
        self.data
            .chunks_exact(self.dim)
            .map(l2_norm)
            .fold(0.0, f64::max)
    }

    /// Same item set and settings with a whole new matrix (one generation on).
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Catalog {
        debug_assert_eq!(data.len(), self.data.len());
        let mut out = self.clone();
        out.data = data;
        for v in &mut out.data {
            *v = out.precision.round(*v);
        }
        out.generation += 1;
        out
    }
}
