//! Cosine-similarity computation and exact K-nearest-neighbor retrieval.
//!
//! Vectors are unit-normalized once at index build; queries then reduce to
//! dot products. Retrieval is an exhaustive scan over the pool — exact by
//! construction, with ties broken by ascending sample index so repeated runs
//! and different thread counts produce identical neighbor lists.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Below this L2 norm a vector is degenerate: it is excluded from pools and
/// rejected as a query.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// The K most similar pool members for one query, sorted by non-increasing
/// similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    indices: Vec<usize>,
    similarities: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Dataset sample indices, most similar first.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Cosine similarities aligned with [`NeighborSet::indices`].
    pub fn similarities(&self) -> &[f64] {
        &self.similarities
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.similarities.iter().copied())
    }
}

/// Cosine similarity of two feature vectors, clamped into [-1, 1] to absorb
/// round-off.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let norm_a = l2_norm(a);
    let norm_b = l2_norm(b);
    if norm_a < DEGENERATE_NORM || norm_b < DEGENERATE_NORM {
        return Err(Error::DegenerateVector { sample: None });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Immutable nearest-neighbor index over a pool of dataset rows.
///
/// Stores unit-normalized copies of every dataset row plus the pool of
/// searchable sample ids, so queries may come from outside the pool (the
/// correction stage queries noisy samples against a clean-only pool).
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    dim: usize,
    normalized: Vec<f64>, // row-major N×d; degenerate rows left untouched
    norms: Vec<f64>,
    degenerate: Vec<bool>,
    pool: Vec<usize>, // ascending dataset ids, degenerates removed
}

/// Builds an index over `subset` (or over every row when `None`).
///
/// Zero-norm rows are flagged degenerate and dropped from the pool; the
/// build fails only if nothing searchable remains.
pub fn build_index(dataset: &Dataset, subset: Option<&[usize]>) -> Result<SimilarityIndex> {
    build_inner(dataset.len(), dataset.dim(), |i| dataset.feature(i), subset)
}

/// Same as [`build_index`] but over arbitrary feature rows, e.g. a snapshot
/// of learned embeddings.
pub fn build_index_from_vectors<X: AsRef<[f64]>>(
    rows: &[X],
    subset: Option<&[usize]>,
) -> Result<SimilarityIndex> {
    let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    for row in rows {
        if row.as_ref().len() != dim {
            return Err(Error::ShapeMismatch {
                left: row.as_ref().len(),
                right: dim,
            });
        }
    }
    build_inner(rows.len(), dim, |i| rows[i].as_ref(), subset)
}

fn build_inner<'a, F>(
    n: usize,
    dim: usize,
    row_of: F,
    subset: Option<&[usize]>,
) -> Result<SimilarityIndex>
where
    F: Fn(usize) -> &'a [f64],
{
    let mut normalized = Vec::with_capacity(n * dim);
    let mut norms = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for i in 0..n {
        let row = row_of(i);
        let norm = l2_norm(row);
        norms.push(norm);
        if norm < DEGENERATE_NORM {
            degenerate.push(true);
            normalized.extend_from_slice(row);
        } else {
            degenerate.push(false);
            normalized.extend(row.iter().map(|x| x / norm));
        }
    }

    let mut pool: Vec<usize> = match subset {
        Some(ids) => {
            for &id in ids {
                if id >= n {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "pool index {id} out of range for {n} rows"
                    )));
                }
            }
            ids.to_vec()
        }
        None => (0..n).collect(),
    };
    pool.sort_unstable();
    pool.dedup();
    pool.retain(|&id| !degenerate[id]);
    if pool.is_empty() {
        return Err(Error::EmptyPool { query: None });
    }

    Ok(SimilarityIndex {
        dim,
        normalized,
        norms,
        degenerate,
        pool,
    })
}

impl SimilarityIndex {
    pub fn pool_ids(&self) -> &[usize] {
        &self.pool
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// Original L2 norm of row `i`, kept for zero-vector diagnostics.
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.normalized[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact K-nearest-neighbor query by dataset sample id.
    ///
    /// Returns the `k` pool members with the highest cosine similarity to the
    /// query, ties broken by ascending sample index. With `exclude_self` the
    /// query id is removed from the pool first. Pools smaller than `k` return
    /// everything they have.
    pub fn knn(&self, query_id: usize, k: usize, exclude_self: bool) -> Result<NeighborSet> {
        if query_id >= self.degenerate.len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "query index {query_id} out of range for {} rows",
                self.degenerate.len()
            )));
        }
        if k == 0 {
            return Err(Error::EmptyNeighborhood);
        }
        if self.degenerate[query_id] {
            return Err(Error::DegenerateVector {
                sample: Some(query_id),
            });
        }
        let query = self.row(query_id);
        let mut scored: Vec<(usize, f64)> = Vec::with_capacity(self.pool.len());
        for &id in &self.pool {
            if exclude_self && id == query_id {
                continue;
            }
            let dot: f64 = self.row(id).iter().zip(query).map(|(x, y)| x * y).sum();
            scored.push((id, dot.clamp(-1.0, 1.0)));
        }
        if scored.is_empty() {
            return Err(Error::EmptyPool {
                query: Some(query_id),
            });
        }
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(NeighborSet {
            indices: scored.iter().map(|&(id, _)| id).collect(),
            similarities: scored.iter().map(|&(_, s)| s).collect(),
        })
    }
}
