//! Uniform landmark sampling without replacement.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Ordered set of distinct landmark indices in draw order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSample {
    indices: Vec<usize>,
    parent: Option<Arc<IndexSample>>,
}

impl IndexSample {
    /// Validates distinctness and range against `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in &indices {
            if i >= n {
                return Err(Error::param(format!("landmark {i} out of range for n = {n}")));
            }
            if !seen.insert(i) {
                return Err(Error::param(format!("duplicate landmark {i}")));
            }
        }
        Ok(Self { indices, parent: None })
    }

    /// Attaches a superset; fails unless every index is contained in it.
    pub fn with_parent(mut self, parent: Arc<IndexSample>) -> Result<Self> {
        let sup: HashSet<usize> = parent.indices.iter().copied().collect();
        if let Some(i) = self.indices.iter().find(|i| !sup.contains(i)) {
            return Err(Error::param(format!("landmark {i} missing from parent sample")));
        }
        self.parent = Some(parent);
        Ok(self)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn parent(&self) -> Option<&IndexSample> {
        self.parent.as_deref()
    }

    /// Position of dataset index `i` in this sample.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.indices.iter().position(|&k| k == i)
    }
}

fn check_size(n: usize, s: usize) -> Result<()> {
    if s < 1 || s > n {
        return Err(Error::param(format!("sample size {s} must lie in [1, {n}]")));
    }
    Ok(())
}

fn draw(n: usize, s: usize, seed: u64, stream: Stream) -> Vec<usize> {
    index::sample(&mut rng::stream(seed, stream), n, s).into_vec()
}

/// `s` distinct indices from `[0, n)`, uniformly without replacement.
pub fn sample_uniform(n: usize, s: usize, seed: u64) -> Result<IndexSample> {
    check_size(n, s)?;
    Ok(IndexSample { indices: draw(n, s, seed, Stream::Landmarks), parent: None })
}

/// A second uniform sample on its own stream, independent of [`sample_uniform`]
/// under the same seed.
pub fn sample_independent(n: usize, s: usize, seed: u64) -> Result<IndexSample> {
    check_size(n, s)?;
    Ok(IndexSample { indices: draw(n, s, seed, Stream::RowLandmarks), parent: None })
}

/// Nested pair `S1 ⊆ S2` with `|S1| = s1`, `|S2| = s2`.
///
/// `S1` is drawn exactly as [`sample_uniform`] draws it and `S2` extends it
/// with `s2 - s1` uniform indices from the complement, so `S1` is a prefix
/// of `S2`. The joint law equals drawing `S2` uniformly and then `S1`
/// uniformly inside it.
pub fn sample_nested(n: usize, s1: usize, s2: usize, seed: u64) -> Result<(IndexSample, IndexSample)> {
    if s1 > s2 {
        return Err(Error::param(format!("nested sample needs s1 <= s2, got {s1} > {s2}")));
    }
    check_size(n, s1)?;
    check_size(n, s2)?;
    let inner = draw(n, s1, seed, Stream::Landmarks);
    let mut outer = inner.clone();
    if s2 > s1 {
        let taken: HashSet<usize> = inner.iter().copied().collect();
        let rest: Vec<usize> = (0..n).filter(|i| !taken.contains(i)).collect();
        let ext = index::sample(&mut rng::stream(seed, Stream::NestedExtension), rest.len(), s2 - s1);
        outer.extend(ext.into_iter().map(|k| rest[k]));
    }
    let outer = Arc::new(IndexSample { indices: outer, parent: None });
    let inner = IndexSample { indices: inner, parent: Some(Arc::clone(&outer)) };
    Ok((inner, (*outer).clone()))
}
