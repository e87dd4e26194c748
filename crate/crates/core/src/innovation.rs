//! Set algebra over voxel visibility: pairwise innovation, geometric
//! similarity and deduplicated segment innovation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel ids seen from one view, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilitySet {
    pub view_index: usize,
    ids: Vec<u32>,
}

impl VisibilitySet {
    pub fn new(view_index: usize, mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { view_index, ids }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }
}

/// `a \ b` over sorted slices.
pub(crate) fn sorted_difference(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

fn intersection_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Voxels of `a` that `b` does not see: `S_a \ S_b`.
pub fn pairwise_innovation(a: &VisibilitySet, b: &VisibilitySet) -> Vec<u32> {
    sorted_difference(&a.ids, &b.ids)
}

/// Number of voxels seen by both views.
pub fn similarity(a: &VisibilitySet, b: &VisibilitySet) -> usize {
    intersection_count(&a.ids, &b.ids)
}

/// Voxels visible somewhere in a segment but not from its reference, each
/// counted once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInnovation {
    pub reference_index: usize,
    pub member_indices: Vec<usize>,
    pub ids: Vec<u32>,
}

impl SegmentInnovation {
    pub fn size(&self) -> usize {
        self.ids.len()
    }
}

/// Builds the segment innovation of `members` against `reference`.
/// `sets[k]` must be the visibility set of view `k`.
pub fn segment_innovation(sets: &[VisibilitySet], reference: usize, members: &[usize]) -> Result<SegmentInnovation> {
    if !members.contains(&reference) {
        return Err(Error::ReferenceNotMember(reference));
    }
    for &m in members.iter().chain(std::iter::once(&reference)) {
        if m >= sets.len() {
            return Err(Error::IndexOutOfRange { index: m, len: sets.len() });
        }
    }
    let reference_ids = sets[reference].ids();
    let mut union: Vec<u32> = members
        .iter()
        .filter(|&&m| m != reference)
        .flat_map(|&m| sorted_difference(sets[m].ids(), reference_ids))
        .collect();
    union.sort_unstable();
    union.dedup();
    let mut member_indices = members.to_vec();
    member_indices.sort_unstable();
    member_indices.dedup();
    Ok(SegmentInnovation { reference_index: reference, member_indices, ids: union })
}
