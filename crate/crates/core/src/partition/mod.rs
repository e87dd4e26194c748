//! Navigation segments: assignment of views to references, coded sizes and
//! the storage/rate objective.

mod optimize;

pub use optimize::{
    equidistant_references, lloyd_optimize, max_segments, refine_reference, select_num_segments, LloydOptions,
    NvRecord, NvSelection,
};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::SegmentCodec;
use crate::error::{Error, Result};
use crate::innovation::{segment_innovation, similarity, SegmentInnovation, VisibilitySet};
use crate::navdomain::{segment_popularity, NavigationDomain, PopularityDist};

#[derive(Debug, Clone, PartialEq)]
pub struct CostParams {
    /// Storage multiplier.
    pub lambda: f64,
    /// Rate weight used when choosing the number of segments.
    pub mu: f64,
    pub q: u32,
    pub popularity: PopularityDist,
}

impl CostParams {
    pub fn new(domain: &NavigationDomain, lambda: f64, mu: f64, q: u32) -> Result<Self> {
        let params = Self { lambda, mu, q, popularity: domain.popularity.clone() };
        params.validate(domain.len())?;
        Ok(params)
    }

    pub fn validate(&self, n_views: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be a nonnegative number".into()));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter("mu must be a nonnegative number".into()));
        }
        if self.q == 0 {
            return Err(Error::InvalidParameter("q must be positive".into()));
        }
        if self.popularity.len() != n_views {
            return Err(Error::InvalidParameter("popularity does not match the domain size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub reference: usize,
    pub members: Vec<usize>,
    pub ref_bits: u64,
    pub aux_bits: u64,
    pub phi_size: usize,
    /// Innovation voxel ids.
    #[serde(default)]
    pub phi: Vec<u32>,
}

impl Segment {
    /// Codes a segment with the given reference and members.
    pub fn build(sets: &[VisibilitySet], reference: usize, members: &[usize], codec: &dyn SegmentCodec) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptySegment);
        }
        let innovation = segment_innovation(sets, reference, members)?;
        let ref_bits = codec.reference_bits(reference)?;
        let aux_bits = codec.aux_bits(&innovation)?;
        Ok(Self {
            reference,
            members: innovation.member_indices.clone(),
            ref_bits,
            aux_bits,
            phi_size: innovation.size(),
            phi: innovation.ids,
        })
    }

    /// `|Y| + |phi|`.
    pub fn size_bits(&self) -> u64 {
        self.ref_bits + self.aux_bits
    }

    pub fn innovation(&self) -> SegmentInnovation {
        SegmentInnovation { reference_index: self.reference, member_indices: self.members.clone(), ids: self.phi.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    /// Total stored bits.
    pub storage: f64,
    /// Expected bits sent to one user.
    pub rate: f64,
    /// `rate + lambda * storage`.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Init,
    Assign,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iter: usize,
    pub step: StepKind,
    pub objective: f64,
    /// Lowest objective seen up to and including this step.
    pub best_objective: f64,
    pub refs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub lambda: f64,
    pub q: u32,
    pub n_views: usize,
    pub segments: Vec<Segment>,
    pub costs: Costs,
    #[serde(default)]
    pub trace: Vec<TraceStep>,
    /// Whether the optimizer stopped on the tolerance rather than the
    /// iteration cap.
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub iterations: usize,
}

impl Partition {
    /// Codes every segment and totals the costs. `members[i]` belongs to
    /// `refs[i]`.
    pub fn evaluate(
        sets: &[VisibilitySet],
        refs: &[usize],
        members: &[Vec<usize>],
        params: &CostParams,
        codec: &dyn SegmentCodec,
    ) -> Result<Self> {
        if refs.len() != members.len() {
            return Err(Error::InvalidParameter("one member list per reference is required".into()));
        }
        let segments = refs
            .par_iter()
            .zip(members.par_iter())
            .map(|(&r, m)| Segment::build(sets, r, m, codec))
            .collect::<Result<Vec<_>>>()?;
        let costs = partition_costs(&segments, params);
        let partition = Self {
            lambda: params.lambda,
            q: params.q,
            n_views: sets.len(),
            segments,
            costs,
            trace: Vec::new(),
            converged: false,
            iterations: 0,
        };
        partition.check_cover()?;
        Ok(partition)
    }

    pub fn refs(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.reference).collect()
    }

    /// Segment id of every view.
    pub fn membership(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n_views];
        for (s, seg) in self.segments.iter().enumerate() {
            for &m in &seg.members {
                out[m] = s;
            }
        }
        out
    }

    pub fn segment_of(&self, view: usize) -> Option<usize> {
        self.segments.iter().position(|s| s.members.binary_search(&view).is_ok())
    }

    /// Every view in exactly one segment and each reference in its own.
    pub fn check_cover(&self) -> Result<()> {
        let mut seen = vec![false; self.n_views];
        for seg in &self.segments {
            if seg.members.is_empty() {
                return Err(Error::EmptySegment);
            }
            if seg.members.binary_search(&seg.reference).is_err() {
                return Err(Error::ReferenceNotMember(seg.reference));
            }
            for &m in &seg.members {
                if m >= self.n_views {
                    return Err(Error::IndexOutOfRange { index: m, len: self.n_views });
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(Error::InvalidParameter(format!("view {m} is in two segments")));
                }
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("view {m} is in no segment")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.check_cover()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Storage, expected rate and objective of a set of coded segments.
pub fn partition_costs(segments: &[Segment], params: &CostParams) -> Costs {
    let mut storage = 0.0;
    let mut rate = 0.0;
    for seg in segments {
        let size = seg.size_bits() as f64;
        storage += size;
        rate += segment_popularity(&params.popularity, &seg.members) * size;
    }
    Costs { storage, rate, objective: rate + params.lambda * storage }
}

fn check_refs(domain: &NavigationDomain, refs: &[usize]) -> Result<()> {
    if refs.is_empty() {
        return Err(Error::InvalidParameter("at least one reference is required".into()));
    }
    for (k, &r) in refs.iter().enumerate() {
        domain.check_index(r)?;
        if refs[..k].contains(&r) {
            return Err(Error::DuplicateReference(r));
        }
    }
    Ok(())
}

/// Distances closer than this relative gap count as equal.
const DISTANCE_TIE: f64 = 1e-9;

fn cmp_distance(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= DISTANCE_TIE * a.max(b) {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Index into `refs` of the candidate with the smallest key, comparing the
/// first component, then the distance, then the reference view index.
fn pick(refs: &[usize], mut key: impl FnMut(usize) -> (std::cmp::Reverse<usize>, f64)) -> usize {
    let mut best = 0;
    let mut best_key = key(refs[0]);
    for (k, &r) in refs.iter().enumerate().skip(1) {
        let cand = key(r);
        let ord = cand.0.cmp(&best_key.0).then(cmp_distance(cand.1, best_key.1)).then(r.cmp(&refs[best]));
        if ord == std::cmp::Ordering::Less {
            best = k;
            best_key = cand;
        }
    }
    best
}

fn group(refs: &[usize], owner: impl Fn(usize) -> usize, n: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); refs.len()];
    for v in 0..n {
        members[owner(v)].push(v);
    }
    members
}

/// Each view joins its nearest reference; ties go to the lower reference
/// view index. Returns the members of each reference, in `refs` order.
pub fn assign_by_distance(domain: &NavigationDomain, refs: &[usize]) -> Result<Vec<Vec<usize>>> {
    check_refs(domain, refs)?;
    let owner = |v: usize| pick(refs, |r| (std::cmp::Reverse(0), domain.view_distance(v, r)));
    Ok(group(refs, owner, domain.len()))
}

/// Each view joins the reference it shares the most voxels with; ties go to
/// the nearer reference, then to the lower reference view index. A
/// reference always owns itself.
pub fn assign_by_similarity(
    domain: &NavigationDomain,
    sets: &[VisibilitySet],
    refs: &[usize],
) -> Result<Vec<Vec<usize>>> {
    check_refs(domain, refs)?;
    if sets.len() != domain.len() {
        return Err(Error::InvalidParameter("one visibility set per view is required".into()));
    }
    let owners: Vec<usize> = (0..domain.len())
        .into_par_iter()
        .map(|v| match refs.iter().position(|&r| r == v) {
            Some(k) => k,
            None => pick(refs, |r| {
                (std::cmp::Reverse(similarity(&sets[v], &sets[r])), domain.view_distance(v, r))
            }),
        })
        .collect();
    Ok(group(refs, |v| owners[v], domain.len()))
}
