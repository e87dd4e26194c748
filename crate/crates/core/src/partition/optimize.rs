//! Reference refinement, the alternating optimizer and the choice of the
//! number of segments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{assign_by_distance, assign_by_similarity, CostParams, Partition, Segment, StepKind, TraceStep};
use crate::codec::SegmentCodec;
use crate::error::{Error, Result};
use crate::innovation::VisibilitySet;
use crate::navdomain::{DomainShape, NavigationDomain};

/// Largest useful number of segments: the domain size over the size of a
/// navigation ball around the central view.
pub fn max_segments(domain: &NavigationDomain, nt: usize) -> Result<usize> {
    if nt == 0 {
        return Err(Error::InvalidParameter("N_T must be at least 1".into()));
    }
    let ball = domain.navigation_ball(domain.center_index(), nt)?;
    Ok((domain.len() / ball.len()).max(1))
}

/// `nv` references spread evenly over the domain. On grids they sit on the
/// middle row.
pub fn equidistant_references(domain: &NavigationDomain, nv: usize) -> Result<Vec<usize>> {
    let (rows, cols) = domain.shape.dims();
    if nv == 0 || nv > cols {
        return Err(Error::InvalidParameter(format!("cannot place {nv} references on {cols} columns")));
    }
    let row = match domain.shape {
        DomainShape::Line { .. } => 0,
        DomainShape::Grid { .. } => rows / 2,
    };
    Ok((0..nv).map(|i| domain.index_of(row, (2 * i + 1) * cols / (2 * nv))).collect())
}

/// Member minimizing `|Y| + |phi|` for a fixed member set, with the
/// segment it produces. Ties go to the lower view index.
pub fn refine_reference(
    sets: &[VisibilitySet],
    members: &[usize],
    codec: &dyn SegmentCodec,
) -> Result<(usize, Segment)> {
    if members.is_empty() {
        return Err(Error::EmptySegment);
    }
    let candidates = members
        .par_iter()
        .map(|&r| Segment::build(sets, r, members, codec))
        .collect::<Result<Vec<_>>>()?;
    let best = candidates
        .into_iter()
        .min_by(|a, b| a.size_bits().cmp(&b.size_bits()).then(a.reference.cmp(&b.reference)))
        .expect("members is not empty");
    Ok((best.reference, best))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub max_iters: usize,
    /// Relative objective improvement below which an iteration counts as
    /// converged.
    pub epsilon: f64,
    /// Navigation period used to bound the number of segments.
    pub nt: usize,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self { max_iters: 10, epsilon: 1e-3, nt: 1 }
    }
}

/// Alternates similarity assignment and reference refinement from
/// equidistant references, returning the best partition seen.
pub fn lloyd_optimize(
    domain: &NavigationDomain,
    sets: &[VisibilitySet],
    nv: usize,
    params: &CostParams,
    codec: &dyn SegmentCodec,
    options: &LloydOptions,
) -> Result<Partition> {
    params.validate(domain.len())?;
    let max = max_segments(domain, options.nt)?;
    if nv == 0 || nv > max {
        return Err(Error::TooManySegments { requested: nv, max });
    }
    let mut refs = equidistant_references(domain, nv)?;
    let members = assign_by_distance(domain, &refs)?;
    let mut best = Partition::evaluate(sets, &refs, &members, params, codec)?;
    let mut trace = vec![TraceStep {
        iter: 0,
        step: StepKind::Init,
        objective: best.costs.objective,
        best_objective: best.costs.objective,
        refs: refs.clone(),
    }];
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=options.max_iters {
        iterations = iter;
        let before = best.costs.objective;

        let members = assign_by_similarity(domain, sets, &refs)?;
        let assigned = Partition::evaluate(sets, &refs, &members, params, codec)?;
        record(&mut trace, &mut best, assigned, iter, StepKind::Assign);

        let refined = members
            .iter()
            .map(|m| refine_reference(sets, m, codec))
            .collect::<Result<Vec<_>>>()?;
        refs = refined.iter().map(|(r, _)| *r).collect();
        let segments: Vec<Segment> = refined.into_iter().map(|(_, s)| s).collect();
        let costs = super::partition_costs(&segments, params);
        let partition = Partition { segments, costs, ..best.clone() };
        record(&mut trace, &mut best, partition, iter, StepKind::Refine);

        let after = best.costs.objective;
        if before <= 0.0 || (before - after) / before < options.epsilon {
            converged = true;
            break;
        }
    }
    best.segments.sort_by_key(|s| s.reference);
    best.trace = trace;
    best.converged = converged;
    best.iterations = iterations;
    Ok(best)
}

fn record(trace: &mut Vec<TraceStep>, best: &mut Partition, candidate: Partition, iter: usize, step: StepKind) {
    let objective = candidate.costs.objective;
    let refs = candidate.refs();
    if objective < best.costs.objective {
        *best = candidate;
    }
    trace.push(TraceStep { iter, step, objective, best_objective: best.costs.objective, refs });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NvRecord {
    pub nv: usize,
    pub mean_ref_bits: f64,
    pub mean_aux_bits: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NvSelection {
    pub mu: f64,
    pub nt: usize,
    pub max_segments: usize,
    pub records: Vec<NvRecord>,
    pub best_nv: usize,
}

impl NvSelection {
    /// Re-picks the best count for another `mu` from the same sizes.
    pub fn with_mu(&self, mu: f64) -> Self {
        let records: Vec<NvRecord> = self
            .records
            .iter()
            .map(|r| NvRecord { objective: (r.nv as f64 + mu) * (r.mean_ref_bits + r.mean_aux_bits), ..r.clone() })
            .collect();
        Self { mu, best_nv: argmin_nv(&records), records, ..self.clone() }
    }
}

fn argmin_nv(records: &[NvRecord]) -> usize {
    let mut best = &records[0];
    for r in &records[1..] {
        if r.objective < best.objective {
            best = r;
        }
    }
    best.nv
}

/// Scores every segment count from 1 to the maximum with
/// `(N_V + mu) * (mean |Y| + mean |phi|)`, where the mean reference size is
/// taken over all views and the mean auxiliary size over the segments of
/// the equidistant partition with `N_V` segments.
pub fn select_num_segments(
    domain: &NavigationDomain,
    sets: &[VisibilitySet],
    params: &CostParams,
    codec: &dyn SegmentCodec,
    nt: usize,
) -> Result<NvSelection> {
    params.validate(domain.len())?;
    let max = max_segments(domain, nt)?.min(domain.shape.dims().1);
    let ref_bits = (0..domain.len()).into_par_iter().map(|v| codec.reference_bits(v)).collect::<Result<Vec<_>>>()?;
    let mean_ref = ref_bits.iter().sum::<u64>() as f64 / ref_bits.len() as f64;
    let records = (1..=max)
        .into_par_iter()
        .map(|nv| {
            let refs = equidistant_references(domain, nv)?;
            let members = assign_by_distance(domain, &refs)?;
            let mut aux = 0u64;
            for (&r, m) in refs.iter().zip(&members) {
                aux += Segment::build(sets, r, m, codec)?.aux_bits;
            }
            let mean_aux = aux as f64 / nv as f64;
            Ok(NvRecord {
                nv,
                mean_ref_bits: mean_ref,
                mean_aux_bits: mean_aux,
                objective: (nv as f64 + params.mu) * (mean_ref + mean_aux),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NvSelection { mu: params.mu, nt, max_segments: max, best_nv: argmin_nv(&records), records })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{line, sliding_sets};
    use super::*;
    use crate::codec::LinearCodec;

    #[test]
    fn max_segments_examples() {
        let d = line(120);
        assert_eq!(max_segments(&d, 5).unwrap(), 13);
        assert_eq!(max_segments(&d, 1).unwrap(), 120);
        assert!(max_segments(&d, 0).is_err());
    }

    #[test]
    fn equidistant_positions() {
        let d = line(120);
        assert_eq!(equidistant_references(&d, 1).unwrap(), vec![60]);
        assert_eq!(equidistant_references(&d, 3).unwrap(), vec![20, 60, 100]);
    }

    #[test]
    fn refine_single_member_and_symmetric_segment() {
        // A finite wall [4, 24) seen through a 20-id window sliding by one
        // id per view: only the middle view sees all of it.
        let sets: Vec<VisibilitySet> =
            (0..9u32).map(|k| VisibilitySet::new(k as usize, (k.max(4)..(k + 20).min(24)).collect())).collect();
        let codec = LinearCodec { reference: vec![500; 9], bits_per_voxel: 4.0 };
        assert_eq!(refine_reference(&sets, &[3], &codec).unwrap().0, 3);
        let members: Vec<usize> = (0..9).collect();
        assert_eq!(refine_reference(&sets, &members, &codec).unwrap().0, 4);
        assert!(matches!(refine_reference(&sets, &[], &codec), Err(Error::EmptySegment)));
    }

    #[test]
    fn refine_matches_exhaustive_sweep() {
        let sets = sliding_sets(10, 15, 2);
        let codec = LinearCodec { reference: vec![900, 700, 650, 800, 640, 900, 1000, 500, 990, 999], bits_per_voxel: 6.0 };
        let members: Vec<usize> = (0..10).collect();
        let (best, seg) = refine_reference(&sets, &members, &codec).unwrap();
        for &r in &members {
            let other = Segment::build(&sets, r, &members, &codec).unwrap();
            assert!(seg.size_bits() <= other.size_bits());
            if other.size_bits() == seg.size_bits() {
                assert!(best <= r);
            }
        }
    }

    #[test]
    fn single_segment_lloyd_is_a_refine_sweep() {
        let d = line(15);
        let sets = sliding_sets(15, 20, 1);
        let codec = LinearCodec { reference: (0..15).map(|k| 400 + (k as u64 * 37) % 50).collect(), bits_per_voxel: 4.0 };
        let params = CostParams::new(&d, 0.1, 0.0, 16).unwrap();
        let p = lloyd_optimize(&d, &sets, 1, &params, &codec, &LloydOptions::default()).unwrap();
        let all: Vec<usize> = (0..15).collect();
        let (r, _) = refine_reference(&sets, &all, &codec).unwrap();
        assert_eq!(p.segments[0].reference, r);
        assert!(p.trace.windows(2).all(|w| w[1].best_objective <= w[0].best_objective));
    }

    #[test]
    fn too_many_segments_rejected() {
        let d = line(20);
        let sets = sliding_sets(20, 20, 1);
        let codec = LinearCodec { reference: vec![100; 20], bits_per_voxel: 1.0 };
        let params = CostParams::new(&d, 0.0, 0.0, 16).unwrap();
        let opts = LloydOptions { nt: 5, ..Default::default() };
        assert!(matches!(
            lloyd_optimize(&d, &sets, 3, &params, &codec, &opts),
            Err(Error::TooManySegments { requested: 3, max: 2 })
        ));
    }

    #[test]
    fn nv_selection_prefers_one_when_aux_is_flat() {
        let d = line(30);
        // Identical views: no innovation at all.
        let sets: Vec<VisibilitySet> = (0..30).map(|k| VisibilitySet::new(k, (0..50).collect())).collect();
        let codec = LinearCodec { reference: vec![1000; 30], bits_per_voxel: 8.0 };
        let params = CostParams::new(&d, 0.0, 0.0, 16).unwrap();
        let sel = select_num_segments(&d, &sets, &params, &codec, 3).unwrap();
        assert_eq!(sel.best_nv, 1);
        assert!(sel.records.iter().all(|r| r.mean_aux_bits == 0.0));
        for r in &sel.records {
            assert!((r.objective - (r.nv as f64) * (r.mean_ref_bits + r.mean_aux_bits)).abs() < 1e-9);
        }
    }

    #[test]
    fn nv_selection_grows_with_mu() {
        let d = line(40);
        let sets = sliding_sets(40, 10, 1);
        let codec = LinearCodec { reference: vec![200; 40], bits_per_voxel: 30.0 };
        let params = CostParams::new(&d, 0.0, 0.1, 16).unwrap();
        let sel = select_num_segments(&d, &sets, &params, &codec, 2).unwrap();
        let picks: Vec<usize> = [0.1, 0.2, 0.3, 1.0, 3.0].iter().map(|&mu| sel.with_mu(mu).best_nv).collect();
        assert!(picks.windows(2).all(|w| w[0] <= w[1]), "{picks:?}");
    }
}
