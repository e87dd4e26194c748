mod common;

use std::collections::HashSet;

use navseg::codec::{encode_reference, reconstruct_view, DctCodec, PixelSource, ReconstructOptions};
use navseg::innovation::segment_innovation;
use navseg::scene::EMPTY;

#[test]
fn lossless_reference_reconstructs_itself_exactly() {
    let ds = common::desk();
    let members: Vec<usize> = (50..70).collect();
    let reference = encode_reference(60, &ds.views[60], 1).unwrap();
    let rec = reconstruct_view(&reference, None, &members, 60, &ds.domain, &ReconstructOptions::default()).unwrap();
    let q = rec.quality(&ds.views[60], &ds.sets[60]);
    assert!(q.exact, "mse {}", q.mse);
    for (k, &id) in ds.views[60].ids.iter().enumerate() {
        if id != EMPTY {
            assert_eq!(rec.source[k], PixelSource::Reference(k as u32));
        }
    }
}

#[test]
fn innovation_fixes_disocclusions() {
    let ds = common::occluder();
    let codec = DctCodec::new(ds, 16);
    let members: Vec<usize> = (20..45).collect();
    let phi = segment_innovation(&ds.sets, 32, &members).unwrap();
    let reference = codec.encode_reference(32).unwrap();
    let aux = codec.encode_aux(&phi).unwrap();
    let options = ReconstructOptions::default();
    for target in [20, 26, 38, 44] {
        let with = reconstruct_view(&reference, Some(&aux), &members, target, &ds.domain, &options).unwrap();
        let without = reconstruct_view(&reference, None, &members, target, &ds.domain, &options).unwrap();
        let (q1, q0) = (with.quality(&ds.views[target], &ds.sets[32]), without.quality(&ds.views[target], &ds.sets[32]));
        assert!(q1.disoccluded_pixels > 0);
        assert!(q1.disoccluded_mse < q0.disoccluded_mse, "view {target}");
        assert!(q1.psnr >= 30.0, "view {target}: {}", q1.psnr);
    }
}

#[test]
fn decoder_reads_only_reference_and_innovation() {
    let ds = common::desk();
    let codec = DctCodec::new(ds, 16);
    let members: Vec<usize> = (0..30).collect();
    let phi = segment_innovation(&ds.sets, 15, &members).unwrap();
    let reference = codec.encode_reference(15).unwrap();
    let aux = codec.encode_aux(&phi).unwrap();
    let allowed: HashSet<u32> = ds.sets[15].ids().iter().chain(&phi.ids).copied().collect();
    for target in [0, 29] {
        let rec =
            reconstruct_view(&reference, Some(&aux), &members, target, &ds.domain, &ReconstructOptions::default())
                .unwrap();
        let touched = rec.touched_voxels(&ds.views[15]);
        assert!(!touched.is_empty());
        assert!(touched.is_subset(&allowed));
    }
}

#[test]
fn target_outside_segment_is_rejected() {
    let ds = common::desk();
    let reference = encode_reference(5, &ds.views[5], 16).unwrap();
    let opts = ReconstructOptions::default();
    assert!(reconstruct_view(&reference, None, &[4, 5, 6], 7, &ds.domain, &opts).is_err());
    assert!(reconstruct_view(&reference, None, &[6, 7], 7, &ds.domain, &opts).is_err());
}
