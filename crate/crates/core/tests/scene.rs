mod common;

use navseg::scene::{build_scene, project_voxel, render_view, visible_set, CameraPose, EMPTY};
use navseg::Dataset;

#[test]
fn desk_views_match_raycast_oracle() {
    let ds = common::desk();
    for k in [0, 37, 59, 60, 119] {
        let want = common::raycast_ids(&ds.scene, ds.domain.poses[k], ds.domain.intrinsics);
        assert_eq!(ds.views[k].ids, want, "view {k}");
    }
}

#[test]
fn small_desk_is_under_ten_thousand_voxels() {
    let scene = build_scene(&common::small_desk(12)).unwrap();
    assert!(scene.voxel_count() <= 10_000, "{}", scene.voxel_count());
}

#[test]
fn visible_set_size_equals_filled_pixels() {
    let ds = common::occluder();
    for (view, set) in ds.views.iter().zip(&ds.sets) {
        assert_eq!(set.len(), view.filled_count());
        assert_eq!(set.len(), common::id_set(&view.ids).len());
    }
}

#[test]
fn rendered_depth_is_consistent_with_voxel_projection() {
    let ds = common::desk();
    let view = &ds.views[60];
    let intr = ds.domain.intrinsics;
    for (p, &id) in view.ids.iter().enumerate() {
        if id == EMPTY {
            continue;
        }
        let voxel = ds.scene.voxel(id);
        let ((i, j), z) = project_voxel(voxel, view.pose, intr).expect("visible voxel projects in frame");
        let (pi, pj) = (p % intr.width, p / intr.width);
        assert!(i.abs_diff(pi) <= 2 && j.abs_diff(pj) <= 2, "voxel {id} at {p}");
        // Pixel depth is along the ray, voxel depth along the optical axis.
        assert!((view.depth[p] - z).abs() < 0.05 * z, "depth {} vs {z}", view.depth[p]);
    }
}

#[test]
fn rendering_is_deterministic() {
    let cfg = common::small_desk(3);
    let a = Dataset::from_config(&cfg).unwrap();
    let b = Dataset::from_config(&cfg).unwrap();
    for (x, y) in a.views.iter().zip(&b.views) {
        assert_eq!(x.ids, y.ids);
        assert_eq!(x.color, y.color);
    }
}

#[test]
fn box_hides_background_behind_it() {
    let ds = common::desk();
    let view = &ds.views[60];
    let n_bg = ds.scene.faces[0].cell_count() as u32;
    let front = view.ids.iter().filter(|&&id| id != EMPTY && id >= n_bg).count();
    assert!(front > 0);
    for (p, &id) in view.ids.iter().enumerate() {
        if id != EMPTY && id >= n_bg {
            assert!(view.depth[p] < ds.scene.config.background.z);
        }
    }
}

#[test]
fn visible_set_is_sorted_and_unique() {
    let ds = common::desk();
    let pose = CameraPose::at(0.0, 0.0, 0.5);
    let view = render_view(&ds.scene, pose, ds.domain.intrinsics).unwrap();
    let set = visible_set(0, &view);
    assert!(set.ids().windows(2).all(|w| w[0] < w[1]));
    assert_eq!(set.ids().iter().copied().collect::<std::collections::BTreeSet<_>>(), common::id_set(&view.ids));
}
