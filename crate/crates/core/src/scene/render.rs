//! Z-buffered rendering with per-pixel voxel identities.

use std::collections::HashMap;

use super::camera::{Camera, CameraIntrinsics, CameraPose};
use super::{SceneModel, Voxel};
use crate::error::{Error, Result};
use crate::innovation::VisibilitySet;

/// Voxel id of a pixel that sees nothing.
pub const EMPTY: u32 = u32::MAX;

/// A rendered observation: color, camera depth and voxel id per pixel,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
    pub color: Vec<[u8; 3]>,
    pub depth: Vec<f64>,
    pub ids: Vec<u32>,
}

impl ViewImage {
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn camera(&self) -> Camera {
        Camera::new(self.pose, self.intrinsics)
    }

    pub fn filled_count(&self) -> usize {
        self.ids.iter().filter(|&&id| id != EMPTY).count()
    }
}

/// All positive hits of a pixel ray, nearest first, ties by lower voxel id.
fn ray_hits(scene: &SceneModel, cam: &Camera, i: usize, j: usize) -> Vec<(f64, u32)> {
    let (o, d) = cam.pixel_ray(i, j);
    let mut hits: Vec<(f64, u32)> = scene.faces.iter().filter_map(|f| f.intersect(o, d)).collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits
}

/// Squared distance from a pixel center to the projection of a voxel.
fn claim_distance(cam: &Camera, voxel: &Voxel, pixel: usize) -> f64 {
    let w = cam.intrinsics.width;
    let (pi, pj) = ((pixel % w) as f64 + 0.5, (pixel / w) as f64 + 0.5);
    match cam.project(voxel.position) {
        Some(p) => (p.u - pi).powi(2) + (p.v - pj).powi(2),
        None => f64::INFINITY,
    }
}

/// Renders `scene` from `pose`.
///
/// Each pixel takes the nearest voxel along its ray. When several pixels
/// land on the same voxel, the pixel whose center is closest to the voxel's
/// projection keeps it and the others fall back to their next hit along the
/// ray, so that no voxel id appears twice in a view.
pub fn render_view(scene: &SceneModel, pose: CameraPose, intr: CameraIntrinsics) -> Result<ViewImage> {
    intr.validate()?;
    if !pose.is_finite() {
        return Err(Error::InvalidParameter("pose has non-finite components".into()));
    }
    let cam = Camera::new(pose, intr);
    let n = intr.pixel_count();
    let hits: Vec<Vec<(f64, u32)>> =
        (0..n).map(|p| ray_hits(scene, &cam, p % intr.width, p / intr.width)).collect();

    let mut rank = vec![0usize; n];
    let mut owner: HashMap<u32, usize> = HashMap::with_capacity(n);
    let mut pending: Vec<usize> = (0..n).rev().collect();
    while let Some(p) = pending.pop() {
        while let Some(&(_, id)) = hits[p].get(rank[p]) {
            match owner.get(&id).copied() {
                None => {
                    owner.insert(id, p);
                    break;
                }
                Some(q) => {
                    let voxel = scene.voxel(id);
                    let (dp, dq) = (claim_distance(&cam, voxel, p), claim_distance(&cam, voxel, q));
                    if dp < dq || (dp == dq && p < q) {
                        owner.insert(id, p);
                        rank[q] += 1;
                        pending.push(q);
                        break;
                    }
                    rank[p] += 1;
                }
            }
        }
    }

    let mut color = vec![[0u8; 3]; n];
    let mut depth = vec![0.0; n];
    let mut ids = vec![EMPTY; n];
    for p in 0..n {
        if let Some(&(t, id)) = hits[p].get(rank[p]) {
            color[p] = scene.voxel(id).color;
            depth[p] = t;
            ids[p] = id;
        }
    }
    if ids.iter().all(|&id| id == EMPTY) {
        return Err(Error::EmptyView(format!("{pose:?}")));
    }
    Ok(ViewImage { pose, intrinsics: intr, color, depth, ids })
}

/// Set of voxel ids seen by a view.
pub fn visible_set(view_index: usize, view: &ViewImage) -> VisibilitySet {
    VisibilitySet::new(view_index, view.ids.iter().copied().filter(|&id| id != EMPTY).collect())
}

/// In-frame pixel and depth of a voxel, or `None` when it is behind the
/// camera or outside the image.
pub fn project_voxel(voxel: &Voxel, pose: CameraPose, intr: CameraIntrinsics) -> Option<((usize, usize), f64)> {
    let cam = Camera::new(pose, intr);
    let p = cam.project(voxel.position)?;
    Some((p.pixel(&intr)?, p.depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, BackgroundConfig, BoxConfig, SceneConfig, Texture};

    fn plane_scene() -> SceneModel {
        build_scene(&SceneConfig {
            name: None,
            background: BackgroundConfig {
                z: 4.0,
                width: 4.0,
                height: 3.0,
                center: [0.0, 0.0],
                texture: Texture::Checker { cell: 0.1, a: [200, 60, 40], b: [30, 90, 220] },
            },
            boxes: vec![],
            pitch: 0.01,
            intrinsics: CameraIntrinsics::new(200.0, 64, 48),
            domain: None,
        })
        .unwrap()
    }

    #[test]
    fn frontal_plane_fills_frame() {
        let scene = plane_scene();
        let intr = CameraIntrinsics::new(200.0, 64, 48);
        let view = render_view(&scene, CameraPose::at(0.005, 0.005, 0.0), intr).unwrap();
        assert_eq!(view.filled_count(), 64 * 48);
        assert!(view.depth.iter().all(|d| (d - 4.0).abs() < 1e-9));
        let set = visible_set(0, &view);
        assert_eq!(set.len(), 3072);
    }

    #[test]
    fn box_occludes_plane() {
        let mut cfg = plane_scene().config;
        cfg.boxes.push(BoxConfig { center: [0.0, 0.0, 2.2], size: [0.2, 0.2, 0.4], texture: Texture::default() });
        let scene = build_scene(&cfg).unwrap();
        let intr = CameraIntrinsics::new(200.0, 64, 48);
        let view = render_view(&scene, CameraPose::at(0.005, 0.005, 0.0), intr).unwrap();
        let center = 24 * 64 + 32;
        assert!((view.depth[center] - 2.0).abs() < 1e-9);
        assert!((view.depth[0] - 4.0).abs() < 1e-9);
        assert!(view.depth[center] < view.depth[0]);
    }

    #[test]
    fn empty_view_is_signalled() {
        let scene = plane_scene();
        let intr = CameraIntrinsics::new(200.0, 64, 48);
        let away = CameraPose { ry: std::f64::consts::PI, ..CameraPose::default() };
        assert!(matches!(render_view(&scene, away, intr), Err(Error::EmptyView(_))));
    }

    #[test]
    fn project_voxel_on_axis_and_behind() {
        let intr = CameraIntrinsics::new(200.0, 64, 48);
        let v = Voxel { id: 0, position: [0.0, 0.0, 3.0], color: [0; 3] };
        let ((i, j), d) = project_voxel(&v, CameraPose::default(), intr).unwrap();
        assert_eq!((i, j), (32, 24));
        assert!((d - 3.0).abs() < 1e-12);
        let behind = Voxel { position: [0.0, 0.0, -1.0], ..v };
        assert!(project_voxel(&behind, CameraPose::default(), intr).is_none());
    }

    #[test]
    fn oversampled_surface_keeps_bijection() {
        // Pixel footprint (4/400 = 1cm) is finer than the 3cm pitch, so many
        // pixels land on the same voxel.
        let mut cfg = plane_scene().config;
        cfg.pitch = 0.03;
        let scene = build_scene(&cfg).unwrap();
        let intr = CameraIntrinsics::new(400.0, 32, 24);
        let view = render_view(&scene, CameraPose::default(), intr).unwrap();
        let set = visible_set(0, &view);
        assert_eq!(set.len(), view.filled_count());
    }
}
