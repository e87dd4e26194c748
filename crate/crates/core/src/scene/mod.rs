//! Procedural scenes made of a textured background plane and axis-aligned
//! boxes, sampled into voxels on a regular surface grid.

mod camera;
mod render;
mod texture;

pub use camera::{Camera, CameraIntrinsics, CameraPose, Projection, Vec3};
pub use render::{project_voxel, render_view, visible_set, ViewImage, EMPTY};
pub use texture::Texture;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::navdomain::DomainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundConfig {
    /// Depth of the vertical background plane.
    pub z: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxConfig {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub texture: Texture,
}

/// Scene description as stored in scene JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub background: BackgroundConfig,
    #[serde(default)]
    pub boxes: Vec<BoxConfig>,
    pub pitch: f64,
    pub intrinsics: CameraIntrinsics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One sampled surface point. Its color does not depend on the viewer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voxel {
    pub id: u32,
    pub position: Vec3,
    pub color: [u8; 3],
}

/// A planar, axis-aligned rectangle of voxel cells. Cell `(iu, iv)` covers
/// the half-open square `[u_min + iu*p, u_min + (iu+1)*p)` times the same in v.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub normal_axis: usize,
    pub coord: f64,
    /// Whether the outward normal points along +`normal_axis`.
    pub outward_positive: bool,
    pub u_axis: usize,
    pub v_axis: usize,
    pub u_min: f64,
    pub v_min: f64,
    pub nu: usize,
    pub nv: usize,
    pub pitch: f64,
    pub first_id: u32,
}

/// Index of the half-open cell `[min + i*p, min + (i+1)*p)` containing `x`.
/// Boundaries are evaluated with exactly the expressions of [`Face::cell_bounds`].
fn cell_index(x: f64, min: f64, n: usize, pitch: f64) -> Option<usize> {
    let r = ((x - min) / pitch).floor();
    if !(r >= -1.0 && r <= n as f64) {
        return None;
    }
    let mut i = r as i64;
    while i > 0 && x < min + i as f64 * pitch {
        i -= 1;
    }
    while x >= min + (i + 1) as f64 * pitch {
        i += 1;
    }
    if i < 0 || i as usize >= n || x < min + i as f64 * pitch {
        return None;
    }
    Some(i as usize)
}

impl Face {
    pub fn cell_count(&self) -> usize {
        self.nu * self.nv
    }

    pub fn contains_id(&self, id: u32) -> bool {
        id >= self.first_id && ((id - self.first_id) as usize) < self.cell_count()
    }

    /// `(iu, iv)` of a voxel on this face.
    pub fn cell_of(&self, id: u32) -> (usize, usize) {
        let k = (id - self.first_id) as usize;
        (k % self.nu, k / self.nu)
    }

    /// Half-open bounds of a cell along one surface axis.
    pub fn cell_bounds(min: f64, i: usize, pitch: f64) -> (f64, f64) {
        (min + i as f64 * pitch, min + (i + 1) as f64 * pitch)
    }

    /// Nearest positive ray hit on this face: `(ray parameter, voxel id)`.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<(f64, u32)> {
        let d = dir[self.normal_axis];
        if d.abs() < 1e-12 {
            return None;
        }
        let t = (self.coord - origin[self.normal_axis]) / d;
        if !(t > 1e-9) {
            return None;
        }
        let u = origin[self.u_axis] + t * dir[self.u_axis];
        let v = origin[self.v_axis] + t * dir[self.v_axis];
        let iu = cell_index(u, self.u_min, self.nu, self.pitch)?;
        let iv = cell_index(v, self.v_min, self.nv, self.pitch)?;
        Some((t, self.first_id + (iv * self.nu + iu) as u32))
    }

    fn cell_center(&self, iu: usize, iv: usize) -> Vec3 {
        let mut p = [0.0; 3];
        p[self.normal_axis] = self.coord;
        p[self.u_axis] = self.u_min + (iu as f64 + 0.5) * self.pitch;
        p[self.v_axis] = self.v_min + (iv as f64 + 0.5) * self.pitch;
        p
    }
}

/// Immutable voxelized scene.
#[derive(Debug, Clone)]
pub struct SceneModel {
    pub config: SceneConfig,
    pub pitch: f64,
    pub faces: Vec<Face>,
    pub voxels: Vec<Voxel>,
}

impl SceneModel {
    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }

    pub fn voxel(&self, id: u32) -> &Voxel {
        &self.voxels[id as usize]
    }

    pub fn face_of(&self, id: u32) -> Option<&Face> {
        self.faces.iter().find(|f| f.contains_id(id))
    }
}

fn cells(extent: f64, pitch: f64) -> usize {
    (extent / pitch).round().max(0.0) as usize
}

struct FaceBuilder<'a> {
    pitch: f64,
    faces: Vec<Face>,
    voxels: Vec<Voxel>,
    textures: Vec<&'a Texture>,
}

impl<'a> FaceBuilder<'a> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        (normal_axis, outward_positive): (usize, bool),
        coord: f64,
        (u_axis, u_min, nu): (usize, f64, usize),
        (v_axis, v_min, nv): (usize, f64, usize),
        texture: &'a Texture,
    ) -> Result<()> {
        if nu == 0 || nv == 0 {
            return Ok(());
        }
        let first_id = u32::try_from(self.voxels.len())
            .ok()
            .filter(|id| (*id as u64 + (nu * nv) as u64) < u32::MAX as u64)
            .ok_or_else(|| Error::InvalidScene("too many voxels".into()))?;
        let face = Face {
            normal_axis,
            coord,
            outward_positive,
            u_axis,
            v_axis,
            u_min,
            v_min,
            nu,
            nv,
            pitch: self.pitch,
            first_id,
        };
        for iv in 0..nv {
            for iu in 0..nu {
                let position = face.cell_center(iu, iv);
                let color = texture.color_at(position[u_axis], position[v_axis]);
                let id = first_id + (iv * nu + iu) as u32;
                self.voxels.push(Voxel { id, position, color });
            }
        }
        self.faces.push(face);
        self.textures.push(texture);
        Ok(())
    }
}

/// Samples the configured surfaces into voxels. Deterministic: the same
/// configuration always yields the same ids, positions and colors.
pub fn build_scene(config: &SceneConfig) -> Result<SceneModel> {
    let p = config.pitch;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidScene(format!("pitch must be positive, got {p}")));
    }
    let bg = &config.background;
    if !(bg.width > 0.0 && bg.height > 0.0) {
        return Err(Error::InvalidScene("background extents must be positive".into()));
    }
    let mut fb = FaceBuilder { pitch: p, faces: Vec::new(), voxels: Vec::new(), textures: Vec::new() };

    let (nu, nv) = (cells(bg.width, p), cells(bg.height, p));
    let u_min = bg.center[0] - nu as f64 * p / 2.0;
    let v_min = bg.center[1] - nv as f64 * p / 2.0;
    fb.push((2, false), bg.z, (0, u_min, nu), (1, v_min, nv), &bg.texture)?;

    for (k, b) in config.boxes.iter().enumerate() {
        if b.size.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidScene(format!("box {k} has a non-positive size")));
        }
        let n: Vec<usize> = (0..3).map(|a| cells(b.size[a], p)).collect();
        let lo: Vec<f64> = (0..3).map(|a| b.center[a] - n[a] as f64 * p / 2.0).collect();
        let hi: Vec<f64> = (0..3).map(|a| lo[a] + n[a] as f64 * p).collect();
        if hi[2] >= bg.z {
            return Err(Error::InvalidScene(format!("box {k} is not in front of the background")));
        }
        let t = &b.texture;
        fb.push((2, false), lo[2], (0, lo[0], n[0]), (1, lo[1], n[1]), t)?;
        fb.push((2, true), hi[2], (0, lo[0], n[0]), (1, lo[1], n[1]), t)?;
        fb.push((0, false), lo[0], (2, lo[2], n[2]), (1, lo[1], n[1]), t)?;
        fb.push((0, true), hi[0], (2, lo[2], n[2]), (1, lo[1], n[1]), t)?;
        fb.push((1, false), lo[1], (0, lo[0], n[0]), (2, lo[2], n[2]), t)?;
        fb.push((1, true), hi[1], (0, lo[0], n[0]), (2, lo[2], n[2]), t)?;
    }

    if fb.voxels.is_empty() {
        return Err(Error::InvalidScene("scene contains no voxels".into()));
    }
    Ok(SceneModel { config: config.clone(), pitch: p, faces: fb.faces, voxels: fb.voxels })
}
