//! Pinhole camera model.
//!
//! World axes: x to the right, y downwards, z forward. A pose with zero
//! rotation looks along +z. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` in
//! image coordinates, so its center sits at `(i + 0.5, j + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub focal: f64,
    pub width: usize,
    pub height: usize,
    /// Principal point; defaults to the image center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal: Option<[f64; 2]>,
}

impl CameraIntrinsics {
    pub fn new(focal: f64, width: usize, height: usize) -> Self {
        Self { focal, width, height, principal: None }
    }

    pub fn principal_point(&self) -> [f64; 2] {
        self.principal
            .unwrap_or([self.width as f64 / 2.0, self.height as f64 / 2.0])
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if !(self.focal > 0.0) || !self.focal.is_finite() {
            return Err(Error::InvalidParameter("focal length must be positive".into()));
        }
        Ok(())
    }
}

/// Camera parameter vector: translation in meters, rotation in radians.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    #[serde(default)]
    pub rx: f64,
    #[serde(default)]
    pub ry: f64,
    #[serde(default)]
    pub rz: f64,
}

impl CameraPose {
    pub fn at(tx: f64, ty: f64, tz: f64) -> Self {
        Self { tx, ty, tz, ..Default::default() }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.tx, self.ty, self.tz, self.rx, self.ry, self.rz]
    }

    pub fn translation(&self) -> Vec3 {
        [self.tx, self.ty, self.tz]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// Camera-to-world rotation `Rz * Ry * Rx`.
    fn rotation(&self) -> Mat3 {
        let (sx, cx) = self.rx.sin_cos();
        let (sy, cy) = self.ry.sin_cos();
        let (sz, cz) = self.rz.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        mat_mul(&rz, &mat_mul(&ry, &rx))
    }
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// A posed pinhole camera with its rotation precomputed.
#[derive(Debug, Clone)]
pub struct Camera {
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
    rot: Mat3,
    identity_rotation: bool,
}

/// Continuous image-plane projection of a 3D point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl Projection {
    /// Pixel containing the projected point, if inside the frame.
    pub fn pixel(&self, intr: &CameraIntrinsics) -> Option<(usize, usize)> {
        let (i, j) = (self.u.floor(), self.v.floor());
        if i < 0.0 || j < 0.0 || i >= intr.width as f64 || j >= intr.height as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }
}

impl Camera {
    pub fn new(pose: CameraPose, intrinsics: CameraIntrinsics) -> Self {
        let identity_rotation = pose.rx == 0.0 && pose.ry == 0.0 && pose.rz == 0.0;
        Self { pose, intrinsics, rot: pose.rotation(), identity_rotation }
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation()
    }

    fn to_world_dir(&self, d: Vec3) -> Vec3 {
        if self.identity_rotation {
            return d;
        }
        let r = &self.rot;
        [
            r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
            r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
            r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
        ]
    }

    fn to_camera_dir(&self, d: Vec3) -> Vec3 {
        if self.identity_rotation {
            return d;
        }
        let r = &self.rot;
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    }

    /// Ray through the center of pixel `(i, j)`. The direction has unit
    /// camera-space z, so the ray parameter equals camera depth.
    pub fn pixel_ray(&self, i: usize, j: usize) -> (Vec3, Vec3) {
        self.image_ray(i as f64 + 0.5, j as f64 + 0.5)
    }

    pub fn image_ray(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let [cx, cy] = self.intrinsics.principal_point();
        let f = self.intrinsics.focal;
        let dir = self.to_world_dir([(u - cx) / f, (v - cy) / f, 1.0]);
        (self.center(), dir)
    }

    /// Back-projects image coordinates at a given camera depth.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let (o, d) = self.image_ray(u, v);
        [o[0] + depth * d[0], o[1] + depth * d[1], o[2] + depth * d[2]]
    }

    /// Projects a world point; `None` when it lies behind the camera.
    pub fn project(&self, p: Vec3) -> Option<Projection> {
        let c = self.center();
        let pc = self.to_camera_dir([p[0] - c[0], p[1] - c[1], p[2] - c[2]]);
        if pc[2] <= 1e-9 {
            return None;
        }
        let [cx, cy] = self.intrinsics.principal_point();
        let f = self.intrinsics.focal;
        Some(Projection { u: f * pc[0] / pc[2] + cx, v: f * pc[1] / pc[2] + cy, depth: pc[2] })
    }

    /// Projects a world-space direction (a point at infinity).
    pub fn project_direction(&self, d: Vec3) -> Option<(f64, f64)> {
        let dc = self.to_camera_dir(d);
        if dc[2] <= 1e-12 {
            return None;
        }
        let [cx, cy] = self.intrinsics.principal_point();
        let f = self.intrinsics.focal;
        Some((f * dc[0] / dc[2] + cx, f * dc[1] / dc[2] + cy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_round_trip() {
        let pose = CameraPose { tx: 0.3, ty: -0.2, tz: 0.1, rx: 0.1, ry: -0.25, rz: 0.05 };
        let cam = Camera::new(pose, CameraIntrinsics::new(100.0, 64, 48));
        let p = cam.unproject(10.25, 30.5, 2.5);
        let pr = cam.project(p).unwrap();
        assert!((pr.u - 10.25).abs() < 1e-9);
        assert!((pr.v - 30.5).abs() < 1e-9);
        assert!((pr.depth - 2.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 4, 4).validate().is_err());
        assert!(CameraIntrinsics::new(1.0, 0, 4).validate().is_err());
    }
}
