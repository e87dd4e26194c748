//! Coding of a segment's innovation voxels.
//!
//! Voxels are projected onto the member view that lands them on the most
//! distinct pixels. Each atlas pixel keeps its nearest voxel, with the depth
//! at which the pixel ray meets that voxel's surface, and the atlas is coded
//! like a reference image. Any voxel the atlas cannot carry this way is sent
//! raw in an overflow list. The stream format allows several atlas layers;
//! the encoder emits at most `MAX_LAYERS`.

use serde::{Deserialize, Serialize};

use super::container::{read_f32, read_u32, Header, StreamKind};
use super::image::{DecodedImage, ImageCode, PLANES};
use crate::error::{Error, Result};
use crate::innovation::SegmentInnovation;
use crate::navdomain::NavigationDomain;
use crate::scene::{Camera, CameraIntrinsics, CameraPose, SceneModel};

/// Size of one raw overflow record: u32 id, three f32 coordinates, an RGB
/// triple and a facing byte.
pub const OVERFLOW_RECORD_BITS: u64 = 32 + 3 * 32 + 3 * 8 + 8;

/// Outward normal of the face a voxel lies on: a coordinate axis and a sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facing {
    pub axis: u8,
    pub positive: bool,
}

impl Facing {
    pub fn to_byte(self) -> u8 {
        self.axis * 2 + self.positive as u8
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        (b < 6).then_some(Self { axis: b / 2, positive: b % 2 == 1 })
    }

    pub fn normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis as usize] = if self.positive { 1.0 } else { -1.0 };
        n
    }
}

/// A voxel as known to the decoder. Overflow records carry their facing;
/// voxels recovered from an atlas do not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxVoxel {
    pub id: u32,
    #[serde(rename = "pos")]
    pub position: [f32; 3],
    pub color: [u8; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facing: Option<Facing>,
}

/// One atlas: innovation voxels projected onto a member view, at most one
/// per pixel, coded like a reference image.
#[derive(Debug, Clone, PartialEq)]
pub struct AtlasLayer {
    pub view: usize,
    pub pose: CameraPose,
    pub image: ImageCode,
    /// Voxel id behind each valid pixel, raster order. Carried for
    /// bookkeeping only and not counted in the stream size.
    pub ids: Vec<u32>,
}

/// An atlas as the decoder sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLayer {
    pub view: usize,
    pub pose: CameraPose,
    pub image: DecodedImage,
    pub ids: Vec<Option<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedAux {
    pub reference_index: usize,
    pub q: u32,
    pub intrinsics: CameraIntrinsics,
    /// Voxel cell size; lets the decoder splat overflow voxels as patches.
    pub pitch: f32,
    pub layers: Vec<AtlasLayer>,
    pub overflow: Vec<AuxVoxel>,
    pub bits: u64,
}

/// Cost of naming the member view an atlas layer was projected onto.
pub const LAYER_VIEW_BITS: u64 = 32;

/// Cost of the voxel pitch carried in every auxiliary stream.
pub const PITCH_BITS: u64 = 32;

/// Atlas layers per segment; anything left goes to overflow.
pub const MAX_LAYERS: usize = 1;

/// Nearest voxel of `ids` on each in-frame pixel of `cam`.
fn splat(scene: &SceneModel, cam: &Camera, ids: &[u32]) -> Vec<Option<(f64, u32)>> {
    let intr = cam.intrinsics;
    let mut slot: Vec<Option<(f64, u32)>> = vec![None; intr.pixel_count()];
    for &id in ids {
        let Some(p) = cam.project(scene.voxel(id).position) else { continue };
        let Some((i, j)) = p.pixel(&intr) else { continue };
        let k = j * intr.width + i;
        if slot[k].is_none_or(|(d, _)| p.depth < d) {
            slot[k] = Some((p.depth, id));
        }
    }
    slot
}

/// Depth at which the center ray of pixel `k` crosses the face of voxel
/// `id`, if it crosses it at all.
fn surface_depth(scene: &SceneModel, cam: &Camera, k: usize, id: u32) -> Option<f64> {
    let w = cam.intrinsics.width;
    let (origin, dir) = cam.image_ray((k % w) as f64 + 0.5, (k / w) as f64 + 0.5);
    scene.face_of(id)?.intersect(origin, dir).map(|(t, _)| t)
}

/// Number of distinct in-frame pixels the voxels of `ids` project to.
fn coverage(scene: &SceneModel, cam: &Camera, ids: &[u32]) -> usize {
    splat(scene, cam, ids).iter().filter(|s| s.is_some()).count()
}

/// Member view that lands `ids` on the most distinct pixels, ties to the
/// lower index.
pub fn choose_atlas_view(scene: &SceneModel, domain: &NavigationDomain, members: &[usize], ids: &[u32]) -> (usize, usize) {
    let mut best = (usize::MAX, 0);
    for &m in members {
        let cam = Camera::new(domain.poses[m], domain.intrinsics);
        let c = coverage(scene, &cam, ids);
        if best.0 == usize::MAX || c > best.1 {
            best = (m, c);
        }
    }
    best
}

/// Each layer takes the member view covering most of the voxels still
/// unsent.
pub fn encode_aux(
    scene: &SceneModel,
    domain: &NavigationDomain,
    innovation: &SegmentInnovation,
    q: u32,
) -> Result<EncodedAux> {
    if q == 0 {
        return Err(Error::InvalidParameter("quantizer step must be positive".into()));
    }
    let intr = domain.intrinsics;
    let n = intr.pixel_count();
    let mut aux = EncodedAux {
        reference_index: innovation.reference_index,
        q,
        intrinsics: intr,
        pitch: scene.pitch as f32,
        layers: Vec::new(),
        overflow: Vec::new(),
        bits: 0,
    };
    let mut remaining = innovation.ids.clone();
    while !remaining.is_empty() && aux.layers.len() < MAX_LAYERS {
        let (view, covered) = choose_atlas_view(scene, domain, &innovation.member_indices, &remaining);
        if covered == 0 {
            break;
        }
        let cam = Camera::new(domain.poses[view], intr);
        let slot = splat(scene, &cam, &remaining);
        let mut planes: [Vec<f64>; PLANES] = std::array::from_fn(|_| vec![0.0; n]);
        let mut mask = vec![false; n];
        let mut ids = Vec::with_capacity(covered);
        for (k, s) in slot.iter().enumerate() {
            let Some((_, id)) = *s else { continue };
            let Some(depth) = surface_depth(scene, &cam, k, id) else { continue };
            let color = scene.voxel(id).color;
            for c in 0..3 {
                planes[c][k] = color[c] as f64;
            }
            planes[3][k] = (depth * 1000.0).round();
            mask[k] = true;
            ids.push(id);
        }
        if ids.is_empty() {
            break;
        }
        let mut sent = ids.clone();
        sent.sort_unstable();
        remaining = crate::innovation::sorted_difference(&remaining, &sent);
        let image = ImageCode::encode(intr.width, intr.height, &planes, &mask, q)?;
        aux.layers.push(AtlasLayer { view, pose: domain.poses[view], image, ids });
    }
    aux.overflow = remaining
        .into_iter()
        .map(|id| {
            let v = scene.voxel(id);
            let facing = scene
                .face_of(id)
                .map(|f| Facing { axis: f.normal_axis as u8, positive: f.outward_positive });
            AuxVoxel { id, position: v.position.map(|x| x as f32), color: v.color, facing }
        })
        .collect();
    aux.bits = aux.measure_bits();
    Ok(aux)
}

impl EncodedAux {
    /// Number of innovation voxels carried (atlases plus overflow).
    pub fn voxel_count(&self) -> usize {
        self.layers.iter().map(|l| l.ids.len()).sum::<usize>() + self.overflow.len()
    }

    fn measure_bits(&self) -> u64 {
        PITCH_BITS
            + self.layers.iter().map(|l| LAYER_VIEW_BITS + l.image.bits).sum::<u64>()
            + self.overflow.len() as u64 * OVERFLOW_RECORD_BITS
    }

    /// Decoded atlases with the voxel id behind each valid pixel.
    pub fn decode_layers(&self) -> Vec<DecodedLayer> {
        self.layers
            .iter()
            .map(|layer| {
                let image = layer.image.decode();
                let mut ids = vec![None; image.mask.len()];
                let valid = image.mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k);
                for (k, &id) in valid.zip(&layer.ids) {
                    ids[k] = Some(id);
                }
                DecodedLayer { view: layer.view, pose: layer.pose, image, ids }
            })
            .collect()
    }

    /// Voxels recovered from the atlases (positions back-projected through
    /// decoded depth) followed by the overflow records.
    pub fn decode(&self) -> Vec<AuxVoxel> {
        let mut out = Vec::with_capacity(self.voxel_count());
        let w = self.intrinsics.width;
        for layer in self.decode_layers() {
            let cam = Camera::new(layer.pose, self.intrinsics);
            for (k, id) in layer.ids.iter().enumerate() {
                if let Some(id) = *id {
                    let p = cam.unproject((k % w) as f64 + 0.5, (k / w) as f64 + 0.5, layer.image.depth[k]);
                    out.push(AuxVoxel { id, position: p.map(|x| x as f32), color: layer.image.color[k], facing: None });
                }
            }
        }
        out.extend_from_slice(&self.overflow);
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        Header {
            kind: StreamKind::Aux,
            q: self.q,
            width: self.intrinsics.width,
            height: self.intrinsics.height,
            padded: !self.intrinsics.width.is_multiple_of(8) || !self.intrinsics.height.is_multiple_of(8),
            view_index: Some(self.reference_index),
        }
        .write(&mut out)?;
        out.extend_from_slice(&self.pitch.to_le_bytes());
        out.push(self.layers.len() as u8);
        for layer in &self.layers {
            out.extend_from_slice(&(layer.view as u32).to_le_bytes());
            layer.image.write_to(&mut out);
        }
        out.extend_from_slice(&(self.overflow.len() as u32).to_le_bytes());
        for v in &self.overflow {
            out.extend_from_slice(&v.id.to_le_bytes());
            for x in v.position {
                out.extend_from_slice(&x.to_le_bytes());
            }
            out.extend_from_slice(&v.color);
            out.push(v.facing.map_or(u8::MAX, Facing::to_byte));
        }
        for layer in &self.layers {
            out.extend_from_slice(&(layer.ids.len() as u32).to_le_bytes());
            for id in &layer.ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], domain: &NavigationDomain) -> Result<Self> {
        let mut cursor = bytes;
        let header = Header::read(&mut cursor)?;
        if header.kind != StreamKind::Aux {
            return Err(Error::Bitstream("not an auxiliary stream".into()));
        }
        let intrinsics = domain.intrinsics;
        if (header.width, header.height) != (intrinsics.width, intrinsics.height) {
            return Err(Error::Bitstream("dimensions differ from the domain intrinsics".into()));
        }
        let reference_index =
            header.view_index.ok_or_else(|| Error::Bitstream("auxiliary stream without a reference".into()))?;
        domain.check_index(reference_index)?;
        let pitch = read_f32(&mut cursor)?;
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::Bitstream("voxel pitch must be positive".into()));
        }
        let n_layers = super::image::take(&mut cursor, 1)?[0] as usize;
        if n_layers > MAX_LAYERS {
            return Err(Error::Bitstream("too many atlas layers".into()));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let view = read_u32(&mut cursor)? as usize;
            domain.check_index(view)?;
            let image = ImageCode::read_from(&mut cursor, header.width, header.height, header.q)?;
            layers.push(AtlasLayer { view, pose: domain.poses[view], image, ids: Vec::new() });
        }
        let n_overflow = read_u32(&mut cursor)? as usize;
        let mut overflow = Vec::with_capacity(n_overflow.min(1 << 20));
        for _ in 0..n_overflow {
            let id = read_u32(&mut cursor)?;
            let position = [read_f32(&mut cursor)?, read_f32(&mut cursor)?, read_f32(&mut cursor)?];
            let c = super::image::take(&mut cursor, 4)?;
            let facing = Facing::from_byte(c[3]).ok_or_else(|| Error::Bitstream("invalid voxel facing".into()))?;
            overflow.push(AuxVoxel { id, position, color: [c[0], c[1], c[2]], facing: Some(facing) });
        }
        for layer in &mut layers {
            let n_ids = read_u32(&mut cursor)? as usize;
            layer.ids = (0..n_ids).map(|_| read_u32(&mut cursor)).collect::<Result<Vec<_>>>()?;
            if layer.image.mask.iter().filter(|&&m| m).count() != n_ids {
                return Err(Error::Bitstream("atlas id count does not match the atlas mask".into()));
            }
        }
        if !cursor.is_empty() {
            return Err(Error::Bitstream("trailing bytes".into()));
        }
        let mut aux = Self { reference_index, q: header.q, intrinsics, pitch, layers, overflow, bits: 0 };
        aux.bits = aux.measure_bits();
        Ok(aux)
    }
}
