//! Intra coding of reference views.

use super::container::{Header, StreamKind};
use super::image::{DecodedImage, ImageCode, PLANES};
use crate::error::{Error, Result};
use crate::navdomain::NavigationDomain;
use crate::scene::{Camera, CameraIntrinsics, CameraPose, ViewImage, EMPTY};

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedReference {
    pub view_index: usize,
    pub q: u32,
    /// Coded size of color, depth and the validity mask.
    pub bits: u64,
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
    pub image: ImageCode,
}

/// Codes the color and depth of `view`. Pixels that see no voxel are
/// masked out.
pub fn encode_reference(view_index: usize, view: &ViewImage, q: u32) -> Result<EncodedReference> {
    let planes: [Vec<f64>; PLANES] = [
        view.color.iter().map(|c| c[0] as f64).collect(),
        view.color.iter().map(|c| c[1] as f64).collect(),
        view.color.iter().map(|c| c[2] as f64).collect(),
        view.depth.iter().map(|d| (d * 1000.0).round()).collect(),
    ];
    let mask: Vec<bool> = view.ids.iter().map(|&id| id != EMPTY).collect();
    let image = ImageCode::encode(view.width(), view.height(), &planes, &mask, q)?;
    Ok(EncodedReference { view_index, q, bits: image.bits, pose: view.pose, intrinsics: view.intrinsics, image })
}

impl EncodedReference {
    pub fn decode(&self) -> DecodedImage {
        self.image.decode()
    }

    pub fn camera(&self) -> Camera {
        Camera::new(self.pose, self.intrinsics)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        Header {
            kind: StreamKind::Reference,
            q: self.q,
            width: self.image.width,
            height: self.image.height,
            padded: self.image.is_padded(),
            view_index: Some(self.view_index),
        }
        .write(&mut out)?;
        self.image.write_to(&mut out);
        Ok(out)
    }

    /// Parses a reference stream; the pose comes from `domain`.
    pub fn from_bytes(bytes: &[u8], domain: &NavigationDomain) -> Result<Self> {
        let mut cursor = bytes;
        let header = Header::read(&mut cursor)?;
        if header.kind != StreamKind::Reference {
            return Err(Error::Bitstream("not a reference stream".into()));
        }
        let view_index = header.view_index.ok_or_else(|| Error::Bitstream("missing view index".into()))?;
        domain.check_index(view_index)?;
        let intrinsics = domain.intrinsics;
        if (header.width, header.height) != (intrinsics.width, intrinsics.height) {
            return Err(Error::Bitstream("dimensions differ from the domain intrinsics".into()));
        }
        let image = ImageCode::read_from(&mut cursor, header.width, header.height, header.q)?;
        if !cursor.is_empty() {
            return Err(Error::Bitstream("trailing bytes".into()));
        }
        Ok(Self { view_index, q: header.q, bits: image.bits, pose: domain.poses[view_index], intrinsics, image })
    }
}
