//! Bit costs of references and innovation, and the matching decoder.

pub mod aux;
pub mod container;
pub mod dct;
pub mod entropy;
pub mod fit;
pub mod image;
pub mod reconstruct;
pub mod reference;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

pub use aux::{encode_aux, AuxVoxel, EncodedAux, OVERFLOW_RECORD_BITS};
pub use fit::{fit_size_model, SizeModelFit};
pub use image::DecodedImage;
pub use reconstruct::{reconstruct_view, PixelSource, QualityReport, ReconstructOptions, Reconstruction};
pub use reference::{encode_reference, EncodedReference};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::innovation::SegmentInnovation;

pub const DEFAULT_Q: u32 = 16;

/// Coded sizes used by the partition optimizer.
pub trait SegmentCodec: Sync {
    /// `|Y|` for reference view `view`.
    fn reference_bits(&self, view: usize) -> Result<u64>;
    /// `|phi|` for a segment innovation.
    fn aux_bits(&self, innovation: &SegmentInnovation) -> Result<u64>;
}

/// The block-DCT codec over a rendered dataset, memoizing every size it
/// computes.
pub struct DctCodec<'a> {
    pub dataset: &'a Dataset,
    pub q: u32,
    reference: Vec<OnceLock<u64>>,
    aux: Mutex<HashMap<(usize, Vec<usize>), u64>>,
}

impl<'a> DctCodec<'a> {
    pub fn new(dataset: &'a Dataset, q: u32) -> Self {
        Self { dataset, q, reference: (0..dataset.len()).map(|_| OnceLock::new()).collect(), aux: Mutex::default() }
    }

    pub fn encode_reference(&self, view: usize) -> Result<EncodedReference> {
        self.dataset.domain.check_index(view)?;
        encode_reference(view, &self.dataset.views[view], self.q)
    }

    pub fn encode_aux(&self, innovation: &SegmentInnovation) -> Result<EncodedAux> {
        encode_aux(&self.dataset.scene, &self.dataset.domain, innovation, self.q)
    }
}

impl SegmentCodec for DctCodec<'_> {
    fn reference_bits(&self, view: usize) -> Result<u64> {
        self.dataset.domain.check_index(view)?;
        if let Some(&bits) = self.reference[view].get() {
            return Ok(bits);
        }
        let bits = self.encode_reference(view)?.bits;
        Ok(*self.reference[view].get_or_init(|| bits))
    }

    fn aux_bits(&self, innovation: &SegmentInnovation) -> Result<u64> {
        let key = (innovation.reference_index, innovation.member_indices.clone());
        if let Some(&bits) = self.aux.lock().unwrap().get(&key) {
            return Ok(bits);
        }
        let bits = self.encode_aux(innovation)?.bits;
        self.aux.lock().unwrap().insert(key, bits);
        Ok(bits)
    }
}

/// Sizes from a fixed per-view reference table and a linear innovation
/// model. Handy for experiments that should not depend on the DCT codec.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCodec {
    pub reference: Vec<u64>,
    pub bits_per_voxel: f64,
}

impl SegmentCodec for LinearCodec {
    fn reference_bits(&self, view: usize) -> Result<u64> {
        self.reference
            .get(view)
            .copied()
            .ok_or(crate::error::Error::IndexOutOfRange { index: view, len: self.reference.len() })
    }

    fn aux_bits(&self, innovation: &SegmentInnovation) -> Result<u64> {
        Ok((self.bits_per_voxel * innovation.size() as f64).ceil() as u64)
    }
}
