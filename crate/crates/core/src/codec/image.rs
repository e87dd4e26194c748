//! Masked block-DCT coding of a color + depth image.
//!
//! Four planes are coded: R, G, B (level-shifted by 128) and depth in whole
//! millimeters. Only 8x8 blocks that contain at least one valid pixel are
//! transmitted; invalid pixels inside a transmitted block are replaced by
//! the block mean before the transform. Block DC levels are coded as
//! differences to the previous transmitted block of the same plane. The
//! size is the order-0 code length of every symbol against its plane's
//! histogram, rounded up per block.

use super::dct::{self, BLOCK, BLOCK_AREA};
use super::entropy::{whole_bits, Histogram};
use crate::error::{Error, Result};

pub const PLANES: usize = 4;
const DEPTH_PLANE: usize = 3;
/// Quantizer step at which coding becomes lossless.
pub const LOSSLESS_Q: u32 = 1;

pub fn depth_step(q: u32) -> u32 {
    (q / 4).max(1)
}

fn plane_step(q: u32, plane: usize) -> u32 {
    if plane == DEPTH_PLANE {
        depth_step(q)
    } else {
        q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCode {
    pub step: u32,
    /// Quantized coefficients of every block, `None` for skipped blocks.
    pub blocks: Vec<Option<[i32; BLOCK_AREA]>>,
    /// Lossless correction per valid pixel, in block then raster order.
    pub residual: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageCode {
    pub width: usize,
    pub height: usize,
    pub q: u32,
    /// Validity per pixel over the padded frame.
    pub mask: Vec<bool>,
    pub planes: Vec<PlaneCode>,
    pub bits: u64,
}

/// Decoded planes at the original resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedImage {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[u8; 3]>,
    /// Depth in meters.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
}

fn padded(n: usize) -> usize {
    n.div_ceil(BLOCK) * BLOCK
}

struct Layout {
    pw: usize,
    ph: usize,
    bw: usize,
    bh: usize,
}

impl Layout {
    fn new(width: usize, height: usize) -> Self {
        let (pw, ph) = (padded(width), padded(height));
        Self { pw, ph, bw: pw / BLOCK, bh: ph / BLOCK }
    }

    fn blocks(&self) -> usize {
        self.bw * self.bh
    }

    /// Padded-frame pixel indices of block `b`, raster order.
    fn block_pixels(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        let (bx, by) = (b % self.bw, b / self.bw);
        (0..BLOCK_AREA).map(move |k| (by * BLOCK + k / BLOCK) * self.pw + bx * BLOCK + k % BLOCK)
    }
}

/// Symbols entropy-coded for a block: DC difference, then AC levels.
fn block_symbols(levels: &[i32; BLOCK_AREA], prev_dc: i32) -> impl Iterator<Item = i32> + '_ {
    std::iter::once(levels[0] - prev_dc).chain(levels[1..].iter().copied())
}

impl ImageCode {
    pub fn is_padded(&self) -> bool {
        !self.width.is_multiple_of(BLOCK) || !self.height.is_multiple_of(BLOCK)
    }

    pub fn is_lossless(&self) -> bool {
        self.q == LOSSLESS_Q
    }

    /// Codes `planes` (R, G, B in 0..=255 and depth in millimeters, each
    /// `width * height` samples) over the valid pixels of `mask`.
    pub fn encode(width: usize, height: usize, planes: &[Vec<f64>; PLANES], mask: &[bool], q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("quantizer step must be positive".into()));
        }
        if width == 0 || height == 0 || mask.len() != width * height {
            return Err(Error::InvalidParameter("image dimensions do not match the mask".into()));
        }
        let layout = Layout::new(width, height);
        let mut pmask = vec![false; layout.pw * layout.ph];
        for y in 0..height {
            for x in 0..width {
                pmask[y * layout.pw + x] = mask[y * width + x];
            }
        }
        let present: Vec<bool> =
            (0..layout.blocks()).map(|b| layout.block_pixels(b).any(|p| pmask[p])).collect();

        let lossless = q == LOSSLESS_Q;
        let mut codes = Vec::with_capacity(PLANES);
        for (plane, samples) in planes.iter().enumerate() {
            let step = plane_step(q, plane);
            let shift = if plane == DEPTH_PLANE { 0.0 } else { 128.0 };
            let value_at = |p: usize| -> f64 {
                let (x, y) = ((p % layout.pw).min(width - 1), (p / layout.pw).min(height - 1));
                samples[y * width + x].round() - shift
            };
            let mut blocks = Vec::with_capacity(layout.blocks());
            let mut residual = Vec::new();
            for (b, &is_present) in present.iter().enumerate() {
                if !is_present {
                    blocks.push(None);
                    continue;
                }
                let pixels: Vec<usize> = layout.block_pixels(b).collect();
                let valid: Vec<f64> = pixels.iter().filter(|&&p| pmask[p]).map(|&p| value_at(p)).collect();
                let mean = valid.iter().sum::<f64>() / valid.len() as f64;
                let mut block = [0.0; BLOCK_AREA];
                for (k, &p) in pixels.iter().enumerate() {
                    block[k] = if pmask[p] { value_at(p) } else { mean };
                }
                let coef = dct::forward(&block);
                let mut levels = [0i32; BLOCK_AREA];
                for k in 0..BLOCK_AREA {
                    levels[k] = (coef[k] / step as f64).round() as i32;
                }
                if lossless {
                    let recon = dequantize(&levels, step);
                    for (k, &p) in pixels.iter().enumerate() {
                        if pmask[p] {
                            residual.push(block[k] as i32 - recon[k].round() as i32);
                        }
                    }
                }
                blocks.push(Some(levels));
            }
            codes.push(PlaneCode { step, blocks, residual });
        }
        let mut code = ImageCode { width, height, q, mask: pmask, planes: codes, bits: 0 };
        code.bits = code.measure_bits();
        Ok(code)
    }

    fn present(&self) -> Vec<bool> {
        self.planes[0].blocks.iter().map(Option::is_some).collect()
    }

    /// Order-0 size of the mask and all planes.
    fn measure_bits(&self) -> u64 {
        let layout = Layout::new(self.width, self.height);
        let present = self.present();

        let mut flags = Histogram::default();
        flags.extend(present.iter().map(|&p| p as i32));
        let mut mask_hist = Histogram::default();
        for b in (0..layout.blocks()).filter(|&b| present[b]) {
            mask_hist.extend(layout.block_pixels(b).map(|p| self.mask[p] as i32));
        }
        let mut bits = whole_bits(present.iter().map(|&p| flags.cost(p as i32)).sum());
        for b in (0..layout.blocks()).filter(|&b| present[b]) {
            bits += whole_bits(layout.block_pixels(b).map(|p| mask_hist.cost(self.mask[p] as i32)).sum());
        }

        for plane in &self.planes {
            let mut coef_hist = Histogram::default();
            let mut prev_dc = 0;
            for levels in plane.blocks.iter().flatten() {
                coef_hist.extend(block_symbols(levels, prev_dc));
                prev_dc = levels[0];
            }
            let mut res_hist = Histogram::default();
            res_hist.extend(plane.residual.iter().copied());

            let mut prev_dc = 0;
            let mut res_pos = 0;
            for (b, levels) in plane.blocks.iter().enumerate() {
                let Some(levels) = levels else { continue };
                let mut length: f64 = block_symbols(levels, prev_dc).map(|s| coef_hist.cost(s)).sum();
                prev_dc = levels[0];
                if !plane.residual.is_empty() {
                    let n_valid = layout.block_pixels(b).filter(|&p| self.mask[p]).count();
                    length += plane.residual[res_pos..res_pos + n_valid].iter().map(|&r| res_hist.cost(r)).sum::<f64>();
                    res_pos += n_valid;
                }
                bits += whole_bits(length);
            }
        }
        bits
    }

    pub fn decode(&self) -> DecodedImage {
        let layout = Layout::new(self.width, self.height);
        let mut values = vec![vec![0.0; layout.pw * layout.ph]; PLANES];
        for (plane, code) in self.planes.iter().enumerate() {
            let shift = if plane == DEPTH_PLANE { 0.0 } else { 128.0 };
            let mut res_pos = 0;
            for (b, levels) in code.blocks.iter().enumerate() {
                let Some(levels) = levels else { continue };
                let recon = dequantize(levels, code.step);
                for (k, p) in layout.block_pixels(b).enumerate() {
                    let mut v = recon[k];
                    if !code.residual.is_empty() && self.mask[p] {
                        v = v.round() + code.residual[res_pos] as f64;
                        res_pos += 1;
                    }
                    values[plane][p] = v + shift;
                }
            }
        }
        let n = self.width * self.height;
        let mut color = vec![[0u8; 3]; n];
        let mut depth = vec![0.0; n];
        let mut mask = vec![false; n];
        for y in 0..self.height {
            for x in 0..self.width {
                let (p, i) = (y * layout.pw + x, y * self.width + x);
                if !self.mask[p] {
                    continue;
                }
                mask[i] = true;
                for c in 0..3 {
                    color[i][c] = values[c][p].round().clamp(0.0, 255.0) as u8;
                }
                depth[i] = values[DEPTH_PLANE][p].max(0.0) / 1000.0;
            }
        }
        DecodedImage { width: self.width, height: self.height, color, depth, mask }
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        let layout = Layout::new(self.width, self.height);
        let present = self.present();
        let mut packed = vec![0u8; present.len().div_ceil(8)];
        for (b, &p) in present.iter().enumerate() {
            if p {
                packed[b / 8] |= 1 << (b % 8);
            }
        }
        out.extend_from_slice(&packed);
        for b in (0..layout.blocks()).filter(|&b| present[b]) {
            let mut word = 0u64;
            for (k, p) in layout.block_pixels(b).enumerate() {
                if self.mask[p] {
                    word |= 1 << k;
                }
            }
            out.extend_from_slice(&word.to_le_bytes());
        }
        for plane in &self.planes {
            let mut prev_dc = 0;
            for levels in plane.blocks.iter().flatten() {
                for s in block_symbols(levels, prev_dc) {
                    write_varint(out, s);
                }
                prev_dc = levels[0];
            }
            for &r in &plane.residual {
                write_varint(out, r);
            }
        }
    }

    pub fn read_from(bytes: &mut &[u8], width: usize, height: usize, q: u32) -> Result<Self> {
        if width == 0 || height == 0 || q == 0 {
            return Err(Error::Bitstream("bad image header".into()));
        }
        let layout = Layout::new(width, height);
        let packed = take(bytes, layout.blocks().div_ceil(8))?;
        let present: Vec<bool> = (0..layout.blocks()).map(|b| packed[b / 8] & (1 << (b % 8)) != 0).collect();
        let mut mask = vec![false; layout.pw * layout.ph];
        for b in (0..layout.blocks()).filter(|&b| present[b]) {
            let word = u64::from_le_bytes(take(bytes, 8)?.try_into().unwrap());
            for (k, p) in layout.block_pixels(b).enumerate() {
                mask[p] = word & (1 << k) != 0;
            }
        }
        let n_valid = mask.iter().filter(|&&m| m).count();
        let mut planes = Vec::with_capacity(PLANES);
        for plane in 0..PLANES {
            let mut blocks = Vec::with_capacity(layout.blocks());
            let mut prev_dc = 0;
            for &p in &present {
                if !p {
                    blocks.push(None);
                    continue;
                }
                let mut levels = [0i32; BLOCK_AREA];
                for (k, level) in levels.iter_mut().enumerate() {
                    *level = read_varint(bytes)?;
                    if k == 0 {
                        *level += prev_dc;
                    }
                }
                prev_dc = levels[0];
                blocks.push(Some(levels));
            }
            let residual = if q == LOSSLESS_Q {
                (0..n_valid).map(|_| read_varint(bytes)).collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            planes.push(PlaneCode { step: plane_step(q, plane), blocks, residual });
        }
        let mut code = ImageCode { width, height, q, mask, planes, bits: 0 };
        code.bits = code.measure_bits();
        Ok(code)
    }
}

fn dequantize(levels: &[i32; BLOCK_AREA], step: u32) -> [f64; BLOCK_AREA] {
    let mut coef = [0.0; BLOCK_AREA];
    for k in 0..BLOCK_AREA {
        coef[k] = levels[k] as f64 * step as f64;
    }
    dct::inverse(&coef)
}

pub(crate) fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Bitstream("unexpected end of stream".into()));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn write_varint(out: &mut Vec<u8>, v: i32) {
    let mut z = ((v << 1) ^ (v >> 31)) as u32;
    loop {
        let byte = (z & 0x7f) as u8;
        z >>= 7;
        if z == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &mut &[u8]) -> Result<i32> {
    let mut z: u32 = 0;
    for shift in (0..35).step_by(7) {
        let byte = take(bytes, 1)?[0];
        z |= ((byte & 0x7f) as u32) << shift;
        if byte & 0x80 == 0 {
            return Ok(((z >> 1) as i32) ^ -((z & 1) as i32));
        }
    }
    Err(Error::Bitstream("varint too long".into()))
}
