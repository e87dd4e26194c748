//! Decoder-side view synthesis: reference warping, innovation splatting and
//! scanline hole filling.

use std::collections::HashSet;

use super::aux::EncodedAux;
use super::reference::EncodedReference;
use crate::error::{Error, Result};
use crate::navdomain::NavigationDomain;
use super::image::DecodedImage;
use crate::scene::{Camera, Projection, Vec3, ViewImage, EMPTY};

/// Where a reconstructed pixel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelSource {
    Empty,
    /// Warped from this pixel of the reference.
    Reference(u32),
    /// Splatted innovation voxel.
    Aux(u32),
    /// Background void seen through the reference.
    Void,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    /// Depth jump (meters) above which neighbors are treated as different layers.
    pub depth_threshold: f64,
    /// Longest run of missing pixels that is filled.
    pub max_gap: usize,
    /// Largest depth step (meters) between neighboring decoded pixels that
    /// are treated as one surface when warping.
    pub connect_threshold: f64,
    /// A point sample landing within this many pixels of a pixel center (on
    /// both axes) occludes off-center samples regardless of depth.
    pub center_tolerance: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { depth_threshold: 0.1, max_gap: 8, connect_threshold: 0.1, center_tolerance: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[u8; 3]>,
    /// Camera depth; infinite for void.
    pub depth: Vec<f64>,
    pub source: Vec<PixelSource>,
    /// Every reference pixel and innovation voxel the decoder offered to
    /// the z-buffer, whether or not it ended up visible.
    pub reads: HashSet<PixelSource>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    /// `f64::INFINITY` when the image is exact.
    pub psnr: f64,
    pub exact: bool,
    /// MSE over pixels whose ground-truth voxel the reference does not see.
    pub disoccluded_mse: f64,
    pub disoccluded_pixels: usize,
    pub interpolated_fraction: f64,
    pub empty_pixels: usize,
}

fn psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Synthesizes view `target` of a segment from its coded reference and,
/// when given, its coded innovation.
pub fn reconstruct_view(
    reference: &EncodedReference,
    aux: Option<&EncodedAux>,
    members: &[usize],
    target: usize,
    domain: &NavigationDomain,
    options: &ReconstructOptions,
) -> Result<Reconstruction> {
    domain.check_index(target)?;
    if !members.contains(&target) {
        return Err(Error::OutsideSegment(target));
    }
    if !members.contains(&reference.view_index) {
        return Err(Error::ReferenceNotMember(reference.view_index));
    }
    let intr = domain.intrinsics;
    let (w, h) = (intr.width, intr.height);
    let n = w * h;
    let target_cam = Camera::new(domain.poses[target], intr);
    let mut out = Reconstruction {
        width: w,
        height: h,
        color: vec![[0; 3]; n],
        depth: vec![f64::INFINITY; n],
        source: vec![PixelSource::Empty; n],
        reads: HashSet::new(),
    };

    let decoded = reference.decode();
    let ref_cam = reference.camera();
    let mut splats = Splats::new(n, options.depth_threshold);
    warp_surface(&mut splats, &ref_cam, &decoded, &target_cam, |k| Some(PixelSource::Reference(k as u32)), options);
    for k in 0..decoded.mask.len() {
        if decoded.mask[k] {
            continue;
        }
        let (u, v) = ((k % decoded.width) as f64 + 0.5, (k / decoded.width) as f64 + 0.5);
        let (_, dir) = ref_cam.image_ray(u, v);
        if let Some((tu, tv)) = target_cam.project_direction(dir) {
            let (i, j) = (tu.floor(), tv.floor());
            if i >= 0.0 && j >= 0.0 && (i as usize) < w && (j as usize) < h {
                let c = Candidate { depth: f64::INFINITY, color: [0; 3], source: PixelSource::Void, extrapolated: false };
                splats.offer(j as usize * w + i as usize, c, true);
            }
        }
    }
    if let Some(aux) = aux {
        if aux.reference_index != reference.view_index {
            return Err(Error::InvalidParameter("auxiliary data belongs to another reference".into()));
        }
        let pitch = aux.pitch as f64;
        for layer in aux.decode_layers() {
            let cam = Camera::new(layer.pose, intr);
            warp_surface(&mut splats, &cam, &layer.image, &target_cam, |k| layer.ids[k].map(PixelSource::Aux), options);
        }
        let eye = target_cam.center();
        for v in &aux.overflow {
            let p = v.position.map(|x| x as f64);
            let Some(proj) = target_cam.project(p) else { continue };
            let Some((i, j)) = proj.pixel(&intr) else { continue };
            let c = Candidate { depth: proj.depth, color: v.color, source: PixelSource::Aux(v.id), extrapolated: false };
            let hit = match v.facing {
                Some(f) if dot(f.normal(), sub(p, eye)) >= 0.0 => continue,
                Some(f) => splat_patch(&mut splats, &target_cam, p, f.axis as usize, pitch, c),
                None => false,
            };
            if !hit {
                let centered = v.facing.is_none() && is_centered(&proj, i, j, options.center_tolerance);
                splats.offer(j * w + i, c, centered);
            }
        }
    }
    out.reads = std::mem::take(&mut splats.reads);
    for (k, c) in splats.resolve().into_iter().enumerate() {
        if let Some(c) = c {
            out.depth[k] = c.depth;
            out.color[k] = c.color;
            out.source[k] = c.source;
        }
    }
    fill_holes(&mut out, options);
    Ok(out)
}

fn is_centered(p: &Projection, i: usize, j: usize, tolerance: f64) -> bool {
    (p.u - i as f64 - 0.5).abs() <= tolerance && (p.v - j as f64 - 0.5).abs() <= tolerance
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Offers every target pixel whose center ray crosses the voxel's square
/// cell, at the depth of the crossing. Returns whether any pixel was hit.
fn splat_patch(splats: &mut Splats, cam: &Camera, center: Vec3, normal_axis: usize, pitch: f64, c: Candidate) -> bool {
    let intr = cam.intrinsics;
    let Some(proj) = cam.project(center) else { return false };
    let half = 0.5 * pitch;
    let reach = (intr.focal * pitch / proj.depth).ceil() as i64 + 1;
    let (ci, cj) = (proj.u.floor() as i64, proj.v.floor() as i64);
    let mut hit = false;
    for j in (cj - reach).max(0)..=(cj + reach).min(intr.height as i64 - 1) {
        for i in (ci - reach).max(0)..=(ci + reach).min(intr.width as i64 - 1) {
            let (o, d) = cam.image_ray(i as f64 + 0.5, j as f64 + 0.5);
            if d[normal_axis].abs() < 1e-9 {
                continue;
            }
            let t = (center[normal_axis] - o[normal_axis]) / d[normal_axis];
            if t <= 0.0 {
                continue;
            }
            let inside = (0..3)
                .filter(|&a| a != normal_axis)
                .all(|a| within_cell(o[a] + t * d[a] - center[a], half));
            if inside {
                splats.offer(j as usize * intr.width + i as usize, Candidate { depth: t, ..c }, true);
                hit = true;
            }
        }
    }
    hit
}

/// Whether offset `off` from a cell center lies inside a cell of
/// half-width `half`. Like the voxel grid, cells are closed on the low side
/// and open on the high side.
fn within_cell(off: f64, half: f64) -> bool {
    let eps = 1e-9 * half;
    off >= -half - eps && off < half - eps
}

/// Warps a decoded depth image into the target view. Neighboring pixels
/// whose depths differ by at most `connect_threshold` form triangles that
/// are rasterized at target pixel centers. Pixels on the border of that mesh
/// also get their own footprint rasterized, with depth extrapolated from
/// linked neighbors, so the surface reaches its silhouette. Every pixel is
/// also splatted as a point; points of triangle vertices only fill what
/// nothing else covers.
fn warp_surface(
    splats: &mut Splats,
    source_cam: &Camera,
    image: &DecodedImage,
    target_cam: &Camera,
    source_of: impl Fn(usize) -> Option<PixelSource>,
    options: &ReconstructOptions,
) {
    let (w, h) = (image.width, image.height);
    let intr = target_cam.intrinsics;
    let projected: Vec<Option<(Projection, PixelSource)>> = (0..w * h)
        .map(|k| {
            if !image.mask[k] {
                return None;
            }
            let src = source_of(k)?;
            let p = source_cam.unproject((k % w) as f64 + 0.5, (k / w) as f64 + 0.5, image.depth[k]);
            Some((target_cam.project(p)?, src))
        })
        .collect();
    let linked = |a: usize, b: usize| {
        projected[a].is_some()
            && projected[b].is_some()
            && (image.depth[a] - image.depth[b]).abs() <= options.connect_threshold
    };
    let mut covered = vec![false; w * h];
    // Per pixel, bit q is set once a drawn triangle of the quad on that
    // side (0 up-left, 1 up-right, 2 down-left, 3 down-right) uses it.
    let mut touched = vec![0u8; w * h];
    for j in 0..h.saturating_sub(1) {
        for i in 0..w.saturating_sub(1) {
            let (a, b, c, d) = (j * w + i, j * w + i + 1, (j + 1) * w + i, (j + 1) * w + i + 1);
            let side = |k: usize| match k {
                _ if k == a => 3,
                _ if k == b => 2,
                _ if k == c => 1,
                _ => 0,
            };
            let mut draw = |t: [usize; 3]| {
                if !(linked(t[0], t[1]) && linked(t[1], t[2]) && linked(t[0], t[2])) {
                    return false;
                }
                let verts = t.map(|k| {
                    let (p, src) = projected[k].expect("linked vertices are projected");
                    (p, image.color[k], src)
                });
                for k in t {
                    covered[k] = true;
                }
                if rasterize(splats, &verts, intr.width, intr.height, false) {
                    for k in t {
                        touched[k] |= 1 << side(k);
                    }
                }
                true
            };
            let first = draw([a, b, d]);
            let second = draw([a, d, c]);
            if !first && !second {
                draw([a, b, c]);
                draw([b, d, c]);
            }
        }
    }
    for k in 0..w * h {
        let Some((_, src)) = projected[k] else { continue };
        if touched[k] == 0b1111 {
            continue;
        }
        let (i, j) = (k % w, k / w);
        let inv = |n: usize| 1.0 / image.depth[n];
        let neighbor = |ok: bool, n: usize| (ok && linked(k, n)).then_some(n);
        // Inverse-depth slope along one axis, limited with minmod; `None`
        // when no neighbor along it is linked.
        let slope = |lo: Option<usize>, hi: Option<usize>| match (lo, hi) {
            (Some(a), Some(b)) => {
                let (l, r) = (inv(k) - inv(a), inv(b) - inv(k));
                Some(if l * r <= 0.0 { 0.0 } else if l.abs() < r.abs() { l } else { r })
            }
            (Some(a), None) => Some(inv(k) - inv(a)),
            (None, Some(b)) => Some(inv(b) - inv(k)),
            (None, None) => None,
        };
        let gx = slope(neighbor(i > 0, k.wrapping_sub(1)), neighbor(i + 1 < w, k + 1));
        let gy = slope(neighbor(j > 0, k.wrapping_sub(w)), neighbor(j + 1 < h, k + w));
        let (Some(gx), Some(gy)) = (gx, gy) else { continue };
        let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)].map(|(du, dv)| {
            let d = inv(k) + du * gx + dv * gy;
            if d <= 0.0 {
                return None;
            }
            let p = source_cam.unproject(i as f64 + 0.5 + du, j as f64 + 0.5 + dv, 1.0 / d);
            target_cam.project(p).map(|q| (q, image.color[k], src))
        });
        if let [Some(c0), Some(c1), Some(c2), Some(c3)] = corners {
            rasterize(splats, &[c0, c1, c2], intr.width, intr.height, true);
            rasterize(splats, &[c0, c2, c3], intr.width, intr.height, true);
        }
    }
    for (k, p) in projected.iter().enumerate() {
        if let Some((proj, src)) = p {
            if let Some((i, j)) = proj.pixel(&intr) {
                let c = Candidate { depth: proj.depth, color: image.color[k], source: *src, extrapolated: false };
                let centered = !covered[k] && is_centered(proj, i, j, options.center_tolerance);
                splats.offer(j * intr.width + i, c, centered);
            }
        }
    }
}

/// Offers every target pixel center inside the triangle, with depth
/// interpolated in inverse depth and color linearly. The source is taken
/// from the vertex with the largest weight.
fn rasterize(
    splats: &mut Splats,
    verts: &[(Projection, [u8; 3], PixelSource); 3],
    width: usize,
    height: usize,
    extrapolated: bool,
) -> bool {
    let [(p0, _, _), (p1, _, _), (p2, _, _)] = verts;
    let area = (p1.u - p0.u) * (p2.v - p0.v) - (p2.u - p0.u) * (p1.v - p0.v);
    // Triangles are wound counter-clockwise in the source image; a flipped
    // winding means the target sees the back of the surface.
    if area < 1e-9 {
        return false;
    }
    let lo_u = verts.iter().map(|v| v.0.u).fold(f64::INFINITY, f64::min);
    let hi_u = verts.iter().map(|v| v.0.u).fold(f64::NEG_INFINITY, f64::max);
    let lo_v = verts.iter().map(|v| v.0.v).fold(f64::INFINITY, f64::min);
    let hi_v = verts.iter().map(|v| v.0.v).fold(f64::NEG_INFINITY, f64::max);
    // Barycentric slack, so that vertices sitting on a pixel center up to
    // depth-coding noise still cover it.
    const EPS: f64 = 0.02;
    let slack = EPS * (hi_u - lo_u).max(hi_v - lo_v) + 1e-6;
    let i0 = (lo_u - 0.5 - slack).ceil().max(0.0) as usize;
    let j0 = (lo_v - 0.5 - slack).ceil().max(0.0) as usize;
    let i1 = ((hi_u - 0.5 + slack).floor() + 1.0).clamp(0.0, width as f64) as usize;
    let j1 = ((hi_v - 0.5 + slack).floor() + 1.0).clamp(0.0, height as f64) as usize;
    for j in j0..j1 {
        for i in i0..i1 {
            let (x, y) = (i as f64 + 0.5, j as f64 + 0.5);
            let l1 = ((x - p0.u) * (p2.v - p0.v) - (p2.u - p0.u) * (y - p0.v)) / area;
            let l2 = ((p1.u - p0.u) * (y - p0.v) - (x - p0.u) * (p1.v - p0.v)) / area;
            let l0 = 1.0 - l1 - l2;
            if l0 < -EPS || l1 < -EPS || l2 < -EPS {
                continue;
            }
            let l = [l0, l1, l2];
            let inv_depth: f64 = (0..3).map(|t| l[t] / verts[t].0.depth).sum();
            let color = std::array::from_fn(|c| {
                (0..3).map(|t| l[t] * verts[t].1[c] as f64).sum::<f64>().round().clamp(0.0, 255.0) as u8
            });
            let best = (0..3).max_by(|&a, &b| l[a].total_cmp(&l[b]).then(b.cmp(&a))).unwrap_or(0);
            let c = Candidate { depth: 1.0 / inv_depth, color, source: verts[best].2, extrapolated };
            splats.offer(j * width + i, c, true);
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    depth: f64,
    color: [u8; 3],
    source: PixelSource,
    /// Surface extended past its samples.
    extrapolated: bool,
}

/// Per-pixel z-buffer with two tiers. Rasterized surfaces and point
/// samples landing near a pixel center are trusted to cover it; other
/// point samples only fill pixels nothing trusted reached.
struct Splats {
    centered: Vec<Option<Candidate>>,
    loose: Vec<Option<Candidate>>,
    threshold: f64,
    reads: HashSet<PixelSource>,
}

impl Splats {
    fn new(n: usize, threshold: f64) -> Self {
        Self { centered: vec![None; n], loose: vec![None; n], threshold, reads: HashSet::new() }
    }

    /// On the same surface (depths within the threshold), reference
    /// samples win over innovation samples, which win over extrapolated
    /// ones. Otherwise the nearer candidate wins.
    fn beats(&self, new: &Candidate, old: &Candidate) -> bool {
        let rank = |c: &Candidate| match c.source {
            _ if c.extrapolated => 0,
            PixelSource::Reference(_) | PixelSource::Void => 2,
            _ => 1,
        };
        match rank(new).cmp(&rank(old)) {
            std::cmp::Ordering::Less => new.depth < old.depth - self.threshold,
            std::cmp::Ordering::Greater => new.depth <= old.depth + self.threshold,
            std::cmp::Ordering::Equal => new.depth < old.depth,
        }
    }

    fn offer(&mut self, k: usize, c: Candidate, centered: bool) {
        if matches!(c.source, PixelSource::Reference(_) | PixelSource::Aux(_)) {
            self.reads.insert(c.source);
        }
        let slot = if centered { self.centered[k] } else { self.loose[k] };
        if slot.is_none_or(|old| self.beats(&c, &old)) {
            if centered {
                self.centered[k] = Some(c);
            } else {
                self.loose[k] = Some(c);
            }
        }
    }

    fn resolve(self) -> Vec<Option<Candidate>> {
        self.centered.into_iter().zip(self.loose).map(|(c, l)| c.or(l)).collect()
    }
}

/// Fills runs of empty pixels bounded on both sides by surface samples,
/// first along rows, then along columns. Runs next to void stay empty.
fn fill_holes(img: &mut Reconstruction, options: &ReconstructOptions) {
    let (w, h) = (img.width, img.height);
    let rows: Vec<Vec<usize>> = (0..h).map(|j| (0..w).map(|i| j * w + i).collect()).collect();
    let cols: Vec<Vec<usize>> = (0..w).map(|i| (0..h).map(|j| j * w + i).collect()).collect();
    for line in rows.iter().chain(cols.iter()) {
        fill_line(img, line, options);
    }
}

fn fill_line(img: &mut Reconstruction, line: &[usize], options: &ReconstructOptions) {
    let mut s = 0;
    while s < line.len() {
        if img.source[line[s]] != PixelSource::Empty {
            s += 1;
            continue;
        }
        let mut e = s;
        while e < line.len() && img.source[line[e]] == PixelSource::Empty {
            e += 1;
        }
        let gap = e - s;
        let bounded = s > 0 && e < line.len() && gap <= options.max_gap;
        if bounded && img.depth[line[s - 1]].is_finite() && img.depth[line[e]].is_finite() {
            let (a, b) = (line[s - 1], line[e]);
            let (da, db) = (img.depth[a], img.depth[b]);
            let same_layer = (da - db).abs() <= options.depth_threshold;
            for (t, &k) in line[s..e].iter().enumerate() {
                if same_layer {
                    let f = (t + 1) as f64 / (gap + 1) as f64;
                    let ca = img.color[a];
                    let cb = img.color[b];
                    img.color[k] = std::array::from_fn(|c| (ca[c] as f64 * (1.0 - f) + cb[c] as f64 * f).round() as u8);
                    img.depth[k] = da * (1.0 - f) + db * f;
                } else {
                    let far = if da >= db { a } else { b };
                    img.color[k] = img.color[far];
                    img.depth[k] = img.depth[far];
                }
                img.source[k] = PixelSource::Interpolated;
            }
        }
        s = e;
    }
}

impl Reconstruction {
    /// Scene voxels the decoder read while building this reconstruction,
    /// given the reference view that was coded.
    pub fn touched_voxels(&self, reference_view: &ViewImage) -> HashSet<u32> {
        self.reads
            .iter()
            .filter_map(|s| match *s {
                PixelSource::Reference(k) => Some(reference_view.ids[k as usize]),
                PixelSource::Aux(id) => Some(id),
                _ => None,
            })
            .filter(|&id| id != EMPTY)
            .collect()
    }

    /// Compares against the ground-truth render of the target view.
    /// `reference_ids` is the visibility set of the reference.
    pub fn quality(&self, truth: &ViewImage, reference_ids: &crate::innovation::VisibilitySet) -> QualityReport {
        let n = self.color.len();
        let sq = |a: [u8; 3], b: [u8; 3]| -> f64 { (0..3).map(|c| (a[c] as f64 - b[c] as f64).powi(2)).sum::<f64>() / 3.0 };
        let mut total = 0.0;
        let mut dis_total = 0.0;
        let mut dis_n = 0;
        for k in 0..n {
            let e = sq(self.color[k], truth.color[k]);
            total += e;
            let id = truth.ids[k];
            if id != EMPTY && !reference_ids.contains(id) {
                dis_total += e;
                dis_n += 1;
            }
        }
        let mse = total / n as f64;
        let interpolated = self.source.iter().filter(|&&s| s == PixelSource::Interpolated).count();
        QualityReport {
            mse,
            psnr: psnr(mse),
            exact: mse == 0.0,
            disoccluded_mse: if dis_n == 0 { 0.0 } else { dis_total / dis_n as f64 },
            disoccluded_pixels: dis_n,
            interpolated_fraction: interpolated as f64 / n as f64,
            empty_pixels: self.source.iter().filter(|&&s| s == PixelSource::Empty).count(),
        }
    }
}

/// Quality of one reconstructed member view, with and without the
/// segment's innovation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MemberQuality {
    pub segment: usize,
    pub reference: usize,
    pub view: usize,
    pub psnr: f64,
    pub mse: f64,
    pub disoccluded_pixels: usize,
    pub disoccluded_mse: f64,
    pub disoccluded_mse_without_aux: f64,
    pub interpolated_fraction: f64,
    /// Voxels drawn on that lie outside the reference set and the innovation.
    pub violations: usize,
}

/// Reconstructs every member of every segment of `partition`.
pub fn evaluate_partition(
    dataset: &crate::dataset::Dataset,
    partition: &crate::partition::Partition,
    options: &ReconstructOptions,
) -> Result<Vec<MemberQuality>> {
    use rayon::prelude::*;
    let codec = super::DctCodec::new(dataset, partition.q);
    let per_segment = partition
        .segments
        .par_iter()
        .enumerate()
        .map(|(s, seg)| {
            let reference = codec.encode_reference(seg.reference)?;
            let aux = codec.encode_aux(&seg.innovation())?;
            let ref_set = &dataset.sets[seg.reference];
            let phi: HashSet<u32> = seg.phi.iter().copied().collect();
            seg.members
                .iter()
                .map(|&view| {
                    let with = reconstruct_view(&reference, Some(&aux), &seg.members, view, &dataset.domain, options)?;
                    let without = reconstruct_view(&reference, None, &seg.members, view, &dataset.domain, options)?;
                    let truth = &dataset.views[view];
                    let q = with.quality(truth, ref_set);
                    let q0 = without.quality(truth, ref_set);
                    let violations = with
                        .touched_voxels(&dataset.views[seg.reference])
                        .iter()
                        .filter(|id| !ref_set.contains(**id) && !phi.contains(id))
                        .count();
                    Ok(MemberQuality {
                        segment: s,
                        reference: seg.reference,
                        view,
                        psnr: q.psnr,
                        mse: q.mse,
                        disoccluded_pixels: q.disoccluded_pixels,
                        disoccluded_mse: q.disoccluded_mse,
                        disoccluded_mse_without_aux: q0.disoccluded_mse,
                        interpolated_fraction: q.interpolated_fraction,
                        violations,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_segment.into_iter().flatten().collect())
}
