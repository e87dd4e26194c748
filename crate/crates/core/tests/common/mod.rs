//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::OnceLock;

use navseg::navdomain::{DomainConfig, DomainShape, PopularityConfig};
use navseg::scene::{CameraIntrinsics, CameraPose, SceneConfig, SceneModel, EMPTY};
use navseg::Dataset;

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join(format!("{name}.json"))
}

pub fn shipped(name: &str) -> SceneConfig {
    SceneConfig::load(scene_path(name)).unwrap()
}

pub fn desk() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| Dataset::load(scene_path("desk")).unwrap())
}

pub fn occluder() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| Dataset::load(scene_path("occluder")).unwrap())
}

pub fn line_domain(count: usize, tx0: f64) -> DomainConfig {
    DomainConfig {
        shape: DomainShape::Line { count },
        delta: 0.02,
        origin: CameraPose::at(tx0, 0.005, 0.0),
        metric_weights: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        popularity: PopularityConfig::Uniform,
    }
}

/// The desk layout at a coarser pitch and a narrower wall, under 10^4
/// voxels, seen from `count` views centered on the boxes.
pub fn small_desk(count: usize) -> SceneConfig {
    let mut cfg = shipped("desk");
    cfg.pitch = 0.02;
    cfg.background.width = 2.4;
    cfg.domain = Some(line_domain(count, 0.005 - 0.01 * count as f64));
    cfg
}

/// Same as the shipped desk but restricted to `count` views.
pub fn desk_views(count: usize) -> SceneConfig {
    let mut cfg = shipped("desk");
    cfg.domain = Some(line_domain(count, 0.005 - 0.01 * count as f64));
    cfg
}

fn ray(pose: &CameraPose, intr: &CameraIntrinsics, i: usize, j: usize) -> ([f64; 3], [f64; 3]) {
    assert!(pose.rx == 0.0 && pose.ry == 0.0 && pose.rz == 0.0, "oracle handles unrotated cameras only");
    let (cx, cy) = (intr.width as f64 / 2.0, intr.height as f64 / 2.0);
    let d = [(i as f64 + 0.5 - cx) / intr.focal, (j as f64 + 0.5 - cy) / intr.focal, 1.0];
    ([pose.tx, pose.ty, pose.tz], d)
}

/// A voxel's square cell: normal axis, plane coordinate and half-open
/// bounds on the two in-plane axes.
struct Cell {
    id: u32,
    axis: usize,
    coord: f64,
    bounds: [(usize, f64, f64); 2],
}

fn cells(scene: &SceneModel) -> Vec<Cell> {
    scene
        .voxels
        .iter()
        .map(|v| {
            let face = scene.face_of(v.id).unwrap();
            let (iu, iv) = face.cell_of(v.id);
            let p = face.pitch;
            let span = |min: f64, i: usize| (min + i as f64 * p, min + (i + 1) as f64 * p);
            let (u0, u1) = span(face.u_min, iu);
            let (v0, v1) = span(face.v_min, iv);
            Cell {
                id: v.id,
                axis: face.normal_axis,
                coord: v.position[face.normal_axis],
                bounds: [(face.u_axis, u0, u1), (face.v_axis, v0, v1)],
            }
        })
        .collect()
}

/// Ray parameter at which the ray crosses the cell.
fn hit(cell: &Cell, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
    let a = cell.axis;
    if d[a].abs() < 1e-12 {
        return None;
    }
    let t = (cell.coord - o[a]) / d[a];
    if !(t > 1e-9) {
        return None;
    }
    cell.bounds
        .iter()
        .all(|&(axis, lo, hi)| {
            let x = o[axis] + t * d[axis];
            x >= lo && x < hi
        })
        .then_some(t)
}

/// Brute-force render: every pixel ray is tested against every voxel.
/// Voxels claimed by several pixels go to the pixel nearest their
/// projection; the others move to their next hit (proposal rounds until
/// stable).
pub fn raycast_ids(scene: &SceneModel, pose: CameraPose, intr: CameraIntrinsics) -> Vec<u32> {
    let n = intr.width * intr.height;
    let cells = cells(scene);
    let hits: Vec<Vec<(f64, u32)>> = (0..n)
        .map(|p| {
            let (o, d) = ray(&pose, &intr, p % intr.width, p / intr.width);
            let mut h: Vec<(f64, u32)> = cells.iter().filter_map(|c| hit(c, o, d).map(|t| (t, c.id))).collect();
            h.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            h
        })
        .collect();
    let claim = |id: u32, p: usize| {
        let v = scene.voxel(id).position;
        let z = v[2] - pose.tz;
        let u = intr.focal * (v[0] - pose.tx) / z + intr.width as f64 / 2.0;
        let w = intr.focal * (v[1] - pose.ty) / z + intr.height as f64 / 2.0;
        let (pi, pj) = ((p % intr.width) as f64 + 0.5, (p / intr.width) as f64 + 0.5);
        ((u - pi).powi(2) + (w - pj).powi(2), p)
    };
    let mut rank = vec![0usize; n];
    let mut holder: HashMap<u32, usize> = HashMap::new();
    let mut free: Vec<usize> = (0..n).collect();
    while !free.is_empty() {
        let mut proposals: HashMap<u32, Vec<usize>> = HashMap::new();
        for &p in &free {
            if let Some(&(_, id)) = hits[p].get(rank[p]) {
                proposals.entry(id).or_default().push(p);
            }
        }
        let mut next = Vec::new();
        for (id, mut ps) in proposals {
            if let Some(&h) = holder.get(&id) {
                ps.push(h);
            }
            let best = *ps.iter().min_by(|&&a, &&b| claim(id, a).partial_cmp(&claim(id, b)).unwrap()).unwrap();
            holder.insert(id, best);
            for p in ps.into_iter().filter(|&p| p != best) {
                rank[p] += 1;
                next.push(p);
            }
        }
        free = next;
    }
    (0..n).map(|p| hits[p].get(rank[p]).map_or(EMPTY, |h| h.1)).collect()
}

pub fn id_set(ids: &[u32]) -> BTreeSet<u32> {
    ids.iter().copied().filter(|&id| id != EMPTY).collect()
}

/// Union of member sets minus the reference set.
pub fn oracle_phi(sets: &[BTreeSet<u32>], reference: usize, members: &[usize]) -> BTreeSet<u32> {
    let mut union = BTreeSet::new();
    for &m in members {
        union.extend(sets[m].iter().copied());
    }
    union.difference(&sets[reference]).copied().collect()
}

pub fn oracle_sets(ds: &Dataset) -> Vec<BTreeSet<u32>> {
    ds.views.iter().map(|v| id_set(&v.ids)).collect()
}

/// Every way of splitting `0..n` into contiguous, non-empty pieces, as
/// lists of `(first, last)` ranges.
pub fn contiguous_splits(n: usize, pieces: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(start: usize, n: usize, left: usize, acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if left == 1 {
            acc.push((start, n - 1));
            out.push(acc.clone());
            acc.pop();
            return;
        }
        for end in start..n - (left - 1) {
            acc.push((start, end));
            rec(end + 1, n, left - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, pieces, &mut Vec::new(), &mut out);
    out
}
