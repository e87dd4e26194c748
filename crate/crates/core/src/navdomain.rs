//! Discrete navigation domain: pose grid, pose metric, navigation ball and
//! view popularity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{CameraIntrinsics, CameraPose};

/// Relative slack applied to the strict ball inequality so that poses
/// generated as `origin + k * delta` are classified by their index distance.
const BALL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainShape {
    Line { count: usize },
    Grid { rows: usize, cols: usize },
}

impl DomainShape {
    pub fn len(&self) -> usize {
        match *self {
            DomainShape::Line { count } => count,
            DomainShape::Grid { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(rows, cols)`; a line is a single row.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            DomainShape::Line { count } => (1, count),
            DomainShape::Grid { rows, cols } => (rows, cols),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopularityConfig {
    #[default]
    Uniform,
    /// Gaussian profile over column indices.
    Gaussian { mean: f64, sigma: f64 },
}

fn default_weights() -> [f64; 6] {
    [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub shape: DomainShape,
    /// Navigation step between adjacent poses, meters.
    pub delta: f64,
    #[serde(default)]
    pub origin: CameraPose,
    #[serde(default = "default_weights")]
    pub metric_weights: [f64; 6],
    #[serde(default)]
    pub popularity: PopularityConfig,
}

/// Per-view prior visiting probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityDist {
    pub weights: Vec<f64>,
}

impl PopularityDist {
    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    /// Gaussian profile over column index, normalized over the domain.
    pub fn gaussian(shape: DomainShape, mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidDomain("popularity sigma must be positive".into()));
        }
        let (_, cols) = shape.dims();
        let raw: Vec<f64> = (0..shape.len())
            .map(|k| {
                let c = (k % cols) as f64;
                (-0.5 * ((c - mean) / sigma).powi(2)).exp()
            })
            .collect();
        Self::from_weights(raw)
    }

    pub fn from_weights(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDomain("popularity weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDomain("popularity weights sum to zero".into()));
        }
        Ok(Self { weights: raw.into_iter().map(|w| w / total).collect() })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Probability mass of a set of views.
pub fn segment_popularity(dist: &PopularityDist, members: &[usize]) -> f64 {
    members.iter().map(|&m| dist.weights[m]).sum()
}

/// Weighted Euclidean distance between two camera parameter vectors.
pub fn distance(a: &CameraPose, b: &CameraPose, weights: &[f64; 6]) -> Result<f64> {
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidParameter("metric weights must be nonnegative".into()));
    }
    Ok(weighted_norm(a, b, weights))
}

fn weighted_norm(a: &CameraPose, b: &CameraPose, weights: &[f64; 6]) -> f64 {
    let (ca, cb) = (a.components(), b.components());
    (0..6).map(|k| weights[k] * (ca[k] - cb[k]).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigationDomain {
    pub shape: DomainShape,
    pub poses: Vec<CameraPose>,
    pub delta: f64,
    pub metric_weights: [f64; 6],
    pub intrinsics: CameraIntrinsics,
    pub popularity: PopularityDist,
}

impl NavigationDomain {
    /// Lays out poses as `origin + col * delta * x + row * delta * y`.
    pub fn new(config: &DomainConfig, intrinsics: CameraIntrinsics) -> Result<Self> {
        let n = config.shape.len();
        if n == 0 {
            return Err(Error::InvalidDomain("domain has no views".into()));
        }
        if !(config.delta > 0.0) {
            return Err(Error::InvalidDomain("navigation step must be positive".into()));
        }
        if config.metric_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidDomain("metric weights must be nonnegative".into()));
        }
        if config.metric_weights[0] <= 0.0 {
            return Err(Error::InvalidDomain("x-translation weight must be positive".into()));
        }
        let is_grid = matches!(config.shape, DomainShape::Grid { rows, .. } if rows > 1);
        if is_grid && config.metric_weights[1] != config.metric_weights[0] {
            return Err(Error::InvalidDomain("grid domains need equal x and y translation weights".into()));
        }
        let (rows, cols) = config.shape.dims();
        let o = config.origin;
        let mut poses = Vec::with_capacity(n);
        for r in 0..rows {
            for c in 0..cols {
                poses.push(CameraPose {
                    tx: o.tx + c as f64 * config.delta,
                    ty: o.ty + r as f64 * config.delta,
                    ..o
                });
            }
        }
        let popularity = match config.popularity {
            PopularityConfig::Uniform => PopularityDist::uniform(n),
            PopularityConfig::Gaussian { mean, sigma } => PopularityDist::gaussian(config.shape, mean, sigma)?,
        };
        Ok(Self {
            shape: config.shape,
            poses,
            // Metric length of one grid step.
            delta: config.delta * config.metric_weights[0].sqrt(),
            metric_weights: config.metric_weights,
            intrinsics,
            popularity,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange { index, len: self.len() });
        }
        Ok(())
    }

    /// `(row, col)` of a view index.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        let (_, cols) = self.shape.dims();
        (index / cols, index % cols)
    }

    pub fn index_of(&self, row: usize, col: usize) -> usize {
        let (_, cols) = self.shape.dims();
        row * cols + col
    }

    pub fn view_distance(&self, a: usize, b: usize) -> f64 {
        weighted_norm(&self.poses[a], &self.poses[b], &self.metric_weights)
    }

    /// Views strictly closer than `nt * delta`, plus the view itself.
    pub fn navigation_ball(&self, index: usize, nt: usize) -> Result<Vec<usize>> {
        self.check_index(index)?;
        let radius = nt as f64 * self.delta * (1.0 - BALL_SLACK);
        Ok((0..self.len())
            .filter(|&k| k == index || self.view_distance(index, k) < radius)
            .collect())
    }

    /// Index of the view nearest the domain center.
    pub fn center_index(&self) -> usize {
        let (rows, cols) = self.shape.dims();
        self.index_of(rows / 2, cols / 2)
    }
}

/// Free-function form of [`NavigationDomain::navigation_ball`].
pub fn navigation_ball(domain: &NavigationDomain, index: usize, nt: usize) -> Result<Vec<usize>> {
    domain.navigation_ball(index, nt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> NavigationDomain {
        let cfg = DomainConfig {
            shape: DomainShape::Line { count: n },
            delta: 0.02,
            origin: CameraPose::default(),
            metric_weights: default_weights(),
            popularity: PopularityConfig::Uniform,
        };
        NavigationDomain::new(&cfg, CameraIntrinsics::new(200.0, 64, 48)).unwrap()
    }

    fn grid(rows: usize, cols: usize) -> NavigationDomain {
        let cfg = DomainConfig {
            shape: DomainShape::Grid { rows, cols },
            delta: 0.02,
            origin: CameraPose::default(),
            metric_weights: default_weights(),
            popularity: PopularityConfig::Uniform,
        };
        NavigationDomain::new(&cfg, CameraIntrinsics::new(200.0, 64, 48)).unwrap()
    }

    #[test]
    fn distance_examples() {
        let w = [1.0; 6];
        let c = CameraPose::at(0.3, 0.1, -0.2);
        assert_eq!(distance(&c, &c, &w).unwrap(), 0.0);
        let moved = CameraPose { tx: c.tx + 0.1, ..c };
        assert!((distance(&c, &moved, &w).unwrap() - 0.1).abs() < 1e-12);
        let mixed = CameraPose { tx: 0.5, ty: 0.1, tz: -0.2, rx: 0.0, ry: 0.2, rz: 0.0 };
        let weights = [1.0, 1.0, 1.0, 0.5, 0.5, 0.5];
        let expected = (0.2f64.powi(2) + 0.5 * 0.2f64.powi(2)).sqrt();
        assert!((distance(&c, &mixed, &weights).unwrap() - expected).abs() < 1e-12);
        assert!(distance(&c, &mixed, &[-1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn adjacent_views_are_one_step_apart() {
        let d = grid(3, 5);
        assert!((d.view_distance(0, 1) - 0.02).abs() < 1e-12);
        assert!((d.view_distance(0, 5) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn ball_examples() {
        let d = line(120);
        assert_eq!(d.navigation_ball(10, 0).unwrap(), vec![10]);
        assert_eq!(d.navigation_ball(10, 2).unwrap(), vec![9, 10, 11]);
        assert_eq!(d.navigation_ball(0, 2).unwrap(), vec![0, 1]);
        assert_eq!(d.navigation_ball(119, 2).unwrap(), vec![118, 119]);
        assert_eq!(d.navigation_ball(60, 5).unwrap().len(), 9);
        assert!(matches!(d.navigation_ball(120, 1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn grid_ball_matches_index_scan() {
        let d = grid(5, 120);
        let center = d.index_of(2, 60);
        let ball = d.navigation_ball(center, 3).unwrap();
        let mut expected = Vec::new();
        for r in 0..5i64 {
            for c in 0..120i64 {
                let (dr, dc) = (r - 2, c - 60);
                if dr * dr + dc * dc < 9 {
                    expected.push((r * 120 + c) as usize);
                }
            }
        }
        assert_eq!(ball, expected);
        assert_eq!(ball.len(), 25);
    }

    #[test]
    fn popularity_examples() {
        let uniform = PopularityDist::uniform(120);
        let members: Vec<usize> = (0..40).collect();
        assert!((segment_popularity(&uniform, &members) - 1.0 / 3.0).abs() < 1e-12);
        let all: Vec<usize> = (0..120).collect();
        assert!((segment_popularity(&uniform, &all) - 1.0).abs() < 1e-12);

        let g = PopularityDist::gaussian(DomainShape::Line { count: 120 }, 40.0, 15.0).unwrap();
        let raw: Vec<f64> = (0..120).map(|c| (-0.5 * ((c as f64 - 40.0) / 15.0).powi(2)).exp()).collect();
        let total: f64 = raw.iter().sum();
        let direct: f64 = raw[10..50].iter().sum::<f64>() / total;
        let members: Vec<usize> = (10..50).collect();
        assert!((segment_popularity(&g, &members) - direct).abs() < 1e-12);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn metric_axioms(a in 0usize..600, b in 0usize..600, c in 0usize..600) {
            let d = grid(5, 120);
            let (ab, ba) = (d.view_distance(a, b), d.view_distance(b, a));
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(d.view_distance(a, a), 0.0);
            prop_assert!(a == b || ab > 0.0);
            prop_assert!(d.view_distance(a, c) <= ab + d.view_distance(b, c) + 1e-12);
        }

        #[test]
        fn ball_is_monotone(x in 0usize..120, nt in 0usize..20, extra in 0usize..10) {
            let d = line(120);
            let small = d.navigation_ball(x, nt).unwrap();
            let large = d.navigation_ball(x, nt + extra).unwrap();
            prop_assert!(small.iter().all(|k| large.contains(k)));
        }
    }
}
