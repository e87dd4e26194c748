//! A scene together with its navigation domain and every rendered view.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::innovation::{similarity, VisibilitySet};
use crate::navdomain::NavigationDomain;
use crate::scene::{build_scene, render_view, visible_set, SceneConfig, SceneModel, ViewImage};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub scene: SceneModel,
    pub domain: NavigationDomain,
    pub views: Vec<ViewImage>,
    pub sets: Vec<VisibilitySet>,
}

impl Dataset {
    pub fn from_config(config: &SceneConfig) -> Result<Self> {
        let domain_cfg = config
            .domain
            .as_ref()
            .ok_or_else(|| Error::InvalidDomain("scene file has no domain section".into()))?;
        let scene = build_scene(config)?;
        let domain = NavigationDomain::new(domain_cfg, config.intrinsics)?;
        Self::render(scene, domain)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_config(&SceneConfig::load(path)?)
    }

    pub fn render(scene: SceneModel, domain: NavigationDomain) -> Result<Self> {
        let views = domain
            .poses
            .par_iter()
            .map(|pose| render_view(&scene, *pose, domain.intrinsics))
            .collect::<Result<Vec<_>>>()?;
        let sets = views.iter().enumerate().map(|(k, v)| visible_set(k, v)).collect();
        Ok(Self { scene, domain, views, sets })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn similarity(&self, a: usize, b: usize) -> usize {
        similarity(&self.sets[a], &self.sets[b])
    }

    /// `gamma(from, k) / |S_from|` for every view `k`.
    pub fn similarity_curve(&self, from: usize) -> Result<Vec<f64>> {
        self.domain.check_index(from)?;
        let base = self.sets[from].len().max(1) as f64;
        Ok((0..self.len()).map(|k| self.similarity(from, k) as f64 / base).collect())
    }
}
