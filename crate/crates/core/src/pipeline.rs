//! Coarse-to-fine inference: a dense plane sweep at the coarsest level,
//! then per-pixel branching into sparse volumes down to full resolution.

use std::str::FromStr;

use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{aggregate_views, build_view_cost, regularize_dense, Regularization, ViewLevel};
use crate::error::{invalid_arg, MvsError, Result};
use crate::evaluation::FusionParams;
use crate::features::{FeaturePyramid, FEATURE_CHANNELS};
use crate::geometry::{sample_inverse_depth, scale_camera, CameraView, DepthRange};
use crate::grid::DepthMap;
use crate::io::LevelDistribution;
use crate::npdist::{branch_topk, branch_unimodal, expectation, upsample_hypotheses, HypothesisSet};
use crate::scene::SceneBundle;
use crate::sparse::{build_sparse_volume, sparse_aggregate};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Top-K branching of the per-pixel distribution.
    #[default]
    Nonparametric,
    /// A single window around the expectation at every level.
    Unimodal,
}

impl FromStr for Mode {
    type Err = MvsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonparametric" => Ok(Mode::Nonparametric),
            "unimodal" | "unimodal-baseline" => Ok(Mode::Unimodal),
            other => Err(invalid_arg(format!("unknown mode `{other}` (expected nonparametric or unimodal)"))),
        }
    }
}

/// Run configuration, stored as a flat JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pyramid levels `L + 1`.
    pub levels: usize,
    /// Samples per pixel `M^l`, finest level first.
    pub hyps: Vec<usize>,
    pub groups: usize,
    /// Views per inference, reference included.
    pub views: usize,
    /// Overrides the scene's depth range when set.
    pub depth_min: Option<f64>,
    pub depth_max: Option<f64>,
    pub mode: Mode,
    pub temperature: f64,
    pub smoothing_passes: usize,
    /// Per-level loss weights `w^l`, finest level first.
    pub loss_weights: Vec<f64>,
    pub tau_depth: f64,
    pub n_min: usize,
    pub tau_dedup: f64,
    /// Region band threshold in percent of the ground-truth depth range.
    pub theta_pct: f64,
    /// Outlier cap for point-cloud distances, in scene units.
    pub d_cap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let fusion = FusionParams::default();
        Self {
            levels: 4,
            hyps: vec![8, 16, 32, 96],
            groups: 4,
            views: 5,
            depth_min: None,
            depth_max: None,
            mode: Mode::Nonparametric,
            temperature: 1.0,
            smoothing_passes: 2,
            loss_weights: vec![1.0; 4],
            tau_depth: fusion.tau_depth,
            n_min: fusion.n_min,
            tau_dedup: fusion.tau_dedup,
            theta_pct: 1.0,
            d_cap: 0.02,
        }
    }
}

impl PipelineConfig {
    /// The training profile with 48 coarsest planes.
    pub fn training() -> Self {
        Self {
            hyps: vec![8, 16, 32, 48],
            ..Self::default()
        }
    }

    pub fn coarsest(&self) -> usize {
        self.levels - 1
    }

    /// Selected samples `K^l = M^{l-1} / 2` at level `l >= 1`.
    pub fn topk(&self, level: usize) -> usize {
        self.hyps[level - 1] / 2
    }

    pub fn regularization(&self) -> Regularization {
        Regularization {
            passes: self.smoothing_passes,
            temperature: self.temperature,
        }
    }

    pub fn fusion(&self) -> FusionParams {
        FusionParams {
            tau_depth: self.tau_depth,
            n_min: self.n_min,
            tau_dedup: self.tau_dedup,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(invalid_arg("need at least two pyramid levels"));
        }
        if self.hyps.len() != self.levels {
            return Err(invalid_arg(format!(
                "{} hypothesis counts for {} levels",
                self.hyps.len(),
                self.levels
            )));
        }
        if self.hyps[self.coarsest()] < 2 {
            return Err(invalid_arg("the coarsest level needs at least two planes"));
        }
        for l in 1..self.levels {
            let m_next = self.hyps[l - 1];
            if m_next == 0 || m_next % 2 != 0 {
                return Err(invalid_arg(format!("M^{} = {m_next} must be even and positive", l - 1)));
            }
            if self.topk(l) > self.hyps[l] {
                return Err(invalid_arg(format!(
                    "level {l} selects {} of {} samples",
                    self.topk(l),
                    self.hyps[l]
                )));
            }
        }
        if self.groups == 0 || FEATURE_CHANNELS % self.groups != 0 {
            return Err(invalid_arg(format!("{} groups do not divide {FEATURE_CHANNELS} channels", self.groups)));
        }
        if self.views < 2 {
            return Err(invalid_arg("need a reference and at least one source view"));
        }
        if !(self.temperature > 0.0) {
            return Err(invalid_arg("temperature must be positive"));
        }
        if self.loss_weights.len() != self.levels {
            return Err(invalid_arg("one loss weight per level is required"));
        }
        Ok(())
    }

    /// Depth range of a run: the scene's, with any configured override.
    pub fn depth_range(&self, scene: &SceneBundle) -> Result<DepthRange> {
        DepthRange::new(
            self.depth_min.unwrap_or(scene.depth_range.min()),
            self.depth_max.unwrap_or(scene.depth_range.max()),
        )
    }
}

/// Inference result for one reference view.
#[derive(Clone, Debug)]
pub struct InferenceOutput {
    pub reference: usize,
    pub sources: Vec<usize>,
    /// Distribution at every level, indexed by level (finest first).
    pub levels: Vec<LevelDistribution>,
    /// Full-resolution expectation rounded to `f32`; `NaN` where no source
    /// view matched.
    pub depth: DepthMap,
}

/// Descriptor pyramids and per-level cameras of every view of a scene.
pub struct PreparedScene<'a> {
    pub scene: &'a SceneBundle,
    pub pyramids: Vec<FeaturePyramid>,
    /// `cameras[view][level]`.
    pub cameras: Vec<Vec<CameraView>>,
}

impl<'a> PreparedScene<'a> {
    pub fn new(scene: &'a SceneBundle, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(invalid_arg("need at least one level"));
        }
        let pyramids = scene
            .images
            .par_iter()
            .map(|img| FeaturePyramid::from_image(img, levels - 1))
            .collect::<Result<Vec<_>>>()?;
        let cameras = scene
            .cameras
            .iter()
            .map(|c| (0..levels).map(|l| scale_camera(c, l)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scene,
            pyramids,
            cameras,
        })
    }

    fn view_level(&self, view: usize, level: usize) -> ViewLevel<'_> {
        ViewLevel {
            features: self.pyramids[view].level(level),
            camera: &self.cameras[view][level],
        }
    }
}

/// The `count` views nearest to `reference` by camera center, ties broken
/// by index.
pub fn select_sources(cameras: &[CameraView], reference: usize, count: usize) -> Vec<usize> {
    let c0 = cameras[reference].center();
    let mut others: Vec<(f64, usize)> = cameras
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != reference)
        .map(|(i, c)| ((c.center() - c0).norm(), i))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(count).map(|(_, i)| i).collect()
}

/// Runs the full pyramid for one reference view.
pub fn run_inference(prepared: &PreparedScene<'_>, cfg: &PipelineConfig, reference: usize) -> Result<InferenceOutput> {
    cfg.validate()?;
    let scene = prepared.scene;
    if reference >= scene.view_count() {
        return Err(invalid_arg(format!("reference view {reference} out of range")));
    }
    if prepared.pyramids.first().map_or(0, |p| p.levels.len()) != cfg.levels {
        return Err(invalid_arg("prepared pyramid depth differs from the configured levels"));
    }
    let sources = select_sources(&scene.cameras, reference, cfg.views - 1);
    if sources.is_empty() {
        return Err(invalid_arg("scene has no source views"));
    }
    let range = cfg.depth_range(scene)?;
    let reg = cfg.regularization();
    let top = cfg.coarsest();

    let planes = sample_inverse_depth(&range, cfg.hyps[top])?;
    let reference_top = prepared.view_level(reference, top);
    let volumes = sources
        .iter()
        .map(|&s| build_view_cost(reference_top, prepared.view_level(s, top), &planes.depths, cfg.groups))
        .collect::<Result<Vec<_>>>()?;
    let fused = aggregate_views(&volumes)?;
    if !fused.pixel_valid.iter().any(|&v| v) {
        return Err(MvsError::NoOverlap);
    }
    let mut hyps = HypothesisSet::shared_planes(top, fused.width, fused.height, &planes);
    let mut probs = regularize_dense(&fused, reg)?;
    let mut levels = Vec::with_capacity(cfg.levels);

    for level in (0..top).rev() {
        let branched = match cfg.mode {
            Mode::Nonparametric => branch_topk(&hyps, &probs, cfg.topk(level + 1))?,
            Mode::Unimodal => branch_unimodal(&hyps, &probs, cfg.hyps[level])?,
        };
        let reference_level = prepared.view_level(reference, level);
        let next = upsample_hypotheses(&branched, reference_level.features.width, reference_level.features.height)?;
        let source_levels: Vec<ViewLevel<'_>> = sources.iter().map(|&s| prepared.view_level(s, level)).collect();
        let sparse = build_sparse_volume(&next, reference_level, &source_levels, cfg.groups)?;
        let next_probs = sparse_aggregate(&sparse, reg)?;
        levels.push(LevelDistribution {
            hypotheses: std::mem::replace(&mut hyps, next),
            probabilities: std::mem::replace(&mut probs, next_probs),
        });
    }

    let depth = DepthMap::new(
        hyps.width,
        hyps.height,
        (0..hyps.pixel_count())
            .map(|p| {
                if !probs.valid[p] {
                    return Ok(f64::NAN);
                }
                let d = expectation(hyps.pixel_depths(p), probs.pixel(p))?.clamp(range.min(), range.max());
                // depth maps are stored as 32-bit floats
                Ok(d as f32 as f64)
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    levels.push(LevelDistribution {
        hypotheses: hyps,
        probabilities: probs,
    });
    levels.reverse();
    Ok(InferenceOutput {
        reference,
        sources,
        levels,
        depth,
    })
}

/// Infers a depth map for every view of the scene, each as reference.
pub fn run_all(scene: &SceneBundle, cfg: &PipelineConfig) -> Result<Vec<InferenceOutput>> {
    cfg.validate()?;
    let prepared = PreparedScene::new(scene, cfg.levels)?;
    (0..scene.view_count())
        .into_par_iter()
        .map(|r| run_inference(&prepared, cfg, r))
        .collect()
}

/// Finest sample spacing `Δd^0` at depth `d`: the coarsest inverse-depth
/// step converted to metric spacing and halved once per level.
pub fn finest_spacing(range: &DepthRange, cfg: &PipelineConfig, d: f64) -> f64 {
    let step = (1.0 / range.min() - 1.0 / range.max()) / (cfg.hyps[cfg.coarsest()] - 1) as f64;
    d * d * step / (1u64 << cfg.coarsest()) as f64
}

/// Full-resolution pixel of `cam` viewing `point`, rounded to the nearest
/// integer coordinates.
pub fn nearest_pixel(cam: &CameraView, point: &nalgebra::Point3<f64>) -> Option<(usize, usize)> {
    let (px, _) = cam.project(point).ok()?;
    let (x, y) = (px.x.round(), px.y.round());
    (x >= 0.0 && y >= 0.0 && x < cam.width() as f64 && y < cam.height() as f64).then_some((x as usize, y as usize))
}

/// Camera point of a reference pixel at `depth`.
pub fn pixel_point(cam: &CameraView, x: usize, y: usize, depth: f64) -> nalgebra::Point3<f64> {
    cam.unproject(Point2::new(x as f64, y as f64), depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_scene, Preset, SynthOptions};

    #[test]
    fn default_config_derives_k() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!((1..4).map(|l| cfg.topk(l)).collect::<Vec<_>>(), vec![4, 8, 16]);
        let t = PipelineConfig::training();
        t.validate().unwrap();
        assert_eq!((1..4).map(|l| t.topk(l)).collect::<Vec<_>>(), vec![4, 8, 16]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            PipelineConfig { levels: 1, hyps: vec![8], loss_weights: vec![1.0], ..Default::default() },
            PipelineConfig { hyps: vec![8, 16, 32], ..Default::default() },
            PipelineConfig { hyps: vec![7, 16, 32, 96], ..Default::default() },
            PipelineConfig { hyps: vec![8, 16, 96, 32], ..Default::default() },
            PipelineConfig { groups: 3, ..Default::default() },
            PipelineConfig { views: 1, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = PipelineConfig {
            mode: Mode::Unimodal,
            depth_min: Some(1.5),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"mode\":\"unimodal\""));
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"views": 3}"#).unwrap();
        assert_eq!(partial.views, 3);
        assert_eq!(partial.hyps, vec![8, 16, 32, 96]);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"view": 3}"#).is_err());
    }

    #[test]
    fn finest_spacing_matches_plane_spacing() {
        let range = DepthRange::new(2.0, 10.0).unwrap();
        let cfg = PipelineConfig::default();
        let planes = sample_inverse_depth(&range, 96).unwrap();
        // near the middle plane the metric spacing is close to d^2 times the
        // inverse step
        let m = 48;
        let d = planes.depths[m];
        let coarse = finest_spacing(&range, &cfg, d) * 8.0;
        assert!((coarse - planes.intervals[m]).abs() / coarse < 0.01);
    }

    #[test]
    fn small_scene_runs_and_emits_every_level() {
        let scene = synth_scene(&SynthOptions::new(Preset::TwoPlane, 64, 3)).unwrap().bundle;
        let cfg = PipelineConfig {
            views: 3,
            ..Default::default()
        };
        let prepared = PreparedScene::new(&scene, cfg.levels).unwrap();
        let out = run_inference(&prepared, &cfg, 0).unwrap();
        assert_eq!(out.sources.len(), 2);
        assert_eq!(out.levels.len(), 4);
        for (l, dist) in out.levels.iter().enumerate() {
            assert_eq!(dist.hypotheses.samples, cfg.hyps[l]);
            assert_eq!(dist.hypotheses.width, 64 >> l);
            for p in 0..dist.hypotheses.pixel_count() {
                if dist.probabilities.valid[p] {
                    let s: f64 = dist.probabilities.pixel(p).iter().sum();
                    assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
        let range = scene.depth_range;
        assert!(out.depth.data.iter().filter(|d| d.is_finite()).all(|&d| range.contains(d)));
        assert!(out.depth.valid_count() > 64 * 64 / 2);
    }

    #[test]
    fn source_selection_prefers_near_views() {
        let scene = synth_scene(&SynthOptions::new(Preset::Sphere, 32, 5)).unwrap().bundle;
        let s = select_sources(&scene.cameras, 0, 2);
        assert_eq!(s.len(), 2);
        assert!(!s.contains(&0));
        let all = select_sources(&scene.cameras, 2, 10);
        assert_eq!(all.len(), 4);
    }
}
