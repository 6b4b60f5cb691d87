//! Directory-level workflows behind the `np-mvs` subcommands.
//!
//! Inference output mirrors the scene layout so it can be fed back into
//! `fuse`, `eval` and `losses`:
//!
//! ```text
//! out/images/00000000.png      copied inputs
//! out/cams/00000000_cam.txt
//! out/depths/00000000.pfm      estimated depth
//! out/volumes/00000000_l0.npdv per-level distributions
//! out/config.json
//! out/sources.json             source views used for each reference
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{invalid_arg, MvsError, Result};
use crate::evaluation::{
    default_theta, fuse_depth_maps, laplacian_segmentation, FusionParams, FusionView, REGION_COUNT,
};
use crate::grid::{DepthMap, Image};
use crate::io::{atomic_write, load_scene, read_image, read_pfm, read_volume, save_scene, write_image, write_ply, write_volume, ScenePaths};
use crate::pipeline::{run_all, InferenceOutput, PipelineConfig};
use crate::scene::SceneBundle;
use crate::supervision::{class_balance, gt_histogram, l1_loss, level_loss, neumaier_sum, total_loss};
use crate::synth::{synth_scene, SynthOptions, SyntheticScene};

pub fn volume_path(root: &Path, view: usize, level: usize) -> PathBuf {
    root.join("volumes").join(format!("{view:08}_l{level}.npdv"))
}

pub fn mask_path(root: &Path, view: usize, name: &str) -> PathBuf {
    root.join("masks").join(format!("{view:08}_{name}.png"))
}

fn mask_image(width: usize, height: usize, mask: &[bool]) -> Image {
    Image::from_fn(width, height, |x, y| if mask[y * width + x] { 1.0 } else { 0.0 })
}

/// Renders a preset into a scene directory, with its analytic masks under
/// `masks/`.
pub fn synth_to_dir(opts: &SynthOptions, out: &Path) -> Result<SyntheticScene> {
    let scene = synth_scene(opts)?;
    save_scene(out, &scene.bundle)?;
    let (w, h) = (scene.bundle.width(), scene.bundle.height());
    for v in 0..scene.bundle.view_count() {
        write_image(&mask_path(out, v, "nonoccluded"), &mask_image(w, h, &scene.non_occluded[v]))?;
        write_image(&mask_path(out, v, "boundary"), &mask_image(w, h, &scene.boundary[v]))?;
    }
    Ok(scene)
}

/// Reads a mask written by [`synth_to_dir`].
pub fn read_mask(root: &Path, view: usize, name: &str) -> Result<Vec<bool>> {
    Ok(read_image(&mask_path(root, view, name))?.data.iter().map(|&v| v > 0.5).collect())
}

#[derive(Serialize)]
struct SourcesEntry {
    reference: usize,
    sources: Vec<usize>,
}

/// Runs inference on every view of `scene_dir` and writes the results.
pub fn infer_dir(scene_dir: &Path, out: &Path, cfg: &PipelineConfig) -> Result<Vec<InferenceOutput>> {
    let scene = load_scene(scene_dir)?;
    let outputs = run_all(&scene, cfg)?;
    let estimated = SceneBundle::new(
        scene.images.clone(),
        scene.cameras.clone(),
        Some(outputs.iter().map(|o| o.depth.clone()).collect()),
        scene.depth_range,
    )?;
    save_scene(out, &estimated)?;
    for o in &outputs {
        for (level, dist) in o.levels.iter().enumerate() {
            write_volume(&volume_path(out, o.reference, level), dist)?;
        }
    }
    atomic_write(&out.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    let sources: Vec<SourcesEntry> = outputs
        .iter()
        .map(|o| SourcesEntry {
            reference: o.reference,
            sources: o.sources.clone(),
        })
        .collect();
    atomic_write(&out.join("sources.json"), serde_json::to_string(&sources)?.as_bytes())?;
    Ok(outputs)
}

/// Loads the depth maps of every view under `root/depths`.
fn read_depths(root: &Path) -> Result<Vec<DepthMap>> {
    let paths = ScenePaths::new(root);
    let mut maps = Vec::new();
    while paths.depth(maps.len()).is_file() {
        maps.push(read_pfm(&paths.depth(maps.len()))?);
    }
    if maps.is_empty() {
        return Err(MvsError::MissingFile {
            what: "depth map",
            view: 0,
            path: paths.depth(0),
        });
    }
    Ok(maps)
}

fn paired_depths(est: &Path, gt: &Path) -> Result<(Vec<DepthMap>, Vec<DepthMap>)> {
    let e = read_depths(est)?;
    let g = read_depths(gt)?;
    if e.len() != g.len() {
        return Err(MvsError::ShapeMismatch(format!("{} estimated vs {} ground-truth depth maps", e.len(), g.len())));
    }
    Ok((e, g))
}

/// Mean absolute depth error per region, pooled over every view.
/// `theta_pct` sets each view's band threshold as a percentage of its
/// ground-truth depth range.
pub fn eval_dirs(est: &Path, gt: &Path, theta_pct: f64) -> Result<[Option<f64>; REGION_COUNT]> {
    let (est, gt) = paired_depths(est, gt)?;
    let mut sums = [0.0; REGION_COUNT];
    let mut counts = [0usize; REGION_COUNT];
    for (e, g) in est.iter().zip(&gt) {
        if (e.width, e.height) != (g.width, g.height) {
            return Err(MvsError::ShapeMismatch("estimate and ground truth differ in size".into()));
        }
        let theta = default_theta(g, theta_pct).ok_or_else(|| invalid_arg("ground truth has no valid pixel"))?;
        let labels = laplacian_segmentation(g, theta)?;
        for ((ev, gv), l) in e.data.iter().zip(&g.data).zip(&labels.labels) {
            if let Some(l) = l {
                if ev.is_finite() && gv.is_finite() {
                    sums[*l as usize] += (ev - gv).abs();
                    counts[*l as usize] += 1;
                }
            }
        }
    }
    Ok(std::array::from_fn(|r| (counts[r] > 0).then(|| sums[r] / counts[r] as f64)))
}

/// Fuses the depth maps of a scene directory into a PLY point cloud and
/// returns the number of points.
pub fn fuse_dir(input: &Path, out: &Path, params: FusionParams) -> Result<usize> {
    let scene = load_scene(input)?;
    let depths = scene
        .gt_depths
        .as_ref()
        .ok_or_else(|| invalid_arg(format!("{} has no depths/ directory", input.display())))?;
    let views: Vec<FusionView<'_>> = depths
        .iter()
        .zip(&scene.cameras)
        .zip(&scene.images)
        .map(|((depth, camera), image)| FusionView {
            depth,
            camera,
            image: Some(image),
        })
        .collect();
    let cloud = fuse_depth_maps(&views, params)?;
    write_ply(out, &cloud)?;
    Ok(cloud.len())
}

/// Loss terms of one level of one reference view.
#[derive(Clone, Debug, Serialize)]
pub struct LevelLosses {
    pub view: usize,
    pub level: usize,
    /// Class-balanced cross entropy.
    pub bce: f64,
    /// Share of positive ground-truth entries.
    pub sigma: f64,
    /// Pixels with a ground-truth distribution.
    pub valid_pixels: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViewLosses {
    pub levels: Vec<LevelLosses>,
    /// `sum |gt - est|` of the full-resolution depth.
    pub l1: f64,
    /// Weighted sum of the level terms.
    pub total: f64,
}

/// Recomputes the supervision terms from stored distributions.
pub fn losses_dirs(est: &Path, gt: &Path) -> Result<Vec<ViewLosses>> {
    let (est_depths, gt_depths) = paired_depths(est, gt)?;
    let cfg: PipelineConfig = match std::fs::read_to_string(est.join("config.json")) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => PipelineConfig::default(),
    };
    cfg.validate()?;
    let mut out = Vec::new();
    for (view, (e, g)) in est_depths.iter().zip(&gt_depths).enumerate() {
        let mut levels = Vec::new();
        for level in 0..cfg.levels {
            let dist = read_volume(&volume_path(est, view, level))?;
            let gt_dist = gt_histogram(g, level, &dist.hypotheses)?;
            levels.push(LevelLosses {
                view,
                level,
                bce: level_loss(&dist.probabilities, &gt_dist)?,
                sigma: class_balance(&gt_dist).sigma,
                valid_pixels: gt_dist.valid.iter().filter(|&&v| v).count(),
            });
        }
        let terms: Vec<f64> = levels.iter().map(|l| l.bce).collect();
        out.push(ViewLosses {
            total: total_loss(&terms, &cfg.loss_weights)?,
            l1: l1_loss(e, g, None)?,
            levels,
        });
    }
    Ok(out)
}

/// Sum over views of the weighted totals.
pub fn scene_loss(losses: &[ViewLosses]) -> f64 {
    neumaier_sum(losses.iter().map(|l| l.total))
}

/// Formats region errors as five space-separated numbers, `nan` for empty
/// regions.
pub fn format_regions(errors: &[Option<f64>; REGION_COUNT]) -> String {
    errors
        .iter()
        .map(|e| e.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}")))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Preset;

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene_dir = dir.path().join("scene");
        let out = dir.path().join("out");
        let opts = SynthOptions::new(Preset::TwoPlane, 32, 3);
        let synth = synth_to_dir(&opts, &scene_dir).unwrap();
        assert_eq!(read_mask(&scene_dir, 1, "boundary").unwrap(), synth.boundary[1]);

        let cfg = PipelineConfig {
            levels: 3,
            hyps: vec![8, 16, 32],
            loss_weights: vec![1.0; 3],
            views: 3,
            ..Default::default()
        };
        let outputs = infer_dir(&scene_dir, &out, &cfg).unwrap();
        assert_eq!(outputs.len(), 3);
        let stored = read_pfm(&ScenePaths::new(&out).depth(2)).unwrap();
        let bits = |m: &DepthMap| m.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&stored), bits(&outputs[2].depth));

        let regions = eval_dirs(&out, &scene_dir, 1.0).unwrap();
        assert!(regions.iter().flatten().all(|e| e.is_finite() && *e >= 0.0));
        assert_eq!(format_regions(&regions).split(' ').count(), 5);
        let self_eval = eval_dirs(&scene_dir, &scene_dir, 1.0).unwrap();
        assert!(self_eval.iter().flatten().all(|&e| e == 0.0));

        let losses = losses_dirs(&out, &scene_dir).unwrap();
        assert_eq!(losses.len(), 3);
        assert!(losses.iter().all(|l| l.levels.len() == 3 && l.total.is_finite() && l.total >= 0.0));

        let n = fuse_dir(&scene_dir, &dir.path().join("gt.ply"), FusionParams { n_min: 1, ..Default::default() }).unwrap();
        assert!(n > 32 * 32 / 2);
    }

    #[test]
    fn missing_depths_reported() {
        let dir = tempfile::tempdir().unwrap();
        match eval_dirs(dir.path(), dir.path(), 1.0) {
            Err(MvsError::MissingFile { view: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
