//! Fuses ground-truth and estimated depth maps into point clouds and scores
//! the estimate with accuracy and completeness.

use np_mvs::evaluation::{accuracy_completeness, fuse_depth_maps, FusionParams, FusionView};
use np_mvs::pipeline::{run_all, PipelineConfig};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};
use np_mvs::DepthMap;

fn views<'a>(depths: &'a [DepthMap], scene: &'a np_mvs::scene::SceneBundle) -> Vec<FusionView<'a>> {
    depths
        .iter()
        .zip(&scene.cameras)
        .zip(&scene.images)
        .map(|((depth, camera), image)| FusionView { depth, camera, image: Some(image) })
        .collect()
}

fn main() -> np_mvs::Result<()> {
    let scene = synth_scene(&SynthOptions::new(Preset::TwoPlane, 96, 5))?.bundle;
    let cfg = PipelineConfig::default();
    let estimated: Vec<DepthMap> = run_all(&scene, &cfg)?.into_iter().map(|o| o.depth).collect();
    let gt = scene.gt_depths.as_deref().expect("ground truth");

    let gt_cloud = fuse_depth_maps(&views(gt, &scene), FusionParams { n_min: 1, ..Default::default() })?;
    println!("ground-truth cloud: {} points", gt_cloud.len());
    for n_min in [1, 2, 3] {
        for tau_depth in [0.005, 0.01, 0.02] {
            let params = FusionParams { n_min, tau_depth, ..Default::default() };
            let cloud = fuse_depth_maps(&views(&estimated, &scene), params)?;
            let m = accuracy_completeness(&cloud, &gt_cloud, cfg.d_cap * 5.0)?;
            println!(
                "n_min {n_min} tau {tau_depth:<5}: {:>6} points, acc {:.4} comp {:.4} overall {:.4}",
                cloud.len(),
                m.accuracy.unwrap_or(f64::NAN),
                m.completeness.unwrap_or(f64::NAN),
                m.overall.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
