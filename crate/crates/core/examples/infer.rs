//! Full coarse-to-fine inference on a synthetic scene in both modes, with
//! the per-region depth errors of the reference view.

use std::time::Instant;

use np_mvs::evaluation::{default_theta, laplacian_segmentation, region_depth_error};
use np_mvs::npdist::covering_ratio;
use np_mvs::pipeline::{run_inference, Mode, PipelineConfig, PreparedScene};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};

fn main() -> np_mvs::Result<()> {
    let scene = synth_scene(&SynthOptions::new(Preset::StepBox, 128, 5))?;
    let gt = &scene.bundle.gt_depths.as_ref().expect("ground truth")[0];
    let labels = laplacian_segmentation(gt, default_theta(gt, 1.0).expect("finite depths"))?;
    println!("region sizes R0..R4: {:?}", labels.counts());
    for mode in [Mode::Nonparametric, Mode::Unimodal] {
        let cfg = PipelineConfig { mode, ..Default::default() };
        let start = Instant::now();
        let prepared = PreparedScene::new(&scene.bundle, cfg.levels)?;
        let out = run_inference(&prepared, &cfg, 0)?;
        let errors = region_depth_error(&out.depth, gt, &labels)?;
        let cover: Vec<String> = out
            .levels
            .iter()
            .enumerate()
            .map(|(l, d)| {
                let r = covering_ratio(&d.hypotheses, &gt.decimate(l), None).ok().flatten();
                format!("l{l} {:.3}", r.unwrap_or(f64::NAN))
            })
            .collect();
        println!(
            "{mode:?} ({:.2?}, sources {:?}): region MAE {:?}",
            start.elapsed(),
            out.sources,
            errors.map(|e| e.map(|v| (v * 1e4).round() / 1e4))
        );
        println!("  covering ratio {}", cover.join(", "));
    }
    Ok(())
}
