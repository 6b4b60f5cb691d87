//! Ground-truth distributions and the class-balanced loss for every level
//! of one inference.

use np_mvs::pipeline::{run_inference, PipelineConfig, PreparedScene};
use np_mvs::supervision::{class_balance, gt_histogram, l1_loss, level_loss, total_loss};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};

fn main() -> np_mvs::Result<()> {
    let scene = synth_scene(&SynthOptions::new(Preset::Sphere, 64, 3))?;
    let cfg = PipelineConfig { views: 3, ..PipelineConfig::training() };
    let prepared = PreparedScene::new(&scene.bundle, cfg.levels)?;
    let out = run_inference(&prepared, &cfg, 0)?;
    let gt = &scene.bundle.gt_depths.as_ref().expect("ground truth")[0];

    let mut terms = Vec::new();
    for (level, dist) in out.levels.iter().enumerate() {
        let target = gt_histogram(gt, level, &dist.hypotheses)?;
        let balance = class_balance(&target);
        let loss = level_loss(&dist.probabilities, &target)?;
        let valid = target.valid.iter().filter(|&&v| v).count();
        println!(
            "level {level}: {} samples, {valid} supervised pixels, sigma {:.4}, loss {loss:.2} ({:.4} per pixel)",
            dist.hypotheses.samples,
            balance.sigma,
            loss / valid.max(1) as f64
        );
        terms.push(loss);
    }
    println!("weighted total {:.2}", total_loss(&terms, &cfg.loss_weights)?);
    println!("l1 depth term {:.2}", l1_loss(&out.depth, gt, None)?);
    Ok(())
}
