//! Laplacian region labels of a ground-truth depth map, drawn as ASCII,
//! and the per-region error of a biased estimate.

use np_mvs::evaluation::{default_theta, laplacian_segmentation, region_depth_error};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};

fn main() -> np_mvs::Result<()> {
    let scene = synth_scene(&SynthOptions::new(Preset::Sphere, 64, 2))?;
    let gt = &scene.bundle.gt_depths.as_ref().expect("ground truth")[0];
    for pct in [0.5, 1.0, 2.0] {
        let theta = default_theta(gt, pct).expect("finite depths");
        let labels = laplacian_segmentation(gt, theta)?;
        println!("theta {pct}% ({theta:.4}): region sizes {:?}", labels.counts());
    }
    let labels = laplacian_segmentation(gt, default_theta(gt, 1.0).expect("finite depths"))?;
    for y in (0..gt.height).step_by(4) {
        let row: String = (0..gt.width)
            .step_by(2)
            .map(|x| labels.get(x, y).map_or('.', |r| char::from(b'0' + r)))
            .collect();
        println!("{row}");
    }
    let mut est = gt.clone();
    est.data.iter_mut().for_each(|d| *d += 0.01);
    println!("uniform +0.01 bias: {:?}", region_depth_error(&est, gt, &labels)?);
    Ok(())
}
