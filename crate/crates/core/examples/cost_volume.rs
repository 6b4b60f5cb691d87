//! Dense plane sweep at the coarsest pyramid level of a synthetic scene.
//!
//! Builds per-source group-wise correlation volumes, fuses them with
//! visibility weights, regularizes, and compares the per-pixel argmax
//! against the ground truth.

use np_mvs::cost::{aggregate_views, build_view_cost, regularize_dense, Regularization, ViewLevel};
use np_mvs::geometry::sample_inverse_depth;
use np_mvs::pipeline::{select_sources, PreparedScene};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};

fn main() -> np_mvs::Result<()> {
    let scene = synth_scene(&SynthOptions::new(Preset::TwoPlane, 128, 5))?;
    let bundle = &scene.bundle;
    let level = 3;
    let prepared = PreparedScene::new(bundle, level + 1)?;
    let planes = sample_inverse_depth(&bundle.depth_range, 96)?;
    let view = |v: usize| ViewLevel {
        features: prepared.pyramids[v].level(level),
        camera: &prepared.cameras[v][level],
    };

    let sources = select_sources(&bundle.cameras, 0, 4);
    let volumes = sources
        .iter()
        .map(|&s| build_view_cost(view(0), view(s), &planes.depths, 4))
        .collect::<np_mvs::Result<Vec<_>>>()?;
    let fused = aggregate_views(&volumes)?;
    let probs = regularize_dense(&fused, Regularization::default())?;

    let gt = bundle.gt_depths.as_ref().expect("ground truth")[0].decimate(level);
    let mut off_by = [0usize; 4];
    for p in 0..fused.width * fused.height {
        if !probs.valid[p] {
            continue;
        }
        let pr = probs.pixel(p);
        let best = (0..pr.len()).max_by(|&a, &b| pr[a].total_cmp(&pr[b])).unwrap();
        let truth = (0..planes.depths.len())
            .min_by(|&a, &b| (planes.depths[a] - gt.data[p]).abs().total_cmp(&(planes.depths[b] - gt.data[p]).abs()))
            .unwrap();
        off_by[best.abs_diff(truth).min(3)] += 1;
    }
    println!("{}x{} pixels, {} planes, sources {sources:?}", fused.width, fused.height, planes.depths.len());
    println!("argmax plane offset from truth: 0 -> {}, 1 -> {}, 2 -> {}, 3+ -> {}", off_by[0], off_by[1], off_by[2], off_by[3]);
    Ok(())
}
