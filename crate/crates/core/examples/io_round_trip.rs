//! Writes and re-reads every on-disk format: scene directories with cam.txt
//! and PFM depth maps, per-level distribution volumes, and PLY clouds.

use np_mvs::evaluation::{fuse_depth_maps, FusionParams, FusionView};
use np_mvs::io::{format_cam, load_scene, read_ply, read_volume, save_scene, write_ply, write_volume, CamFile, LevelDistribution};
use np_mvs::pipeline::{run_inference, PipelineConfig, PreparedScene};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};

fn main() -> np_mvs::Result<()> {
    let tmp = tempfile::tempdir()?;
    let scene = synth_scene(&SynthOptions::new(Preset::StepBox, 48, 3))?.bundle;
    save_scene(tmp.path(), &scene)?;
    let loaded = load_scene(tmp.path())?;
    println!("scene round trip: {} views, range {:?}", loaded.view_count(), loaded.depth_range);
    let range = &scene.depth_range;
    print!("{}", format_cam(&CamFile::from_camera(&scene.cameras[1], range.min(), range.max())));

    let cfg = PipelineConfig { levels: 3, hyps: vec![8, 16, 32], loss_weights: vec![1.0; 3], views: 3, ..Default::default() };
    let out = run_inference(&PreparedScene::new(&scene, cfg.levels)?, &cfg, 0)?;
    let path = tmp.path().join("level1.npdv");
    write_volume(&path, &out.levels[1])?;
    let back: LevelDistribution = read_volume(&path)?;
    println!("volume round trip exact: {}", back == out.levels[1]);

    let gt = scene.gt_depths.as_ref().expect("ground truth");
    let views: Vec<FusionView<'_>> = gt
        .iter()
        .zip(&scene.cameras)
        .zip(&scene.images)
        .map(|((depth, camera), image)| FusionView { depth, camera, image: Some(image) })
        .collect();
    let cloud = fuse_depth_maps(&views, FusionParams { n_min: 1, ..Default::default() })?;
    let ply = tmp.path().join("cloud.ply");
    write_ply(&ply, &cloud)?;
    let again = read_ply(&ply)?;
    println!("ply round trip: {} points written, {} read", cloud.len(), again.len());
    Ok(())
}
