//! Renders the three synthetic presets and writes one of them to disk.
//!
//! `cargo run --example synth_scene -- [OUT_DIR]`

use np_mvs::synth::{Preset, SynthOptions};
use np_mvs::workflow::synth_to_dir;

fn main() -> np_mvs::Result<()> {
    let out = std::env::args().nth(1);
    let tmp = tempfile::tempdir()?;
    for preset in [Preset::TwoPlane, Preset::StepBox, Preset::Sphere] {
        let opts = SynthOptions::new(preset, 96, 4);
        let dir = match (&out, preset) {
            (Some(o), Preset::TwoPlane) => std::path::PathBuf::from(o),
            _ => tmp.path().join(format!("{preset:?}")),
        };
        let scene = synth_to_dir(&opts, &dir)?;
        let gt = &scene.bundle.gt_depths.as_ref().expect("synthetic scenes carry depth")[0];
        let (lo, hi) = gt.finite_range().unwrap_or((f64::NAN, f64::NAN));
        let share = |mask: &[bool]| mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64;
        println!(
            "{preset:?}: {} views, depth {lo:.2}..{hi:.2}, non-occluded {:.1}%, boundary {:.1}% -> {}",
            scene.bundle.view_count(),
            100.0 * share(&scene.non_occluded[0]),
            100.0 * share(&scene.boundary[0]),
            dir.display()
        );
    }
    Ok(())
}
