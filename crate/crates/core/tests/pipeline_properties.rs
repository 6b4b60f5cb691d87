use proptest::prelude::*;

use np_mvs::pipeline::{run_inference, Mode, PipelineConfig, PreparedScene};
use np_mvs::synth::{synth_scene, Preset, SynthOptions};

fn small_config(mode: Mode) -> PipelineConfig {
    PipelineConfig {
        levels: 3,
        hyps: vec![8, 16, 32],
        loss_weights: vec![1.0; 3],
        views: 3,
        mode,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn depth_stays_in_range_and_is_reproducible(
        seed in 0u64..1000,
        preset in prop_oneof![Just(Preset::TwoPlane), Just(Preset::StepBox), Just(Preset::Sphere)],
        unimodal in any::<bool>(),
        reference in 0usize..3,
    ) {
        let opts = SynthOptions { seed, noise: 0.01, ..SynthOptions::new(preset, 32, 3) };
        let scene = synth_scene(&opts).unwrap().bundle;
        let cfg = small_config(if unimodal { Mode::Unimodal } else { Mode::Nonparametric });
        let prepared = PreparedScene::new(&scene, cfg.levels).unwrap();
        let a = run_inference(&prepared, &cfg, reference).unwrap();
        let b = run_inference(&prepared, &cfg, reference).unwrap();
        let bits = |d: &np_mvs::DepthMap| d.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.depth), bits(&b.depth));
        let range = scene.depth_range;
        for &d in a.depth.data.iter().filter(|d| d.is_finite()) {
            prop_assert!(range.contains(d), "{} outside range", d);
        }
        for level in &a.levels {
            level.hypotheses.validate().unwrap();
            for p in 0..level.hypotheses.pixel_count() {
                if level.probabilities.valid[p] {
                    let s: f64 = level.probabilities.pixel(p).iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn topk_children_nest_inside_parents() {
    let scene = synth_scene(&SynthOptions::new(Preset::StepBox, 32, 3)).unwrap().bundle;
    let cfg = small_config(Mode::Nonparametric);
    let prepared = PreparedScene::new(&scene, cfg.levels).unwrap();
    let out = run_inference(&prepared, &cfg, 0).unwrap();
    for l in 0..cfg.levels - 1 {
        let (fine, coarse) = (&out.levels[l].hypotheses, &out.levels[l + 1].hypotheses);
        for p in 0..fine.pixel_count() {
            let (x, y) = (p % fine.width, p / fine.width);
            let q = (y / 2) * coarse.width + x / 2;
            let parents = coarse.pixel_samples(q);
            for child in fine.pixel_samples(p) {
                let parent = parents.iter().find(|s| s.bin == child.bin.div_euclid(2));
                let parent = parent.expect("child bin has a parent");
                assert_eq!(child.interval, parent.interval / 2.0);
                assert!((child.depth - parent.depth).abs() - parent.interval / 4.0 <= 1e-12 * parent.depth);
            }
        }
    }
}
