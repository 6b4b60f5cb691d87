//! Top-K branching against the unimodal window on a bimodal pixel.
//!
//! The unimodal window centers on the expectation and lands between the
//! modes. Keeping the two best samples and subdividing them keeps both.

use np_mvs::npdist::{expectation, subdivide, topk_select, unimodal_baseline_samples, Sample};

fn main() -> np_mvs::Result<()> {
    let samples: Vec<Sample> = [8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0]
        .iter()
        .enumerate()
        .map(|(i, &depth)| Sample { depth, interval: 2.0, bin: i as i64 })
        .collect();
    let probs = [0.02, 0.40, 0.05, 0.02, 0.02, 0.05, 0.40, 0.04];
    let depths: Vec<f64> = samples.iter().map(|s| s.depth).collect();
    println!("expectation {:.2}", expectation(&depths, &probs)?);

    let window = unimodal_baseline_samples(&probs, &samples, 4)?;
    println!("unimodal next samples {:?}", window.iter().map(|s| s.depth).collect::<Vec<_>>());

    let picked = topk_select(&probs, 2)?;
    let parents: Vec<f64> = picked.iter().map(|&i| depths[i]).collect();
    let (children, interval) = subdivide(&parents, 2.0)?;
    println!("top-2 parents {parents:?} -> children {children:?}, interval {interval}");
    for mode in [10.0, 20.0] {
        let covered = |set: &[f64], half: f64| set.iter().any(|d| (d - mode).abs() <= half);
        let uni: Vec<f64> = window.iter().map(|s| s.depth).collect();
        println!(
            "mode {mode}: unimodal covers {}, top-k covers {}",
            covered(&uni, window[0].interval / 2.0),
            covered(&children, interval / 2.0)
        );
    }
    Ok(())
}
