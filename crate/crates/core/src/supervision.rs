//! Ground-truth depth distributions and loss functionals.

use rayon::prelude::*;

use crate::cost::ProbabilityVolume;
use crate::error::{invalid_arg, MvsError, Result};
use crate::grid::DepthMap;
use crate::npdist::HypothesisSet;

/// Clamp applied to estimated probabilities before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Ground-truth distributions share the probability-volume layout.
pub type GroundTruthDistribution = ProbabilityVolume;

/// Compensated (Neumaier) sum; the result does not depend on the chunking
/// of a parallel reduction because the terms are summed in input order.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Histogram of full-resolution depths over each pixel's hypotheses.
///
/// Pixel `(x, y)` at level `l` collects the `2^l x 2^l` full-resolution
/// block starting at `(x 2^l, y 2^l)`. Each valid depth adds
/// `max(0, 1 - |d - d_m| / interval_m)` to sample `m`. Pixels whose total
/// weight is zero are invalid.
pub fn gt_histogram(gt: &DepthMap, level: usize, hyps: &HypothesisSet) -> Result<GroundTruthDistribution> {
    let step = 1usize << level;
    if (gt.width.div_ceil(step), gt.height.div_ceil(step)) != (hyps.width, hyps.height) {
        return Err(MvsError::ShapeMismatch(format!(
            "ground truth {}x{} at level {level} does not match hypotheses {}x{}",
            gt.width, gt.height, hyps.width, hyps.height
        )));
    }
    let m = hyps.samples;
    let rows: Vec<(Vec<f64>, bool)> = (0..hyps.pixel_count())
        .into_par_iter()
        .map(|p| {
            let (x0, y0) = ((p % hyps.width) * step, (p / hyps.width) * step);
            let depths = hyps.pixel_depths(p);
            let intervals = hyps.pixel_intervals(p);
            let mut hist = vec![0.0; m];
            for y in y0..(y0 + step).min(gt.height) {
                for x in x0..(x0 + step).min(gt.width) {
                    let d = gt.get(x, y);
                    if !d.is_finite() {
                        continue;
                    }
                    for ((h, &dm), &iv) in hist.iter_mut().zip(depths).zip(intervals) {
                        let wgt = 1.0 - (d - dm).abs() / iv;
                        if wgt > 0.0 {
                            *h += wgt;
                        }
                    }
                }
            }
            let total = neumaier_sum(hist.iter().copied());
            if total > 0.0 {
                hist.iter_mut().for_each(|h| *h /= total);
                (hist, true)
            } else {
                (vec![0.0; m], false)
            }
        })
        .collect();
    let mut out = ProbabilityVolume {
        width: hyps.width,
        height: hyps.height,
        samples: m,
        probs: Vec::with_capacity(hyps.pixel_count() * m),
        valid: Vec::with_capacity(hyps.pixel_count()),
    };
    for (row, ok) in rows {
        out.probs.extend(row);
        out.valid.push(ok);
    }
    Ok(out)
}

/// Binary cross entropy with the estimate clamped to `[eps, 1 - eps]`.
pub fn bce_term(p_est: f64, p_gt: f64) -> f64 {
    let p = p_est.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(p_gt * p.ln() + (1.0 - p_gt) * (1.0 - p).ln())
}

/// Fraction of positive ground-truth entries and the per-entry weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassBalance {
    pub sigma: f64,
    /// `1 - sigma` on positive entries, `sigma` on the rest, zero on
    /// invalid pixels.
    pub weights: Vec<f64>,
}

/// `sigma` counts positive entries over valid pixels only; it is zero when
/// no pixel is valid.
pub fn class_balance(gt: &GroundTruthDistribution) -> ClassBalance {
    let m = gt.samples;
    let valid = gt.valid.iter().filter(|&&v| v).count();
    let positive = gt
        .probs
        .chunks(m.max(1))
        .zip(&gt.valid)
        .filter(|(_, &v)| v)
        .map(|(px, _)| px.iter().filter(|&&g| g > 0.0).count())
        .sum::<usize>();
    let sigma = if valid == 0 {
        0.0
    } else {
        positive as f64 / (valid * m) as f64
    };
    let weights = gt
        .probs
        .iter()
        .enumerate()
        .map(|(i, &g)| match (gt.valid[i / m], g > 0.0) {
            (false, _) => 0.0,
            (true, true) => 1.0 - sigma,
            (true, false) => sigma,
        })
        .collect();
    ClassBalance { sigma, weights }
}

fn check_same_shape(est: &ProbabilityVolume, gt: &GroundTruthDistribution) -> Result<()> {
    if (est.width, est.height, est.samples) != (gt.width, gt.height, gt.samples) {
        return Err(MvsError::ShapeMismatch(format!(
            "estimate {}x{}x{} vs ground truth {}x{}x{}",
            est.width, est.height, est.samples, gt.width, gt.height, gt.samples
        )));
    }
    Ok(())
}

/// Class-balanced cross entropy summed over the ground truth's valid pixels.
pub fn level_loss(est: &ProbabilityVolume, gt: &GroundTruthDistribution) -> Result<f64> {
    check_same_shape(est, gt)?;
    let balance = class_balance(gt);
    let m = gt.samples;
    let per_pixel: Vec<f64> = (0..gt.valid.len())
        .into_par_iter()
        .map(|p| {
            if !gt.valid[p] {
                return 0.0;
            }
            neumaier_sum((p * m..(p + 1) * m).map(|i| balance.weights[i] * bce_term(est.probs[i], gt.probs[i])))
        })
        .collect();
    Ok(neumaier_sum(per_pixel))
}

/// `sum |gt - est|` over pixels where both are finite and `mask` allows.
pub fn l1_loss(est: &DepthMap, gt: &DepthMap, mask: Option<&[bool]>) -> Result<f64> {
    if (est.width, est.height) != (gt.width, gt.height) {
        return Err(MvsError::ShapeMismatch(format!(
            "estimate {}x{} vs ground truth {}x{}",
            est.width, est.height, gt.width, gt.height
        )));
    }
    if mask.is_some_and(|m| m.len() != gt.data.len()) {
        return Err(MvsError::ShapeMismatch("mask size".into()));
    }
    Ok(neumaier_sum(
        est.data
            .iter()
            .zip(&gt.data)
            .enumerate()
            .filter(|(i, (e, g))| e.is_finite() && g.is_finite() && mask.is_none_or(|m| m[*i]))
            .map(|(_, (e, g))| (g - e).abs()),
    ))
}

/// `sum_l w_l L_l`.
pub fn total_loss(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(invalid_arg(format!(
            "{} losses vs {} weights",
            losses.len(),
            weights.len()
        )));
    }
    Ok(neumaier_sum(losses.iter().zip(weights).map(|(l, w)| l * w)))
}
