//! Per-pixel non-parametric depth distributions and hypothesis propagation.
//!
//! A coarse pixel keeps its `K` most probable samples, each split into two
//! children a quarter interval either side with the interval halved. The
//! children are shared by the 2x2 block of finer pixels under it. The
//! unimodal alternative collapses each distribution to its expectation and
//! searches a uniform window around it instead.
//!
//! Every sample also carries an integer depth bin. Coarsest-level samples
//! use their plane index; the two children of bin `b` get bins `2b` and
//! `2b + 1`. Neighboring pixels therefore share one depth lattice per level
//! regardless of how the planes were spaced metrically.

use crate::cost::ProbabilityVolume;
use crate::error::{invalid_arg, MvsError, Result};
use crate::geometry::DepthSamples;
use crate::grid::DepthMap;

const PROB_SUM_TOLERANCE: f64 = 1e-6;
const MERGE_RELATIVE_TOLERANCE: f64 = 1e-12;

/// One depth hypothesis: depth, search interval and lattice bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub depth: f64,
    pub interval: f64,
    pub bin: i64,
}

/// Per-pixel depth samples at one pyramid level.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSet {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    /// Samples per pixel.
    pub samples: usize,
    /// `height x width x samples`, ascending per pixel.
    pub depths: Vec<f64>,
    pub intervals: Vec<f64>,
    pub bins: Vec<i64>,
}

impl HypothesisSet {
    /// Every pixel shares the given global planes; bins are plane indices.
    pub fn shared_planes(level: usize, width: usize, height: usize, planes: &DepthSamples) -> Self {
        let m = planes.depths.len();
        let n = width * height;
        let bins: Vec<i64> = (0..m as i64).collect();
        Self {
            level,
            width,
            height,
            samples: m,
            depths: planes.depths.repeat(n),
            intervals: planes.intervals.repeat(n),
            bins: bins.repeat(n),
        }
    }

    pub fn from_pixels(level: usize, width: usize, height: usize, pixels: &[Vec<Sample>]) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(MvsError::ShapeMismatch(format!(
                "{} pixel sample lists for a {width}x{height} grid",
                pixels.len()
            )));
        }
        let samples = pixels.first().map_or(0, Vec::len);
        if samples == 0 || pixels.iter().any(|p| p.len() != samples) {
            return Err(invalid_arg("every pixel needs the same non-zero sample count"));
        }
        let mut set = Self {
            level,
            width,
            height,
            samples,
            depths: Vec::with_capacity(pixels.len() * samples),
            intervals: Vec::with_capacity(pixels.len() * samples),
            bins: Vec::with_capacity(pixels.len() * samples),
        };
        for s in pixels.iter().flatten() {
            set.depths.push(s.depth);
            set.intervals.push(s.interval);
            set.bins.push(s.bin);
        }
        Ok(set)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn pixel_depths(&self, p: usize) -> &[f64] {
        &self.depths[p * self.samples..(p + 1) * self.samples]
    }

    #[inline]
    pub fn pixel_intervals(&self, p: usize) -> &[f64] {
        &self.intervals[p * self.samples..(p + 1) * self.samples]
    }

    pub fn pixel_samples(&self, p: usize) -> Vec<Sample> {
        let r = p * self.samples..(p + 1) * self.samples;
        self.depths[r.clone()]
            .iter()
            .zip(&self.intervals[r.clone()])
            .zip(&self.bins[r])
            .map(|((&depth, &interval), &bin)| Sample {
                depth,
                interval,
                bin,
            })
            .collect()
    }

    /// Checks ascending depths, positive intervals and distinct bins.
    pub fn validate(&self) -> Result<()> {
        let n = self.pixel_count() * self.samples;
        if self.depths.len() != n || self.intervals.len() != n || self.bins.len() != n {
            return Err(MvsError::ShapeMismatch("hypothesis arrays disagree with dims".into()));
        }
        for p in 0..self.pixel_count() {
            let d = self.pixel_depths(p);
            if !d.windows(2).all(|w| w[1] > w[0]) || !d.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return Err(invalid_arg(format!("pixel {p}: depths not strictly increasing")));
            }
            if !self.pixel_intervals(p).iter().all(|&i| i > 0.0) {
                return Err(invalid_arg(format!("pixel {p}: non-positive interval")));
            }
            let b = &self.bins[p * self.samples..(p + 1) * self.samples];
            if !b.windows(2).all(|w| w[1] > w[0]) {
                return Err(invalid_arg(format!("pixel {p}: depth bins not increasing")));
            }
        }
        Ok(())
    }
}

/// Indices of the `k` largest probabilities, ascending by index.
///
/// Ties go to the smaller index (the nearer depth).
pub fn topk_select(probs: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > probs.len() {
        return Err(invalid_arg(format!(
            "top-k needs 1 <= k <= {}, got {k}",
            probs.len()
        )));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

fn merge_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|b, a| (*b - *a).abs() <= MERGE_RELATIVE_TOLERANCE * a.abs().max(b.abs()));
    values
}

/// Splits each selected depth into `d - interval/4` and `d + interval/4`.
///
/// Returns the sorted children and the halved interval.
pub fn subdivide(selected: &[f64], interval: f64) -> Result<(Vec<f64>, f64)> {
    if !(interval > 0.0) {
        return Err(invalid_arg("interval must be positive"));
    }
    let quarter = interval / 4.0;
    let children = merge_sorted(
        selected
            .iter()
            .flat_map(|&d| [d - quarter, d + quarter])
            .collect(),
    );
    if children.len() != 2 * selected.len() {
        return Err(invalid_arg(format!(
            "{} parents produced only {} distinct children",
            selected.len(),
            children.len()
        )));
    }
    Ok((children, interval / 2.0))
}

/// Per-sample subdivision: children carry half their parent's interval and
/// bins `2b`, `2b + 1`.
pub fn subdivide_samples(selected: &[Sample]) -> Result<Vec<Sample>> {
    let mut children: Vec<Sample> = Vec::with_capacity(2 * selected.len());
    for s in selected {
        if !(s.interval > 0.0) {
            return Err(invalid_arg("interval must be positive"));
        }
        let quarter = s.interval / 4.0;
        let half = s.interval / 2.0;
        children.push(Sample {
            depth: s.depth - quarter,
            interval: half,
            bin: 2 * s.bin,
        });
        children.push(Sample {
            depth: s.depth + quarter,
            interval: half,
            bin: 2 * s.bin + 1,
        });
    }
    children.sort_by(|a, b| a.depth.total_cmp(&b.depth));
    let before = children.len();
    children.dedup_by(|b, a| {
        (b.depth - a.depth).abs() <= MERGE_RELATIVE_TOLERANCE * a.depth.abs().max(b.depth.abs())
    });
    if children.len() != before {
        return Err(invalid_arg("subdivision produced coincident children"));
    }
    Ok(children)
}

/// Deterministic fallback for pixels without a distribution: `k` indices
/// spread evenly over `m` samples.
fn spread_indices(m: usize, k: usize) -> Vec<usize> {
    (0..k).map(|j| ((2 * j + 1) * m) / (2 * k)).collect()
}

/// Top-`k` branching on every pixel. The result holds the children on the
/// coarse grid; [`upsample_hypotheses`] spreads them to the finer level.
pub fn branch_topk(hyps: &HypothesisSet, probs: &ProbabilityVolume, k: usize) -> Result<HypothesisSet> {
    check_probs_shape(hyps, probs)?;
    let pixels = (0..hyps.pixel_count())
        .map(|p| {
            let samples = hyps.pixel_samples(p);
            let picked = if probs.valid[p] {
                topk_select(probs.pixel(p), k)?
            } else {
                if k == 0 || k > samples.len() {
                    return Err(invalid_arg(format!("top-k needs 1 <= k <= {}", samples.len())));
                }
                spread_indices(samples.len(), k)
            };
            let chosen: Vec<Sample> = picked.into_iter().map(|i| samples[i]).collect();
            subdivide_samples(&chosen)
        })
        .collect::<Result<Vec<_>>>()?;
    HypothesisSet::from_pixels(hyps.level.saturating_sub(1), hyps.width, hyps.height, &pixels)
}

fn check_probs_shape(hyps: &HypothesisSet, probs: &ProbabilityVolume) -> Result<()> {
    if (probs.width, probs.height, probs.samples) != (hyps.width, hyps.height, hyps.samples) {
        return Err(MvsError::ShapeMismatch(format!(
            "probabilities {}x{}x{} vs hypotheses {}x{}x{}",
            probs.width, probs.height, probs.samples, hyps.width, hyps.height, hyps.samples
        )));
    }
    Ok(())
}

/// Gives every fine pixel the samples of the coarse pixel covering it.
///
/// Fine pixel `(x, y)` reads coarse pixel `(x/2, y/2)`; when the fine size
/// is odd the last row/column replicates the nearest coarse pixel.
pub fn upsample_hypotheses(coarse: &HypothesisSet, fine_width: usize, fine_height: usize) -> Result<HypothesisSet> {
    let ok = |fine: usize, c: usize| fine <= 2 * c && fine + 1 >= 2 * c;
    if !ok(fine_width, coarse.width) || !ok(fine_height, coarse.height) {
        return Err(MvsError::ShapeMismatch(format!(
            "cannot upsample {}x{} to {fine_width}x{fine_height}",
            coarse.width, coarse.height
        )));
    }
    let m = coarse.samples;
    let n = fine_width * fine_height;
    let mut out = HypothesisSet {
        level: coarse.level,
        width: fine_width,
        height: fine_height,
        samples: m,
        depths: Vec::with_capacity(n * m),
        intervals: Vec::with_capacity(n * m),
        bins: Vec::with_capacity(n * m),
    };
    for y in 0..fine_height {
        let cy = (y / 2).min(coarse.height - 1);
        for x in 0..fine_width {
            let cx = (x / 2).min(coarse.width - 1);
            let r = (cy * coarse.width + cx) * m..(cy * coarse.width + cx + 1) * m;
            out.depths.extend_from_slice(&coarse.depths[r.clone()]);
            out.intervals.extend_from_slice(&coarse.intervals[r.clone()]);
            out.bins.extend_from_slice(&coarse.bins[r]);
        }
    }
    Ok(out)
}

/// Expected depth `sum_m d_m P(d_m)`.
pub fn expectation(samples: &[f64], probs: &[f64]) -> Result<f64> {
    if samples.len() != probs.len() || samples.is_empty() {
        return Err(MvsError::ShapeMismatch(format!(
            "{} samples vs {} probabilities",
            samples.len(),
            probs.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOLERANCE || probs.iter().any(|&p| !(p >= 0.0)) {
        return Err(MvsError::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(samples.iter().zip(probs).map(|(d, p)| d * p).sum())
}

/// Fraction of pixels with a finite ground truth that some sample covers,
/// i.e. `|d_m - d_gt| <= interval_m / 2`. `mask` restricts the pixels
/// considered. Returns `None` when no pixel qualifies.
pub fn covering_ratio(hyps: &HypothesisSet, gt: &DepthMap, mask: Option<&[bool]>) -> Result<Option<f64>> {
    if (gt.width, gt.height) != (hyps.width, hyps.height) {
        return Err(MvsError::ShapeMismatch(format!(
            "ground truth {}x{} vs hypotheses {}x{}",
            gt.width, gt.height, hyps.width, hyps.height
        )));
    }
    if mask.is_some_and(|m| m.len() != hyps.pixel_count()) {
        return Err(MvsError::ShapeMismatch("mask size".into()));
    }
    let mut total = 0usize;
    let mut covered = 0usize;
    for p in 0..hyps.pixel_count() {
        let g = gt.data[p];
        if !g.is_finite() || mask.is_some_and(|m| !m[p]) {
            continue;
        }
        total += 1;
        let hit = hyps
            .pixel_depths(p)
            .iter()
            .zip(hyps.pixel_intervals(p))
            .any(|(d, i)| (d - g).abs() <= i / 2.0);
        covered += usize::from(hit);
    }
    Ok((total > 0).then(|| covered as f64 / total as f64))
}

/// Continuous lattice coordinate of `depth` on the parent bins, by linear
/// interpolation between parent samples (linear extrapolation past the
/// ends).
fn parent_coordinate(parents: &[Sample], depth: f64) -> f64 {
    if parents.len() == 1 {
        let s = parents[0];
        return s.bin as f64 + (depth - s.depth) / s.interval;
    }
    let i = parents
        .windows(2)
        .position(|w| depth <= w[1].depth)
        .unwrap_or(parents.len() - 2);
    let (a, b) = (parents[i], parents[i + 1]);
    let t = (depth - a.depth) / (b.depth - a.depth);
    a.bin as f64 + t * (b.bin - a.bin) as f64
}

/// Unimodal next-level samples: `m_next` samples spaced `interval / 2`,
/// centered on the expectation, where `interval` is the
/// probability-weighted parent interval.
pub fn unimodal_baseline_samples(probs: &[f64], samples: &[Sample], m_next: usize) -> Result<Vec<Sample>> {
    if m_next == 0 {
        return Err(invalid_arg("m_next must be positive"));
    }
    let depths: Vec<f64> = samples.iter().map(|s| s.depth).collect();
    let center = expectation(&depths, probs)?;
    let interval: f64 = samples.iter().zip(probs).map(|(s, p)| s.interval * p).sum();
    let step = interval / 2.0;
    let offset = (m_next as f64 - 1.0) / 2.0;
    let mut first = center - offset * step;
    if first <= 0.0 {
        // keep the window in front of the camera
        first = step / 2.0;
    }
    let coord = 2.0 * parent_coordinate(samples, first) + 0.5;
    let first_bin = (coord + 0.5).floor() as i64;
    Ok((0..m_next)
        .map(|j| Sample {
            depth: first + j as f64 * step,
            interval: step,
            bin: first_bin + j as i64,
        })
        .collect())
}

/// Unimodal propagation for every pixel; pixels without a distribution use
/// uniform weights.
pub fn branch_unimodal(hyps: &HypothesisSet, probs: &ProbabilityVolume, m_next: usize) -> Result<HypothesisSet> {
    check_probs_shape(hyps, probs)?;
    let uniform = vec![1.0 / hyps.samples as f64; hyps.samples];
    let pixels = (0..hyps.pixel_count())
        .map(|p| {
            let pr = if probs.valid[p] { probs.pixel(p) } else { &uniform[..] };
            unimodal_baseline_samples(pr, &hyps.pixel_samples(p), m_next)
        })
        .collect::<Result<Vec<_>>>()?;
    HypothesisSet::from_pixels(hyps.level.saturating_sub(1), hyps.width, hyps.height, &pixels)
}
