//! Dense plane-sweep cost volume for the coarsest pyramid level.
//!
//! Source features are warped onto the reference grid through per-plane
//! homographies, compared with group-wise correlation, fused across views
//! with a photo-consistency visibility weight and finally smoothed and
//! turned into per-pixel depth distributions.

use rayon::prelude::*;

use crate::error::{invalid_arg, MvsError, Result};
use crate::features::FeatureMap;
use crate::geometry::{plane_homography, warp_map_to, CameraView};

/// Feature map of one view at one pyramid level, with the matching camera.
#[derive(Clone, Copy, Debug)]
pub struct ViewLevel<'a> {
    pub features: &'a FeatureMap,
    pub camera: &'a CameraView,
}

/// Group-wise correlation written into `out` (length `groups`).
///
/// Group `g` is the inner product of the `g`-th block of `D / G` channels,
/// divided by `D / G`.
#[inline]
pub(crate) fn correlate_into(f_ref: &[f64], f_src: &[f64], out: &mut [f64]) {
    let groups = out.len();
    let per = f_ref.len() / groups;
    let norm = per as f64;
    for (g, o) in out.iter_mut().enumerate() {
        let a = &f_ref[g * per..(g + 1) * per];
        let b = &f_src[g * per..(g + 1) * per];
        *o = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / norm;
    }
}

pub fn groupwise_correlation(f_ref: &[f64], f_src: &[f64], groups: usize) -> Result<Vec<f64>> {
    if f_ref.len() != f_src.len() {
        return Err(MvsError::ShapeMismatch(format!(
            "descriptor lengths differ: {} vs {}",
            f_ref.len(),
            f_src.len()
        )));
    }
    check_groups(f_ref.len(), groups)?;
    let mut out = vec![0.0; groups];
    correlate_into(f_ref, f_src, &mut out);
    Ok(out)
}

pub(crate) fn check_groups(channels: usize, groups: usize) -> Result<()> {
    if groups == 0 || channels % groups != 0 {
        return Err(invalid_arg(format!(
            "{channels} channels cannot be split into {groups} groups"
        )));
    }
    Ok(())
}

/// Matching costs over `height x width x samples x groups`.
///
/// Larger values mean better photo-consistency.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub samples: usize,
    pub groups: usize,
    pub costs: Vec<f64>,
    /// Number of source views that produced a valid match for each cell.
    pub validity: Vec<u8>,
    pub pixel_valid: Vec<bool>,
}

impl CostVolume {
    pub fn zeros(width: usize, height: usize, samples: usize, groups: usize) -> Self {
        Self {
            width,
            height,
            samples,
            groups,
            costs: vec![0.0; width * height * samples * groups],
            validity: vec![0; width * height * samples],
            pixel_valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn cell(&self, pixel: usize, sample: usize) -> &[f64] {
        let i = (pixel * self.samples + sample) * self.groups;
        &self.costs[i..i + self.groups]
    }

    /// Group-averaged cost of one cell.
    #[inline]
    pub fn mean_cost(&self, pixel: usize, sample: usize) -> f64 {
        self.cell(pixel, sample).iter().sum::<f64>() / self.groups as f64
    }
}

/// Per-pixel discrete depth distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVolume {
    pub width: usize,
    pub height: usize,
    pub samples: usize,
    pub probs: Vec<f64>,
    /// Invalid pixels carry an all-zero distribution.
    pub valid: Vec<bool>,
}

impl ProbabilityVolume {
    #[inline]
    pub fn pixel(&self, pixel: usize) -> &[f64] {
        &self.probs[pixel * self.samples..(pixel + 1) * self.samples]
    }
}

/// Plane-sweep costs of one source view against the reference.
///
/// Invalid warps leave a zero cost and zero validity.
pub fn build_view_cost(
    reference: ViewLevel<'_>,
    source: ViewLevel<'_>,
    depths: &[f64],
    groups: usize,
) -> Result<CostVolume> {
    let rf = reference.features;
    if rf.channels != source.features.channels {
        return Err(MvsError::ShapeMismatch(
            "reference and source descriptors differ in channel count".into(),
        ));
    }
    check_groups(rf.channels, groups)?;
    if depths.is_empty() {
        return Err(invalid_arg("no depth hypotheses"));
    }
    let (w, h, m) = (rf.width, rf.height, depths.len());
    let planes: Vec<(Vec<f64>, Vec<u8>)> = depths
        .par_iter()
        .map(|&d| -> Result<(Vec<f64>, Vec<u8>)> {
            let hom = plane_homography(reference.camera, source.camera, d)?;
            let warped = warp_map_to(source.features, &hom, w, h);
            let mut costs = vec![0.0; w * h * groups];
            let mut valid = vec![0u8; w * h];
            for p in 0..w * h {
                if !(warped.valid[p] && rf.valid[p]) {
                    continue;
                }
                let d = rf.channels;
                correlate_into(
                    &rf.values[p * d..(p + 1) * d],
                    &warped.values[p * d..(p + 1) * d],
                    &mut costs[p * groups..(p + 1) * groups],
                );
                valid[p] = 1;
            }
            Ok((costs, valid))
        })
        .collect::<Result<_>>()?;

    let mut vol = CostVolume::zeros(w, h, m, groups);
    for (s, (costs, valid)) in planes.iter().enumerate() {
        for p in 0..w * h {
            let cell = p * m + s;
            vol.validity[cell] = valid[p];
            vol.costs[cell * groups..(cell + 1) * groups]
                .copy_from_slice(&costs[p * groups..(p + 1) * groups]);
        }
    }
    for p in 0..w * h {
        vol.pixel_valid[p] = (0..m).any(|s| vol.validity[p * m + s] > 0);
    }
    Ok(vol)
}

/// Visibility weight of a view at one pixel: the best group-mean
/// correlation over its valid samples, clamped at zero.
pub(crate) fn visibility_weight(mut valid_means: impl Iterator<Item = f64>) -> f64 {
    let first = valid_means.next();
    match first {
        None => 0.0,
        Some(v) => valid_means.fold(v, f64::max).max(0.0),
    }
}

/// Fuses per-view volumes with visibility-weighted averaging.
///
/// Each view gets one weight per pixel; a cell averages only the views that
/// were valid there. Pixels where every weight is zero are flagged invalid.
pub fn aggregate_views(volumes: &[CostVolume]) -> Result<CostVolume> {
    let first = volumes
        .first()
        .ok_or_else(|| invalid_arg("cannot aggregate zero views"))?;
    let (w, h, m, g) = (first.width, first.height, first.samples, first.groups);
    if volumes
        .iter()
        .any(|v| (v.width, v.height, v.samples, v.groups) != (w, h, m, g))
    {
        return Err(MvsError::ShapeMismatch("view cost volumes differ in shape".into()));
    }
    if volumes.len() > u8::MAX as usize {
        return Err(invalid_arg("too many source views"));
    }
    let mut out = CostVolume::zeros(w, h, m, g);
    let per_pixel: Vec<(Vec<f64>, Vec<u8>, bool)> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let weights: Vec<f64> = volumes
                .iter()
                .map(|v| {
                    visibility_weight(
                        (0..m)
                            .filter(|&s| v.validity[p * m + s] > 0)
                            .map(|s| v.mean_cost(p, s)),
                    )
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut costs = vec![0.0; m * g];
            let mut counts = vec![0u8; m];
            for s in 0..m {
                let mut den = 0.0;
                let acc = &mut costs[s * g..(s + 1) * g];
                for (v, &wt) in volumes.iter().zip(&weights) {
                    if v.validity[p * m + s] == 0 {
                        continue;
                    }
                    counts[s] += 1;
                    if wt > 0.0 {
                        den += wt;
                        for (a, c) in acc.iter_mut().zip(v.cell(p, s)) {
                            *a += wt * c;
                        }
                    }
                }
                if den > 0.0 {
                    acc.iter_mut().for_each(|a| *a /= den);
                } else {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                }
            }
            (costs, counts, total > 0.0)
        })
        .collect();
    for (p, (costs, counts, valid)) in per_pixel.into_iter().enumerate() {
        out.costs[p * m * g..(p + 1) * m * g].copy_from_slice(&costs);
        out.validity[p * m..(p + 1) * m].copy_from_slice(&counts);
        out.pixel_valid[p] = valid;
    }
    Ok(out)
}

/// Smoothing and softmax settings shared by the dense and sparse aggregators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization {
    /// Number of full (x, y, depth) smoothing sweeps.
    pub passes: usize,
    pub temperature: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            passes: 2,
            temperature: 1.0,
        }
    }
}

/// Numerically stable softmax of `values / temperature`, in place.
pub fn softmax_in_place(values: &mut [f64], temperature: f64) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        sum += *v;
    }
    values.iter_mut().for_each(|v| *v /= sum);
}

/// (1,2,1)/4 filter along one axis of a dense `h x w x m` scalar grid,
/// renormalizing the kernel where a neighbor falls outside the grid.
fn smooth_axis(src: &[f64], w: usize, h: usize, m: usize, axis: usize) -> Vec<f64> {
    let (dims, strides) = ([w, h, m], [m, w * m, 1]);
    let n = dims[axis];
    let stride = strides[axis];
    (0..src.len())
        .into_par_iter()
        .map(|i| {
            let coord = match axis {
                0 => (i / m) % w,
                1 => i / (w * m),
                _ => i % m,
            };
            let mut acc = 2.0 * src[i];
            let mut wsum = 2.0;
            if coord > 0 {
                acc += src[i - stride];
                wsum += 1.0;
            }
            if coord + 1 < n {
                acc += src[i + stride];
                wsum += 1.0;
            }
            acc / wsum
        })
        .collect()
}

/// Group-average, separable smoothing along x, y and depth, then a
/// per-pixel softmax over depth.
pub fn regularize_dense(volume: &CostVolume, reg: Regularization) -> Result<ProbabilityVolume> {
    if !(reg.temperature > 0.0) {
        return Err(invalid_arg("softmax temperature must be positive"));
    }
    let (w, h, m) = (volume.width, volume.height, volume.samples);
    let mut scalar: Vec<f64> = (0..w * h * m)
        .map(|cell| volume.mean_cost(cell / m, cell % m))
        .collect();
    for _ in 0..reg.passes {
        for axis in 0..3 {
            scalar = smooth_axis(&scalar, w, h, m, axis);
        }
    }
    let mut probs = scalar;
    probs
        .par_chunks_mut(m)
        .zip(volume.pixel_valid.par_iter())
        .for_each(|(px, &valid)| {
            if valid {
                softmax_in_place(px, reg.temperature);
            } else {
                px.iter_mut().for_each(|v| *v = 0.0);
            }
        });
    Ok(ProbabilityVolume {
        width: w,
        height: h,
        samples: m,
        probs,
        valid: volume.pixel_valid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::grid::Image;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn correlation_examples() {
        assert_eq!(groupwise_correlation(&[1.0; 4], &[1.0; 4], 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(groupwise_correlation(&[3.0, -2.0, 5.0, 1.0], &[0.0; 4], 2).unwrap(), vec![0.0, 0.0]);
        let c = groupwise_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], 2).unwrap();
        assert!((c[0] - 1.5).abs() < 1e-12 && (c[1] - 3.5).abs() < 1e-12);
        assert!(groupwise_correlation(&[1.0; 6], &[1.0; 6], 4).is_err());
    }

    fn random_volume(w: usize, h: usize, m: usize, g: usize, rng: &mut ChaCha8Rng) -> CostVolume {
        let mut v = CostVolume::zeros(w, h, m, g);
        v.costs.iter_mut().for_each(|c| *c = rng.random_range(-1.0..1.0));
        v.validity.iter_mut().for_each(|c| *c = u8::from(rng.random_bool(0.8)));
        for p in 0..w * h {
            v.pixel_valid[p] = (0..m).any(|s| v.validity[p * m + s] > 0);
        }
        v
    }

    #[test]
    fn single_view_aggregation_is_identity_where_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_volume(5, 4, 6, 2, &mut rng);
        let fused = aggregate_views(std::slice::from_ref(&v)).unwrap();
        for p in 0..20 {
            if !fused.pixel_valid[p] {
                continue;
            }
            for s in 0..6 {
                if v.validity[p * 6 + s] > 0 {
                    for (a, b) in fused.cell(p, s).iter().zip(v.cell(p, s)) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
            }
        }
        let twice = aggregate_views(&[v.clone(), v.clone()]).unwrap();
        for p in 0..20 {
            if twice.pixel_valid[p] {
                for s in 0..6 {
                    if v.validity[p * 6 + s] > 0 {
                        assert!((twice.cell(p, s)[0] - v.cell(p, s)[0]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn weighted_mean_example() {
        // Two groups so that a cell's group-0 cost can differ from the view
        // weight: view a's best group mean is 1, view b's is 3. Group 0 of
        // cell 0 holds costs 0 and 4, fused (1*0 + 3*4) / 4 = 3.
        let mut a = CostVolume::zeros(1, 1, 2, 2);
        let mut b = CostVolume::zeros(1, 1, 2, 2);
        a.costs = vec![0.0, 2.0, -1.0, 0.5];
        b.costs = vec![4.0, 2.0, 1.0, 0.0];
        a.validity = vec![1, 1];
        b.validity = vec![1, 1];
        let fused = aggregate_views(&[a, b]).unwrap();
        assert!((fused.costs[0] - 3.0).abs() < 1e-12);
        assert!((fused.costs[1] - 2.0).abs() < 1e-12);
        assert_eq!(fused.validity, vec![2, 2]);

        // a cell only averages the views valid there
        let mut a = CostVolume::zeros(1, 1, 2, 1);
        let mut b = CostVolume::zeros(1, 1, 2, 1);
        a.costs = vec![0.0, 1.0];
        b.costs = vec![3.0, 4.0];
        a.validity = vec![1, 1];
        b.validity = vec![0, 1];
        let fused = aggregate_views(&[a, b]).unwrap();
        assert_eq!(fused.costs[0], 0.0);
        assert_eq!(fused.validity, vec![1, 2]);
        assert!((fused.costs[1] - (1.0 + 16.0) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn aggregation_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vols: Vec<_> = (0..4).map(|_| random_volume(6, 5, 7, 4, &mut rng)).collect();
        let a = aggregate_views(&vols).unwrap();
        let rev: Vec<_> = vols.iter().rev().cloned().collect();
        let b = aggregate_views(&rev).unwrap();
        assert_eq!(a.pixel_valid, b.pixel_valid);
        assert_eq!(a.validity, b.validity);
        for (x, y) in a.costs.iter().zip(&b.costs) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(aggregate_views(&[]).is_err());
    }

    fn single_pixel(costs: &[f64]) -> CostVolume {
        let mut v = CostVolume::zeros(1, 1, costs.len(), 1);
        v.costs = costs.to_vec();
        v.validity = vec![1; costs.len()];
        v.pixel_valid = vec![true];
        v
    }

    #[test]
    fn softmax_example() {
        let v = single_pixel(&[0.0, 9f64.ln()]);
        let p = regularize_dense(&v, Regularization { passes: 0, temperature: 1.0 }).unwrap();
        assert!((p.probs[0] - 0.1).abs() < 1e-12);
        assert!((p.probs[1] - 0.9).abs() < 1e-12);

        // Two depth passes of the renormalized (1,2,1) kernel turn (0, L)
        // into (4L/9, 5L/9); the softmax then sees a gap of L/9.
        let p = regularize_dense(&v, Regularization::default()).unwrap();
        let expected = 1.0 / (1.0 + 9f64.powf(-1.0 / 9.0));
        assert!((p.probs[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_volume_gives_uniform_distribution() {
        let mut v = CostVolume::zeros(4, 3, 5, 2);
        v.costs.iter_mut().for_each(|c| *c = 0.37);
        v.validity.iter_mut().for_each(|c| *c = 1);
        v.pixel_valid.iter_mut().for_each(|c| *c = true);
        let p = regularize_dense(&v, Regularization::default()).unwrap();
        assert!(p.probs.iter().all(|x| (x - 0.2).abs() < 1e-12));
    }

    #[test]
    fn probabilities_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = random_volume(7, 6, 9, 4, &mut rng);
        let p = regularize_dense(&v, Regularization::default()).unwrap();
        for px in 0..42 {
            let s: f64 = p.pixel(px).iter().sum();
            if p.valid[px] {
                assert!((s - 1.0).abs() < 1e-6);
                assert!(p.pixel(px).iter().all(|&x| (0.0..=1.0).contains(&x)));
            } else {
                assert_eq!(s, 0.0);
            }
        }
        assert!(regularize_dense(&v, Regularization { passes: 1, temperature: 0.0 }).is_err());
    }

    #[test]
    fn argmax_preserved_for_spatially_constant_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = 11;
            let profile: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            // a tent peak away from the depth border survives two (1,2,1) passes
            let peak = rng.random_range(2..m - 2);
            let shaped: Vec<f64> = (0..m)
                .map(|s| profile[s].abs() * 0.05 - (s as f64 - peak as f64).abs())
                .collect();
            let mut v = CostVolume::zeros(3, 3, m, 1);
            for p in 0..9 {
                for s in 0..m {
                    v.costs[p * m + s] = shaped[s];
                    v.validity[p * m + s] = 1;
                }
                v.pixel_valid[p] = true;
            }
            let pv = regularize_dense(&v, Regularization::default()).unwrap();
            for p in 0..9 {
                let px = pv.pixel(p);
                let arg = (0..m).max_by(|&a, &b| px[a].total_cmp(&px[b])).unwrap();
                assert_eq!(arg, peak);
            }
        }
    }

    #[test]
    fn spatial_passes_are_identity_on_xy_constant_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = 9;
        let profile: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut v = CostVolume::zeros(4, 3, m, 1);
        let mut single = CostVolume::zeros(1, 1, m, 1);
        for s in 0..m {
            single.costs[s] = profile[s];
            single.validity[s] = 1;
        }
        single.pixel_valid[0] = true;
        for p in 0..12 {
            for s in 0..m {
                v.costs[p * m + s] = profile[s];
                v.validity[p * m + s] = 1;
            }
            v.pixel_valid[p] = true;
        }
        let reg = Regularization::default();
        let expected = regularize_dense(&single, reg).unwrap();
        let pv = regularize_dense(&v, reg).unwrap();
        for p in 0..12 {
            for (a, b) in pv.pixel(p).iter().zip(expected.pixel(0)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn self_matching_reproduces_self_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = Image::from_fn(12, 10, |_, _| rng.random::<f64>());
        let f = extract_features(&img).unwrap();
        let cam = CameraView::simple(20.0, 12, 10, Matrix3::identity(), Vector3::zeros()).unwrap();
        let view = ViewLevel { features: &f, camera: &cam };
        let vol = build_view_cost(view, view, &[1.0, 2.0, 5.0], 4).unwrap();
        for p in 0..120 {
            let px = &f.values[p * 8..(p + 1) * 8];
            let expected = groupwise_correlation(px, px, 4).unwrap();
            for s in 0..3 {
                assert_eq!(vol.validity[p * 3 + s], 1);
                for (a, b) in vol.cell(p, s).iter().zip(&expected) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn disjoint_frusta_give_empty_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = Image::from_fn(8, 8, |_, _| rng.random::<f64>());
        let f = extract_features(&img).unwrap();
        let reference = CameraView::simple(10.0, 8, 8, Matrix3::identity(), Vector3::zeros()).unwrap();
        // source looks the opposite way from far behind
        let flip = *nalgebra::Rotation3::from_euler_angles(0.0, std::f64::consts::PI, 0.0).matrix();
        let src = CameraView::simple(10.0, 8, 8, flip, Vector3::new(0.0, 0.0, -100.0)).unwrap();
        let vol = build_view_cost(
            ViewLevel { features: &f, camera: &reference },
            ViewLevel { features: &f, camera: &src },
            &[1.0, 2.0],
            4,
        )
        .unwrap();
        assert!(vol.costs.iter().all(|&c| c == 0.0));
        assert!(vol.validity.iter().all(|&c| c == 0));
        assert!(vol.pixel_valid.iter().all(|&v| !v));
    }
}
