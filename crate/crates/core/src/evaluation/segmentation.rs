//! Region labels from a Laplacian pyramid of the ground-truth depth.
//!
//! Band `q` is the absolute difference between pyramid level `q` and the
//! upsampled level `q + 1`. A pixel is labeled with the finest band whose
//! response exceeds the threshold; pixels quiet in every band fall into the
//! last region.

use crate::error::{invalid_arg, MvsError, Result};
use crate::grid::{DepthMap, Grid};

/// Number of regions (and pyramid bands).
pub const REGION_COUNT: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct RegionLabels {
    pub width: usize,
    pub height: usize,
    /// Region index per pixel; `None` where the ground truth is invalid.
    pub labels: Vec<Option<u8>>,
}

impl RegionLabels {
    pub fn get(&self, x: usize, y: usize) -> Option<u8> {
        self.labels[y * self.width + x]
    }

    pub fn counts(&self) -> [usize; REGION_COUNT] {
        let mut c = [0; REGION_COUNT];
        for l in self.labels.iter().flatten() {
            c[*l as usize] += 1;
        }
        c
    }

    /// Pixels with the given label.
    pub fn mask(&self, region: u8) -> Vec<bool> {
        self.labels.iter().map(|l| *l == Some(region)).collect()
    }
}

/// `pct` percent of the finite depth range.
pub fn default_theta(gt: &DepthMap, pct: f64) -> Option<f64> {
    gt.finite_range().map(|(lo, hi)| (hi - lo) * pct / 100.0)
}

/// 2x2 average over the valid pixels of each block; `NaN` if none.
pub(crate) fn downsample_valid(src: &Grid) -> Grid {
    Grid::from_fn(src.width.div_ceil(2), src.height.div_ceil(2), |x, y| {
        let mut sum = 0.0;
        let mut n = 0;
        for yy in 2 * y..(2 * y + 2).min(src.height) {
            for xx in 2 * x..(2 * x + 2).min(src.width) {
                let v = src.get(xx, yy);
                if v.is_finite() {
                    sum += v;
                    n += 1;
                }
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    })
}

/// Bilinear upsampling onto `width x height` with block-center alignment:
/// fine pixel `x` reads coarse coordinate `(x + 0.5) / 2 - 0.5`. Invalid
/// coarse pixels are left out of the weighted average.
pub(crate) fn upsample_bilinear(src: &Grid, width: usize, height: usize) -> Grid {
    let coord = |x: usize, n: usize| -> (usize, usize, f64) {
        let c = ((x as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = c.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, c - i0 as f64)
    };
    Grid::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = coord(x, src.width);
        let (y0, y1, fy) = coord(y, src.height);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (xx, yy, w) in [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ] {
            let v = src.get(xx, yy);
            if w > 0.0 && v.is_finite() {
                acc += w * v;
                wsum += w;
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            f64::NAN
        }
    })
}

/// Labels every valid pixel with one of `REGION_COUNT` regions.
pub fn laplacian_segmentation(gt: &DepthMap, theta: f64) -> Result<RegionLabels> {
    let min_size = 1usize << REGION_COUNT;
    if gt.width < min_size || gt.height < min_size {
        return Err(MvsError::ShapeMismatch(format!(
            "segmentation needs at least {min_size}x{min_size} pixels, got {}x{}",
            gt.width, gt.height
        )));
    }
    if !(theta >= 0.0) {
        return Err(invalid_arg("band threshold must be non-negative"));
    }
    let mut pyramid = vec![gt.clone()];
    for q in 0..REGION_COUNT - 1 {
        let next = downsample_valid(&pyramid[q]);
        pyramid.push(next);
    }
    let bands: Vec<Grid> = (0..REGION_COUNT - 1)
        .map(|q| {
            let up = upsample_bilinear(&pyramid[q + 1], pyramid[q].width, pyramid[q].height);
            Grid::from_fn(up.width, up.height, |x, y| (pyramid[q].get(x, y) - up.get(x, y)).abs())
        })
        .collect();
    let labels = (0..gt.height)
        .flat_map(|y| (0..gt.width).map(move |x| (x, y)))
        .map(|(x, y)| {
            if !gt.is_valid(x, y) {
                return None;
            }
            let band = bands
                .iter()
                .enumerate()
                .position(|(q, b)| b.get(x >> q, y >> q) > theta);
            Some(band.unwrap_or(REGION_COUNT - 1) as u8)
        })
        .collect();
    Ok(RegionLabels {
        width: gt.width,
        height: gt.height,
        labels,
    })
}

/// Mean `|est - gt|` per region over pixels where both are finite.
/// Regions without such pixels are `None`.
pub fn region_depth_error(est: &DepthMap, gt: &DepthMap, labels: &RegionLabels) -> Result<[Option<f64>; REGION_COUNT]> {
    if (est.width, est.height) != (gt.width, gt.height) || (labels.width, labels.height) != (gt.width, gt.height) {
        return Err(MvsError::ShapeMismatch("estimate, ground truth and labels differ in size".into()));
    }
    let mut sums = [0.0; REGION_COUNT];
    let mut counts = [0usize; REGION_COUNT];
    for ((e, g), l) in est.data.iter().zip(&gt.data).zip(&labels.labels) {
        if let Some(l) = l {
            if e.is_finite() && g.is_finite() {
                sums[*l as usize] += (e - g).abs();
                counts[*l as usize] += 1;
            }
        }
    }
    Ok(std::array::from_fn(|r| (counts[r] > 0).then(|| sums[r] / counts[r] as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_is_all_last_region() {
        let gt = DepthMap::filled(64, 64, 3.0);
        let l = laplacian_segmentation(&gt, 0.01).unwrap();
        assert_eq!(l.counts(), [0, 0, 0, 0, 64 * 64]);
    }

    #[test]
    fn step_edge_labels_boundary_band() {
        let gt = DepthMap::from_fn(64, 64, |x, _| if x < 29 { 2.0 } else { 4.0 });
        let l = laplacian_segmentation(&gt, 0.02).unwrap();
        for y in 0..64 {
            assert_eq!(l.get(28, y), Some(0));
            assert_eq!(l.get(29, y), Some(0));
            assert_eq!(l.get(0, y), Some(4));
            assert_eq!(l.get(63, y), Some(4));
        }
        // the finest band stays within a few pixels of the edge
        for y in 0..64 {
            for x in 0..64 {
                if l.get(x, y) == Some(0) {
                    assert!((x as i64 - 28).abs() <= 3, "{x}");
                }
            }
        }
        assert_eq!(l.counts().iter().sum::<usize>(), 64 * 64);
    }

    #[test]
    fn invalid_pixels_are_unlabeled() {
        let mut gt = DepthMap::filled(32, 32, 1.0);
        gt.set(5, 5, f64::NAN);
        let l = laplacian_segmentation(&gt, 0.0).unwrap();
        assert_eq!(l.get(5, 5), None);
        assert_eq!(l.counts().iter().sum::<usize>(), 32 * 32 - 1);
        assert!(laplacian_segmentation(&DepthMap::filled(31, 40, 1.0), 0.1).is_err());
    }

    #[test]
    fn region_errors() {
        let gt = DepthMap::from_fn(64, 64, |x, _| if x < 32 { 2.0 } else { 4.0 });
        let l = laplacian_segmentation(&gt, 0.02).unwrap();
        let e = region_depth_error(&gt, &gt, &l).unwrap();
        assert!(e.iter().flatten().all(|&v| v == 0.0));
        let biased = DepthMap::from_fn(64, 64, |x, y| gt.get(x, y) + 1.0);
        let e = region_depth_error(&biased, &gt, &l).unwrap();
        assert!(e.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-12));

        // four labeled pixels by hand
        let labels = RegionLabels {
            width: 2,
            height: 2,
            labels: vec![Some(0), Some(0), Some(3), None],
        };
        let gt = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let est = DepthMap::new(2, 2, vec![1.5, 1.0, 3.25, 0.0]).unwrap();
        let e = region_depth_error(&est, &gt, &labels).unwrap();
        assert_eq!(e, [Some(0.75), None, None, Some(0.25), None]);
    }

    #[test]
    fn resampling_helpers() {
        let g = Grid::new(2, 2, vec![1.0, f64::NAN, 3.0, 5.0]).unwrap();
        let d = downsample_valid(&g);
        assert_eq!(d.data, vec![3.0]);
        let c = Grid::filled(3, 2, 2.5);
        let u = upsample_bilinear(&c, 6, 4);
        assert!(u.data.iter().all(|&v| v == 2.5));
        let ramp = Grid::new(2, 1, vec![0.0, 4.0]).unwrap();
        let u = upsample_bilinear(&ramp, 4, 2);
        assert_eq!(&u.data[..4], &[0.0, 1.0, 3.0, 4.0]);
    }
}
