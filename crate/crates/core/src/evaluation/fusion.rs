//! Geometric-consistency fusion of per-view depth maps into a point cloud.

use nalgebra::{Point2, Point3};
use rayon::prelude::*;

use crate::error::{invalid_arg, MvsError, Result};
use crate::geometry::CameraView;
use crate::grid::{DepthMap, Image};

/// Points in scene units with optional 8-bit color, ordered by
/// (view, row, column) of the pixel that produced them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FusionView<'a> {
    pub depth: &'a DepthMap,
    pub camera: &'a CameraView,
    /// Grayscale intensities in `[0, 1]` used to color the points.
    pub image: Option<&'a Image>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionParams {
    /// Maximum relative depth disagreement.
    pub tau_depth: f64,
    /// Minimum number of agreeing source views.
    pub n_min: usize,
    /// Relative tolerance under which an earlier view already owns a point.
    pub tau_dedup: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            tau_depth: 0.01,
            n_min: 3,
            tau_dedup: 0.01,
        }
    }
}

/// Pixel of `view` hit by `point`, if its stored depth agrees within `tau`.
fn consistent_pixel(view: &FusionView<'_>, point: &Point3<f64>, tau: f64) -> Option<usize> {
    let (px, z) = view.camera.project(point).ok()?;
    let (x, y) = (px.x.round(), px.y.round());
    let (w, h) = (view.depth.width, view.depth.height);
    if !(x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64) {
        return None;
    }
    let (x, y) = (x as usize, y as usize);
    let d = view.depth.get(x, y);
    (d.is_finite() && ((d - z) / z).abs() <= tau).then_some(y * w + x)
}

/// Keeps a reference pixel when at least `n_min` other views reproject it
/// with relative depth error at most `tau_depth`.
///
/// A point is emitted only by the first view that observes it: pixels whose
/// point an earlier view reproduces within `tau_dedup` are skipped.
/// Ownership does not depend on `tau_depth` or `n_min`, so the output only
/// grows with `tau_depth` and only shrinks with `n_min`.
pub fn fuse_depth_maps(views: &[FusionView<'_>], params: FusionParams) -> Result<PointCloud> {
    if !(params.tau_depth >= 0.0) || !(params.tau_dedup >= 0.0) {
        return Err(invalid_arg("depth tolerances must be non-negative"));
    }
    for (i, v) in views.iter().enumerate() {
        if (v.depth.width, v.depth.height) != (v.camera.width(), v.camera.height()) {
            return Err(MvsError::ShapeMismatch(format!(
                "view {i}: depth map {}x{} vs camera {}x{}",
                v.depth.width,
                v.depth.height,
                v.camera.width(),
                v.camera.height()
            )));
        }
        if v.image.is_some_and(|im| (im.width, im.height) != (v.depth.width, v.depth.height)) {
            return Err(MvsError::ShapeMismatch(format!("view {i}: image size differs from depth map")));
        }
    }
    let colored = !views.is_empty() && views.iter().all(|v| v.image.is_some());
    let mut cloud = PointCloud {
        points: Vec::new(),
        colors: colored.then(Vec::new),
    };
    for (r, view) in views.iter().enumerate() {
        let w = view.depth.width;
        let kept: Vec<(usize, Point3<f64>)> = (0..view.depth.data.len())
            .into_par_iter()
            .filter_map(|p| {
                let d = view.depth.data[p];
                if !d.is_finite() || d <= 0.0 {
                    return None;
                }
                let point = view.camera.unproject(Point2::new((p % w) as f64, (p / w) as f64), d);
                if views[..r]
                    .iter()
                    .any(|v| consistent_pixel(v, &point, params.tau_dedup).is_some())
                {
                    return None;
                }
                let agreeing = views
                    .iter()
                    .enumerate()
                    .filter(|&(j, v)| j != r && consistent_pixel(v, &point, params.tau_depth).is_some())
                    .count();
                (agreeing >= params.n_min).then_some((p, point))
            })
            .collect();
        for (p, point) in kept {
            cloud.points.push(point);
            if let (Some(colors), Some(img)) = (cloud.colors.as_mut(), view.image) {
                let g = (img.data[p].clamp(0.0, 1.0) * 255.0).round() as u8;
                colors.push([g, g, g]);
            }
        }
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn plane_views(n: usize, z: f64) -> (Vec<CameraView>, Vec<DepthMap>) {
        let cams: Vec<CameraView> = (0..n)
            .map(|i| CameraView::simple(30.0, 24, 20, Matrix3::identity(), Vector3::new(-0.2 * i as f64, 0.0, 0.0)).unwrap())
            .collect();
        let depths = cams.iter().map(|_| DepthMap::filled(24, 20, z)).collect();
        (cams, depths)
    }

    fn views<'a>(cams: &'a [CameraView], depths: &'a [DepthMap]) -> Vec<FusionView<'a>> {
        cams.iter()
            .zip(depths)
            .map(|(camera, depth)| FusionView {
                depth,
                camera,
                image: None,
            })
            .collect()
    }

    #[test]
    fn single_view_keeps_every_valid_pixel() {
        let (cams, mut depths) = plane_views(1, 4.0);
        depths[0].set(3, 3, f64::NAN);
        let cloud = fuse_depth_maps(&views(&cams, &depths), FusionParams { n_min: 0, ..FusionParams::default() }).unwrap();
        assert_eq!(cloud.len(), 24 * 20 - 1);
        assert_eq!(cloud.points[0], Point3::new(-11.5 * 4.0 / 30.0, -9.5 * 4.0 / 30.0, 4.0));
    }

    #[test]
    fn consistent_views_keep_overlap_once() {
        let (cams, depths) = plane_views(2, 4.0);
        let v = views(&cams, &depths);
        let cloud = fuse_depth_maps(&v, FusionParams { n_min: 1, ..FusionParams::default() }).unwrap();
        // disparity 30 * 0.2 / 4 = 1.5 px: view 1 sees view 0 columns 2..
        // and view 1 pixels seen by view 0 are owned by view 0
        let from_first = (24 - 2) * 20;
        assert_eq!(cloud.len(), from_first);
    }

    #[test]
    fn corrupted_view_is_rejected() {
        let (cams, mut depths) = plane_views(5, 4.0);
        for (i, d) in depths[0].data.iter_mut().enumerate() {
            *d *= if i % 2 == 0 { 1.05 } else { 0.95 };
        }
        let v = views(&cams, &depths);
        let cloud = fuse_depth_maps(&v, FusionParams::default()).unwrap();
        assert!(!cloud.is_empty());
        for p in &cloud.points {
            assert!((p.z - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_in_parameters() {
        let (cams, mut depths) = plane_views(5, 4.0);
        for (k, d) in depths.iter_mut().enumerate() {
            for (i, v) in d.data.iter_mut().enumerate() {
                *v *= 1.0 + 0.004 * (((i * 7 + k * 13) % 11) as f64 - 5.0);
            }
        }
        let v = views(&cams, &depths);
        let count = |tau, n_min| fuse_depth_maps(&v, FusionParams { tau_depth: tau, n_min, ..FusionParams::default() }).unwrap().len();
        for tau in [0.0, 0.005, 0.01, 0.02, 0.05] {
            let counts: Vec<usize> = (0..=4).map(|n| count(tau, n)).collect();
            assert!(counts.windows(2).all(|c| c[1] <= c[0]), "{counts:?}");
        }
        for n in 0..=4 {
            let counts: Vec<usize> = [0.0, 0.005, 0.01, 0.02, 0.05].iter().map(|&t| count(t, n)).collect();
            assert!(counts.windows(2).all(|c| c[1] >= c[0]), "{counts:?}");
        }
    }
}
