//! Pinhole cameras, inverse-depth plane sampling and plane-induced homographies.
//!
//! Pixel coordinates use the pixel-center convention: pixel `(i, j)` sits at
//! continuous coordinate `(i, j)`. Extrinsics map world points into the
//! camera frame, `X_cam = R * X_world + t`.

use nalgebra::{Matrix3, Point2, Point3, Vector3};

use crate::error::{invalid_arg, MvsError, Result};
use crate::features::FeatureMap;

const ROTATION_TOLERANCE: f64 = 1e-6;

/// Calibrated view: intrinsics, world-to-camera pose and image size.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraView {
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    width: usize,
    height: usize,
    intrinsics_inv: Matrix3<f64>,
}

impl CameraView {
    pub fn new(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let k = &intrinsics;
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(MvsError::InvalidCamera(
                "intrinsics must be upper-triangular".into(),
            ));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0) {
            return Err(MvsError::InvalidCamera(
                "focal entries must be positive".into(),
            ));
        }
        if !intrinsics.iter().all(|v| v.is_finite()) || !translation.iter().all(|v| v.is_finite())
        {
            return Err(MvsError::InvalidCamera("non-finite parameters".into()));
        }
        let ortho = rotation.transpose() * rotation - Matrix3::identity();
        if ortho.abs().max() > ROTATION_TOLERANCE
            || (rotation.determinant() - 1.0).abs() > ROTATION_TOLERANCE
        {
            return Err(MvsError::InvalidCamera(
                "rotation must be orthonormal with determinant +1".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(MvsError::InvalidCamera("image size must be positive".into()));
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .ok_or_else(|| MvsError::InvalidCamera("singular intrinsics".into()))?;
        Ok(Self {
            intrinsics,
            rotation,
            translation,
            width,
            height,
            intrinsics_inv,
        })
    }

    /// Camera with focal length `focal`, principal point at the image center
    /// and the given pose.
    pub fn simple(
        focal: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let k = Matrix3::new(
            focal,
            0.0,
            (width as f64 - 1.0) / 2.0,
            0.0,
            focal,
            (height as f64 - 1.0) / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Self::new(k, rotation, translation, width, height)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn intrinsics_inverse(&self) -> &Matrix3<f64> {
        &self.intrinsics_inv
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Pose of `other` relative to `self`: `X_other = R_rel * X_self + t_rel`.
    pub fn relative_pose(&self, other: &CameraView) -> (Matrix3<f64>, Vector3<f64>) {
        let r_rel = other.rotation * self.rotation.transpose();
        let t_rel = other.translation - r_rel * self.translation;
        (r_rel, t_rel)
    }

    /// Projects a world point. Returns the pixel and the camera-frame depth.
    pub fn project(&self, point: &Point3<f64>) -> Result<(Point2<f64>, f64)> {
        let pc = self.rotation * point.coords + self.translation;
        if pc.z <= 0.0 {
            return Err(MvsError::BehindCamera(pc.z));
        }
        let uvw = self.intrinsics * pc;
        Ok((Point2::new(uvw.x / uvw.z, uvw.y / uvw.z), pc.z))
    }

    /// World point on the ray through `pixel` at camera-frame depth `depth`.
    pub fn unproject(&self, pixel: Point2<f64>, depth: f64) -> Point3<f64> {
        let ray = self.intrinsics_inv * Vector3::new(pixel.x, pixel.y, 1.0);
        let pc = ray * (depth / ray.z);
        Point3::from(self.rotation.transpose() * (pc - self.translation))
    }

    fn rebuild(&mut self) {
        // scaling keeps K upper-triangular with a positive diagonal
        self.intrinsics_inv = self
            .intrinsics
            .try_inverse()
            .expect("scaled intrinsics stay invertible");
    }
}

/// Camera for pyramid level `level`: focal lengths and principal point
/// divided by `2^level`, image size integer-divided, extrinsics unchanged.
pub fn scale_camera(cam: &CameraView, level: usize) -> Result<CameraView> {
    if level == 0 {
        return Ok(cam.clone());
    }
    if level >= usize::BITS as usize {
        return Err(invalid_arg(format!("pyramid level {level} out of range")));
    }
    let factor = (1u64 << level) as f64;
    let width = cam.width >> level;
    let height = cam.height >> level;
    if width < 1 || height < 1 {
        return Err(MvsError::InvalidCamera(format!(
            "level {level} shrinks {}x{} below one pixel",
            cam.width, cam.height
        )));
    }
    let mut out = cam.clone();
    for col in 0..3 {
        out.intrinsics[(0, col)] /= factor;
        out.intrinsics[(1, col)] /= factor;
    }
    out.width = width;
    out.height = height;
    out.rebuild();
    Ok(out)
}

/// Global depth search range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthRange {
    d_min: f64,
    d_max: f64,
}

impl DepthRange {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_max > d_min && d_max.is_finite()) {
            return Err(MvsError::InvalidDepthRange { d_min, d_max });
        }
        Ok(Self { d_min, d_max })
    }

    pub fn min(&self) -> f64 {
        self.d_min
    }

    pub fn max(&self) -> f64 {
        self.d_max
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }
}

/// Depth planes spaced uniformly in inverse depth, with their metric spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthSamples {
    /// Ascending depths; first is `d_min`, last is `d_max`.
    pub depths: Vec<f64>,
    /// Metric interval of each sample: half the distance between its two
    /// neighbors, one-sided at the ends.
    pub intervals: Vec<f64>,
}

pub fn sample_inverse_depth(range: &DepthRange, count: usize) -> Result<DepthSamples> {
    if count < 2 {
        return Err(invalid_arg(format!(
            "need at least two depth samples, got {count}"
        )));
    }
    let inv_near = 1.0 / range.d_min;
    let inv_far = 1.0 / range.d_max;
    let step = (inv_near - inv_far) / (count - 1) as f64;
    let mut depths: Vec<f64> = (0..count)
        .map(|m| 1.0 / (inv_near - step * m as f64))
        .collect();
    depths[0] = range.d_min;
    depths[count - 1] = range.d_max;
    let intervals = metric_intervals(&depths);
    Ok(DepthSamples { depths, intervals })
}

/// Central-difference spacing `(d[m+1] - d[m-1]) / 2`, one-sided at the ends.
pub(crate) fn metric_intervals(depths: &[f64]) -> Vec<f64> {
    let n = depths.len();
    (0..n)
        .map(|m| {
            if m == 0 {
                depths[1] - depths[0]
            } else if m == n - 1 {
                depths[n - 1] - depths[n - 2]
            } else {
                (depths[m + 1] - depths[m - 1]) / 2.0
            }
        })
        .collect()
}

/// Homography taking reference pixels to source pixels for the
/// fronto-parallel plane at `depth` in the reference camera frame.
///
/// With `n = (0, 0, 1)` and the relative pose `X_src = R_rel X_ref + t_rel`,
/// `H = K_src (R_rel + t_rel n^T / depth) K_ref^-1`. Written in terms of the
/// source center `c` expressed in the reference frame this is
/// `K_src R_rel (I - c n^T / depth) K_ref^-1`.
pub fn plane_homography(ref_cam: &CameraView, src_cam: &CameraView, depth: f64) -> Result<Matrix3<f64>> {
    if !(depth > 0.0) {
        return Err(invalid_arg(format!("plane depth must be positive, got {depth}")));
    }
    let (r_rel, t_rel) = ref_cam.relative_pose(src_cam);
    let n = Vector3::new(0.0, 0.0, 1.0);
    let plane = r_rel + t_rel * n.transpose() / depth;
    Ok(src_cam.intrinsics * plane * ref_cam.intrinsics_inv)
}

/// Applies a plane homography to a pixel.
///
/// Returns `None` when the plane point is at infinity or behind the source
/// camera (non-positive homogeneous coordinate).
#[inline]
pub fn apply_homography(h: &Matrix3<f64>, x: f64, y: f64) -> Option<(f64, f64)> {
    let p = h * Vector3::new(x, y, 1.0);
    if !(p.z > f64::EPSILON) || !p.z.is_finite() {
        return None;
    }
    Some((p.x / p.z, p.y / p.z))
}

/// Resamples `src_map` on its own pixel grid through `h`.
///
/// Each output pixel bilinearly samples the source at its homography image.
/// Samples falling outside the source are flagged invalid and zeroed.
pub fn warp_map(src_map: &FeatureMap, h: &Matrix3<f64>) -> FeatureMap {
    warp_map_to(src_map, h, src_map.width, src_map.height)
}

/// Like [`warp_map`] with an explicit output size.
pub fn warp_map_to(src_map: &FeatureMap, h: &Matrix3<f64>, width: usize, height: usize) -> FeatureMap {
    let d = src_map.channels;
    let mut out = FeatureMap::zeros(width, height, d);
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            let Some((sx, sy)) = apply_homography(h, x as f64, y as f64) else {
                continue;
            };
            let dst = &mut out.values[idx * d..(idx + 1) * d];
            out.valid[idx] = src_map.sample_bilinear(sx, sy, dst);
        }
    }
    out
}
