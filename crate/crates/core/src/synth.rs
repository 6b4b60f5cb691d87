//! Procedural multi-view scenes with analytic depth and visibility.
//!
//! All cameras look along +z. The reference (view 0) sits at the origin;
//! the others are spread on a circle in the xy plane with small height
//! offsets and rolls about their optical axis, so planes `z = const` keep a
//! constant depth in every view. Surfaces carry a band-limited 3D texture
//! evaluated at the hit point, which keeps the views photo-consistent.

use std::str::FromStr;

use nalgebra::{Matrix3, Point2, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::geometry::{CameraView, DepthRange};
use crate::grid::{DepthMap, Grid, Image};
use crate::scene::SceneBundle;

/// Relative depth jump between neighboring pixels treated as a discontinuity.
const DISCONTINUITY_RATIO: f64 = 0.05;
const VISIBILITY_TOLERANCE: f64 = 1e-6;
const SUPERSAMPLES: usize = 3;

pub const SCENE_DEPTH_MIN: f64 = 2.5;
pub const SCENE_DEPTH_MAX: f64 = 12.0;
/// Distance of the source cameras from the reference.
pub const BASELINE: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Finite fronto-parallel rectangle in front of a background plane.
    TwoPlane,
    /// Axis-aligned box standing on the background plane.
    StepBox,
    /// Sphere in front of the background plane.
    Sphere,
}

impl FromStr for Preset {
    type Err = crate::error::MvsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-plane" => Ok(Preset::TwoPlane),
            "step-box" => Ok(Preset::StepBox),
            "sphere" => Ok(Preset::Sphere),
            other => Err(invalid_arg(format!(
                "unknown preset `{other}` (expected two-plane, step-box or sphere)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthOptions {
    pub preset: Preset,
    /// Image width and height in pixels.
    pub size: usize,
    /// Total number of views including the reference.
    pub views: usize,
    /// Standard deviation of additive intensity noise.
    pub noise: f64,
    pub seed: u64,
}

impl SynthOptions {
    pub fn new(preset: Preset, size: usize, views: usize) -> Self {
        Self {
            preset,
            size,
            views,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// A rendered scene together with its analytic per-view masks.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub bundle: SceneBundle,
    /// Pixels whose surface point is hidden in no other view that frames it,
    /// and framed by at least one.
    pub non_occluded: Vec<Vec<bool>>,
    /// Pixels within `boundary_radius` of a depth discontinuity.
    pub boundary: Vec<Vec<bool>>,
    pub boundary_radius: usize,
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Plane { z: f64 },
    Rect { z: f64, x: (f64, f64), y: (f64, f64) },
    Cuboid { min: Point3<f64>, max: Point3<f64> },
    Ball { center: Point3<f64>, radius: f64 },
}

impl Shape {
    /// Smallest ray parameter `s > eps` with `origin + s * dir` on the shape.
    fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match *self {
            Shape::Plane { z } => {
                let s = (z - origin.z) / dir.z;
                (s > EPS && s.is_finite()).then_some(s)
            }
            Shape::Rect { z, x, y } => {
                let s = (z - origin.z) / dir.z;
                let p = origin + dir * s;
                (s > EPS && s.is_finite() && p.x >= x.0 && p.x <= x.1 && p.y >= y.0 && p.y <= y.1).then_some(s)
            }
            Shape::Cuboid { min, max } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    let inv = 1.0 / dir[a];
                    let (mut ta, mut tb) = ((min[a] - origin[a]) * inv, (max[a] - origin[a]) * inv);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                }
                (t0 <= t1 && t0 > EPS).then_some(t0)
            }
            Shape::Ball { center, radius } => {
                let oc = origin - center;
                let a = dir.norm_squared();
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let s = (-b - disc.sqrt()) / a;
                (s > EPS).then_some(s)
            }
        }
    }
}

fn shapes(preset: Preset) -> Vec<Shape> {
    let background = Shape::Plane { z: 7.0 };
    match preset {
        Preset::TwoPlane => vec![
            background,
            Shape::Rect {
                z: 5.0,
                x: (-1.05, 0.85),
                y: (-0.95, 0.75),
            },
        ],
        Preset::StepBox => vec![
            background,
            Shape::Cuboid {
                min: Point3::new(-1.15, -0.9, 5.0),
                max: Point3::new(0.95, 0.8, 7.0),
            },
        ],
        Preset::Sphere => vec![
            background,
            Shape::Ball {
                center: Point3::new(0.15, -0.1, 5.4),
                radius: 1.2,
            },
        ],
    }
}

/// Sum of randomly oriented sinusoids over several octaves, scaled to the
/// pixel footprint at the scene's mid depth.
struct Texture {
    waves: Vec<(Vector3<f64>, f64, f64)>,
}

impl Texture {
    fn new(rng: &mut ChaCha8Rng, size: usize) -> Self {
        let pixel = 6.0 / size as f64;
        let mut waves = Vec::new();
        for octave in 0..7 {
            let wavelength_px = 5.0 * 1.5f64.powi(octave);
            for _ in 0..3 {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let tilt: f64 = rng.random_range(-0.3..0.3);
                let dir = Vector3::new(angle.cos(), angle.sin(), tilt).normalize();
                let k = std::f64::consts::TAU / (wavelength_px * pixel);
                waves.push((dir * k, rng.random_range(0.0..std::f64::consts::TAU), 0.045));
            }
        }
        Self { waves }
    }

    fn eval(&self, p: &Point3<f64>) -> f64 {
        0.5 + self
            .waves
            .iter()
            .map(|(k, phase, amp)| amp * (k.dot(&p.coords) + phase).sin())
            .sum::<f64>()
    }
}

fn cameras(opts: &SynthOptions, rng: &mut ChaCha8Rng) -> Result<Vec<CameraView>> {
    let f = opts.size as f64;
    let mut cams = vec![CameraView::simple(f, opts.size, opts.size, Matrix3::identity(), Vector3::zeros())?];
    let sources = opts.views - 1;
    for i in 0..sources {
        let angle = std::f64::consts::TAU * i as f64 / sources as f64 + 0.35;
        let radius = BASELINE * rng.random_range(0.85..1.0);
        let center = Vector3::new(radius * angle.cos(), radius * angle.sin(), rng.random_range(-0.15..0.15));
        let roll = rng.random_range(-4.0f64..4.0).to_radians();
        let rot = *Rotation3::from_axis_angle(&Vector3::z_axis(), roll).matrix();
        cams.push(CameraView::simple(f, opts.size, opts.size, rot, -(rot * center))?);
    }
    Ok(cams)
}

/// Camera depth and surface point of the first hit along a pixel ray.
fn cast(shapes: &[Shape], cam: &CameraView, u: f64, v: f64) -> Option<(f64, Point3<f64>)> {
    let center = cam.center();
    let dir_cam = cam.intrinsics_inverse() * Vector3::new(u, v, 1.0);
    let dir = cam.rotation().transpose() * dir_cam;
    // the camera-frame z of `dir_cam` is 1, so the ray parameter is depth
    shapes
        .iter()
        .filter_map(|s| s.intersect(&center, &dir))
        .min_by(f64::total_cmp)
        .map(|s| (s, center + dir * s))
}

fn render(shapes: &[Shape], cam: &CameraView, texture: &Texture, noise: Option<(&Normal<f64>, u64)>) -> Image {
    let (w, h) = (cam.width(), cam.height());
    let n = SUPERSAMPLES as f64;
    let mut img = Image::filled(w, h, 0.0);
    img.data.par_iter_mut().enumerate().for_each(|(p, out)| {
        let (u, v) = ((p % w) as f64, (p / w) as f64);
        let mut acc = 0.0;
        for sy in 0..SUPERSAMPLES {
            for sx in 0..SUPERSAMPLES {
                let du = (sx as f64 + 0.5) / n - 0.5;
                let dv = (sy as f64 + 0.5) / n - 0.5;
                acc += cast(shapes, cam, u + du, v + dv).map_or(0.0, |(_, x)| texture.eval(&x));
            }
        }
        *out = acc / (n * n);
    });
    if let Some((dist, seed)) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        img.data.iter_mut().for_each(|v| *v += dist.sample(&mut rng));
    }
    img.data
        .iter_mut()
        .for_each(|v| *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
    img
}

fn depth_map(shapes: &[Shape], cam: &CameraView) -> DepthMap {
    let w = cam.width();
    let data = (0..w * cam.height())
        .into_par_iter()
        .map(|p| {
            cast(shapes, cam, (p % w) as f64, (p / w) as f64)
                .map_or(f64::NAN, |(s, _)| s as f32 as f64)
        })
        .collect();
    Grid {
        width: w,
        height: cam.height(),
        data,
    }
}

fn non_occluded_mask(shapes: &[Shape], cams: &[CameraView], view: usize) -> Vec<bool> {
    let cam = &cams[view];
    let w = cam.width();
    (0..w * cam.height())
        .into_par_iter()
        .map(|p| {
            let Some((_, x)) = cast(shapes, cam, (p % w) as f64, (p / w) as f64) else {
                return false;
            };
            let mut seen = 0;
            for (j, other) in cams.iter().enumerate() {
                if j == view {
                    continue;
                }
                let Ok((px, z)) = other.project(&x) else {
                    continue;
                };
                let inside = px.x >= 0.0
                    && px.y >= 0.0
                    && px.x <= (other.width() - 1) as f64
                    && px.y <= (other.height() - 1) as f64;
                if !inside {
                    continue;
                }
                let visible = cast(shapes, other, px.x, px.y)
                    .is_some_and(|(s, _)| (s - z).abs() <= VISIBILITY_TOLERANCE * z);
                if !visible {
                    return false;
                }
                seen += 1;
            }
            seen > 0
        })
        .collect()
}

/// Pixels within Chebyshev distance `radius` of a neighbor pair whose
/// depths differ by more than `DISCONTINUITY_RATIO`.
pub fn boundary_mask(depth: &DepthMap, radius: usize) -> Vec<bool> {
    let (w, h) = (depth.width, depth.height);
    let jump = |a: f64, b: f64| !(a.is_finite() && b.is_finite()) || (a - b).abs() > DISCONTINUITY_RATIO * a.min(b);
    let mut edge = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if x + 1 < w && jump(d, depth.get(x + 1, y)) {
                edge[y * w + x] = true;
                edge[y * w + x + 1] = true;
            }
            if y + 1 < h && jump(d, depth.get(x, y + 1)) {
                edge[y * w + x] = true;
                edge[(y + 1) * w + x] = true;
            }
        }
    }
    let r = radius as isize;
    (0..w * h)
        .map(|p| {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (xx, yy) = (x + dx, y + dy);
                    xx >= 0 && yy >= 0 && xx < w as isize && yy < h as isize && edge[yy as usize * w + xx as usize]
                })
            })
        })
        .collect()
}

/// Renders a preset. The boundary radius is 4 px, half the footprint of a
/// coarsest-level pixel with the default four levels.
pub fn synth_scene(opts: &SynthOptions) -> Result<SyntheticScene> {
    if opts.size < 32 {
        return Err(invalid_arg("synthetic scenes need at least 32x32 pixels"));
    }
    if opts.views < 2 {
        return Err(invalid_arg("synthetic scenes need at least two views"));
    }
    if !(opts.noise >= 0.0) {
        return Err(invalid_arg("noise must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let texture = Texture::new(&mut rng, opts.size);
    let cams = cameras(opts, &mut rng)?;
    let shapes = shapes(opts.preset);
    let dist = Normal::new(0.0, opts.noise.max(f64::MIN_POSITIVE)).map_err(|e| invalid_arg(e.to_string()))?;
    let images = cams
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let noise = (opts.noise > 0.0).then_some((&dist, opts.seed.wrapping_mul(1_000_003).wrapping_add(i as u64)));
            render(&shapes, c, &texture, noise)
        })
        .collect();
    let depths: Vec<DepthMap> = cams.iter().map(|c| depth_map(&shapes, c)).collect();
    let radius = 4;
    let boundary = depths.iter().map(|d| boundary_mask(d, radius)).collect();
    let non_occluded = (0..cams.len()).map(|v| non_occluded_mask(&shapes, &cams, v)).collect();
    let bundle = SceneBundle::new(
        images,
        cams,
        Some(depths),
        DepthRange::new(SCENE_DEPTH_MIN, SCENE_DEPTH_MAX)?,
    )?;
    Ok(SyntheticScene {
        bundle,
        non_occluded,
        boundary,
        boundary_radius: radius,
    })
}

/// Pixel where `point` lands in `cam`, if in front of it.
pub fn reproject(cam: &CameraView, point: &Point3<f64>) -> Option<Point2<f64>> {
    cam.project(point).ok().map(|(p, _)| p)
}
