//! Single-channel raster shared by images and depth maps.

use crate::error::{MvsError, Result};

/// Row-major single-channel raster of `f64` values.
///
/// Depth maps use `NaN` to mark pixels without a depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// Grayscale image with intensities nominally in `[0, 1]`.
pub type Image = Grid;

/// Per-pixel depth in scene units; `NaN` marks an invalid pixel.
pub type DepthMap = Grid;

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(MvsError::ShapeMismatch(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y).is_finite()
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| v.is_finite()).count()
    }

    /// Picks the pixel at `(x * 2^level, y * 2^level)` for every output pixel.
    ///
    /// Matches the decimation used by the image pyramid, so level-`l` pixel
    /// `i` sits exactly on full-resolution coordinate `i * 2^l`.
    pub fn decimate(&self, level: usize) -> Grid {
        let step = 1usize << level;
        let w = self.width.div_ceil(step);
        let h = self.height.div_ceil(step);
        Grid::from_fn(w, h, |x, y| self.get(x * step, y * step))
    }

    /// Minimum and maximum over finite values.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        self.data
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}
