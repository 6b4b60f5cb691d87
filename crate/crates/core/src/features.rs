//! Image pyramids and hand-crafted multi-channel descriptors.
//!
//! The descriptor stands in for a learned feature extractor: eight channels
//! per pixel, each normalized to zero mean and unit variance over the image.

use rayon::prelude::*;

use crate::error::{invalid_arg, Result};
use crate::grid::Image;

/// Number of descriptor channels produced by [`extract_features`].
pub const FEATURE_CHANNELS: usize = 8;

const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

// channels whose spread falls below this are treated as constant
const CONSTANT_CHANNEL_STD: f64 = 1e-9;

/// Multi-channel descriptor map with a per-pixel validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Interleaved `height x width x channels`.
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FeatureMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            values: vec![0.0; width * height * channels],
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.values[i..i + self.channels]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Bilinear sample at continuous `(x, y)` into `out`.
    ///
    /// Returns `false` (leaving `out` zeroed) when the point lies outside
    /// `[0, width-1] x [0, height-1]` or touches an invalid pixel. Integer
    /// coordinates copy the stored value bit-for-bit.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|v| *v = 0.0);
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return false;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let tx = x - x0 as f64;
        let ty = y - y0 as f64;
        let x1 = if tx > 0.0 { x0 + 1 } else { x0 };
        let y1 = if ty > 0.0 { y0 + 1 } else { y0 };
        if !(self.is_valid(x0, y0)
            && self.is_valid(x1, y0)
            && self.is_valid(x0, y1)
            && self.is_valid(x1, y1))
        {
            return false;
        }
        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x1, y0);
        let p01 = self.pixel(x0, y1);
        let p11 = self.pixel(x1, y1);
        for c in 0..self.channels {
            let top = if tx > 0.0 { p00[c] * (1.0 - tx) + p10[c] * tx } else { p00[c] };
            let bottom = if tx > 0.0 { p01[c] * (1.0 - tx) + p11[c] * tx } else { p01[c] };
            out[c] = if ty > 0.0 { top * (1.0 - ty) + bottom * ty } else { top };
        }
        true
    }
}

/// Descriptor maps for pyramid levels `0..=L`, level 0 at full resolution.
#[derive(Clone, Debug)]
pub struct FeaturePyramid {
    pub levels: Vec<FeatureMap>,
}

impl FeaturePyramid {
    /// Builds an image pyramid with `coarsest + 1` levels and extracts
    /// descriptors on every level.
    pub fn from_image(image: &Image, coarsest: usize) -> Result<Self> {
        let images = build_image_pyramid(image, coarsest)?;
        let levels = images
            .iter()
            .map(extract_features)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    pub fn level(&self, l: usize) -> &FeatureMap {
        &self.levels[l]
    }

    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }
}

/// RGB to luma with fixed Rec. 601 weights.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[inline]
fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

/// Separable 5-tap binomial blur with mirrored borders.
pub fn binomial_blur(image: &Image) -> Image {
    let (w, h) = (image.width, image.height);
    let mut tmp = Image::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in BINOMIAL5.iter().enumerate() {
                acc += wk * image.get(reflect101(x as isize + k as isize - 2, w), y);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Image::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in BINOMIAL5.iter().enumerate() {
                acc += wk * tmp.get(x, reflect101(y as isize + k as isize - 2, h));
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Returns `levels + 1` images; each level is the binomial-blurred previous
/// level decimated to its even pixels, so sizes are `ceil(n / 2)`.
pub fn build_image_pyramid(image: &Image, levels: usize) -> Result<Vec<Image>> {
    if image.width == 0 || image.height == 0 {
        return Err(invalid_arg("empty image"));
    }
    let mut out = Vec::with_capacity(levels + 1);
    out.push(image.clone());
    for _ in 0..levels {
        let prev = out.last().expect("pyramid has a base level");
        let blurred = binomial_blur(prev);
        let w = prev.width.div_ceil(2);
        let h = prev.height.div_ceil(2);
        out.push(Image::from_fn(w, h, |x, y| blurred.get(2 * x, 2 * y)));
    }
    Ok(out)
}

fn clamp_get(img: &Image, x: isize, y: isize) -> f64 {
    let cx = x.clamp(0, img.width as isize - 1) as usize;
    let cy = y.clamp(0, img.height as isize - 1) as usize;
    img.get(cx, cy)
}

/// The four raw descriptor channels of one scale, interleaved per pixel.
fn raw_channels(img: &Image, out: &mut [f64], offset: usize) {
    let (w, h) = (img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let mut window = [0.0; 9];
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    window[k] = clamp_get(img, xi + dx, yi + dy);
                    k += 1;
                }
            }
            let mean = window.iter().sum::<f64>() / 9.0;
            let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
            let center = img.get(x, y);
            let gx = (clamp_get(img, xi + 1, yi) - clamp_get(img, xi - 1, yi)) / 2.0;
            let gy = (clamp_get(img, xi, yi + 1) - clamp_get(img, xi, yi - 1)) / 2.0;
            let base = (y * w + x) * FEATURE_CHANNELS + offset;
            out[base] = center - mean;
            out[base + 1] = gx;
            out[base + 2] = gy;
            out[base + 3] = var.sqrt();
        }
    }
}

/// Eight-channel descriptor: mean-centered intensity, x/y central
/// gradients and 3x3 standard deviation, on the image and on its binomial
/// blur. Every channel is standardized over the image; constant channels
/// become zero.
pub fn extract_features(image: &Image) -> Result<FeatureMap> {
    if image.width < 3 || image.height < 3 {
        return Err(invalid_arg(format!(
            "image {}x{} is smaller than the 3x3 descriptor support",
            image.width, image.height
        )));
    }
    let (w, h) = (image.width, image.height);
    let mut values = vec![0.0; w * h * FEATURE_CHANNELS];
    raw_channels(image, &mut values, 0);
    raw_channels(&binomial_blur(image), &mut values, 4);

    let n = (w * h) as f64;
    let stats: Vec<(f64, f64)> = (0..FEATURE_CHANNELS)
        .into_par_iter()
        .map(|c| {
            let mean = values.iter().skip(c).step_by(FEATURE_CHANNELS).sum::<f64>() / n;
            let var = values
                .iter()
                .skip(c)
                .step_by(FEATURE_CHANNELS)
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt())
        })
        .collect();
    for px in values.chunks_mut(FEATURE_CHANNELS) {
        for (c, v) in px.iter_mut().enumerate() {
            let (mean, std) = stats[c];
            *v = if std > CONSTANT_CHANNEL_STD { (*v - mean) / std } else { 0.0 };
        }
    }
    Ok(FeatureMap {
        width: w,
        height: h,
        channels: FEATURE_CHANNELS,
        values,
        valid: vec![true; w * h],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn pyramid_of_constant_is_constant() {
        let img = Image::filled(37, 20, 0.42);
        let levels = build_image_pyramid(&img, 3).unwrap();
        assert_eq!(levels.len(), 4);
        assert_eq!((levels[3].width, levels[3].height), (5, 3));
        for l in &levels {
            assert!(l.data.iter().all(|v| (v - 0.42).abs() < 1e-12));
        }
    }

    #[test]
    fn pyramid_level_zero_only() {
        let img = random_image(6, 5, 1);
        let levels = build_image_pyramid(&img, 0).unwrap();
        assert_eq!(levels, vec![img]);
    }

    #[test]
    fn checkerboard_blurs_to_mid_gray() {
        // 1-D response of [1,4,6,4,1]/16 to an alternating signal is 8/16.
        let img = Image::from_fn(4, 4, |x, y| ((x + y) % 2) as f64);
        let levels = build_image_pyramid(&img, 1).unwrap();
        assert_eq!((levels[1].width, levels[1].height), (2, 2));
        for v in &levels[1].data {
            assert!((v - 0.5).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn constant_image_gives_zero_features() {
        let f = extract_features(&Image::filled(9, 7, 0.3)).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_ramp_gradients() {
        let img = Image::from_fn(12, 10, |x, _| 0.05 * x as f64);
        let raw = {
            let mut v = vec![0.0; 12 * 10 * FEATURE_CHANNELS];
            raw_channels(&img, &mut v, 0);
            v
        };
        for y in 0..10 {
            for x in 1..11 {
                let p = &raw[(y * 12 + x) * FEATURE_CHANNELS..];
                assert!((p[1] - 0.05).abs() < 1e-12);
                assert_eq!(p[2], 0.0);
            }
        }
        // after standardization the interior x-gradient is still constant and
        // positive, the y-gradient channel is identically zero
        let f = extract_features(&img).unwrap();
        let g0 = f.pixel(5, 5)[1];
        assert!(g0 > 0.0);
        for y in 0..10 {
            for x in 1..11 {
                assert!((f.pixel(x, y)[1] - g0).abs() < 1e-9);
                assert_eq!(f.pixel(x, y)[2], 0.0);
            }
        }
    }

    #[test]
    fn channels_are_standardized() {
        let f = extract_features(&random_image(8, 8, 7)).unwrap();
        for c in 0..FEATURE_CHANNELS {
            let vals: Vec<f64> = f.values.iter().skip(c).step_by(FEATURE_CHANNELS).copied().collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-9, "channel {c} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "channel {c} var {var}");
        }
    }

    #[test]
    fn rejects_tiny_images() {
        assert!(extract_features(&Image::filled(2, 5, 0.0)).is_err());
    }

    #[test]
    fn photometric_offset_invariance() {
        let img = random_image(16, 12, 3);
        let shifted = Image::from_fn(16, 12, |x, y| img.get(x, y) + 0.25);
        let a = extract_features(&img).unwrap();
        let b = extract_features(&shifted).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn raw_channels_are_translation_equivariant() {
        // Standardization uses whole-image statistics, so the check runs on
        // the raw channels where shifting the content shifts the response.
        let big = random_image(30, 20, 11);
        let k = 3;
        let a_img = Image::from_fn(24, 20, |x, y| big.get(x, y));
        let b_img = Image::from_fn(24, 20, |x, y| big.get(x + k, y));
        let mut a = vec![0.0; 24 * 20 * FEATURE_CHANNELS];
        let mut b = a.clone();
        raw_channels(&binomial_blur(&a_img), &mut a, 0);
        raw_channels(&binomial_blur(&b_img), &mut b, 0);
        for y in 3..17 {
            for x in 3..(24 - k - 3) {
                for c in 0..4 {
                    let va = a[(y * 24 + x + k) * FEATURE_CHANNELS + c];
                    let vb = b[(y * 24 + x) * FEATURE_CHANNELS + c];
                    assert!((va - vb).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bilinear_identity_and_half_pixel() {
        let mut f = FeatureMap::zeros(4, 3, 1);
        for y in 0..3 {
            for x in 0..4 {
                f.values[y * 4 + x] = x as f64 * 2.0 + y as f64 * 10.0;
                f.valid[y * 4 + x] = true;
            }
        }
        let mut out = [0.0];
        assert!(f.sample_bilinear(1.5, 1.0, &mut out));
        assert!((out[0] - 13.0).abs() < 1e-12);
        assert!(f.sample_bilinear(3.0, 2.0, &mut out));
        assert_eq!(out[0], 26.0);
        assert!(!f.sample_bilinear(3.01, 0.0, &mut out));
        assert!(!f.sample_bilinear(-0.01, 0.0, &mut out));
    }
}
