//! Calibrated multi-view input: images, cameras, optional ground truth.

use crate::error::{invalid_arg, MvsError, Result};
use crate::geometry::{CameraView, DepthRange};
use crate::grid::{DepthMap, Image};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub images: Vec<Image>,
    pub cameras: Vec<CameraView>,
    pub gt_depths: Option<Vec<DepthMap>>,
    pub depth_range: DepthRange,
}

impl SceneBundle {
    /// Checks that every view shares one image size matching its camera.
    pub fn new(
        images: Vec<Image>,
        cameras: Vec<CameraView>,
        gt_depths: Option<Vec<DepthMap>>,
        depth_range: DepthRange,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(invalid_arg("scene has no views"));
        }
        if images.len() != cameras.len() {
            return Err(MvsError::ShapeMismatch(format!(
                "{} images vs {} cameras",
                images.len(),
                cameras.len()
            )));
        }
        let (w, h) = (images[0].width, images[0].height);
        for (i, (img, cam)) in images.iter().zip(&cameras).enumerate() {
            if (img.width, img.height) != (w, h) || (cam.width(), cam.height()) != (w, h) {
                return Err(MvsError::ShapeMismatch(format!(
                    "view {i}: image {}x{}, camera {}x{}, expected {w}x{h}",
                    img.width,
                    img.height,
                    cam.width(),
                    cam.height()
                )));
            }
        }
        if let Some(gt) = &gt_depths {
            if gt.len() != images.len() || gt.iter().any(|d| (d.width, d.height) != (w, h)) {
                return Err(MvsError::ShapeMismatch("ground-truth depth maps do not match the views".into()));
            }
        }
        Ok(Self {
            images,
            cameras,
            gt_depths,
            depth_range,
        })
    }

    pub fn view_count(&self) -> usize {
        self.images.len()
    }

    pub fn width(&self) -> usize {
        self.images[0].width
    }

    pub fn height(&self) -> usize {
        self.images[0].height
    }
}
