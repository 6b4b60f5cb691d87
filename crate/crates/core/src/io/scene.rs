//! Scene directories in the MVSNet layout.
//!
//! ```text
//! images/00000000.png
//! cams/00000000_cam.txt
//! depths/00000000.pfm   (optional ground truth)
//! ```

use std::path::{Path, PathBuf};

use crate::error::{invalid_arg, MvsError, Result};
use crate::geometry::DepthRange;
use crate::scene::SceneBundle;

use super::{read_cam, read_image, read_pfm, write_cam, write_image, write_pfm, CamFile};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// File locations of one view inside a scene directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePaths {
    pub root: PathBuf,
}

impl ScenePaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn image(&self, view: usize) -> PathBuf {
        self.root.join("images").join(format!("{view:08}.png"))
    }

    pub fn camera(&self, view: usize) -> PathBuf {
        self.root.join("cams").join(format!("{view:08}_cam.txt"))
    }

    pub fn depth(&self, view: usize) -> PathBuf {
        self.root.join("depths").join(format!("{view:08}.pfm"))
    }
}

/// Image files under `images/`, sorted by name.
fn list_images(root: &Path) -> Result<Vec<PathBuf>> {
    let dir = root.join("images");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| MvsError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every view; the depth range spans all camera files.
pub fn load_scene(root: &Path) -> Result<SceneBundle> {
    let images_paths = list_images(root)?;
    if images_paths.is_empty() {
        return Err(invalid_arg(format!("no images under {}", root.join("images").display())));
    }
    let has_depths = root.join("depths").is_dir();
    let mut images = Vec::new();
    let mut cameras = Vec::new();
    let mut depths = Vec::new();
    let (mut near, mut far) = (f64::INFINITY, f64::NEG_INFINITY);
    for (view, img_path) in images_paths.iter().enumerate() {
        let stem = img_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let cam_path = root.join("cams").join(format!("{stem}_cam.txt"));
        if !cam_path.is_file() {
            return Err(MvsError::MissingFile {
                what: "camera file",
                view,
                path: cam_path,
            });
        }
        let image = read_image(img_path)?;
        let cam = read_cam(&cam_path)?;
        near = near.min(cam.depth_min);
        far = far.max(cam.far());
        cameras.push(cam.camera(image.width, image.height)?);
        images.push(image);
        if has_depths {
            let depth_path = root.join("depths").join(format!("{stem}.pfm"));
            if !depth_path.is_file() {
                return Err(MvsError::MissingFile {
                    what: "depth map",
                    view,
                    path: depth_path,
                });
            }
            depths.push(read_pfm(&depth_path)?);
        }
    }
    SceneBundle::new(images, cameras, has_depths.then_some(depths), DepthRange::new(near, far)?)
}

/// Writes images, camera files (with the global depth range) and any
/// ground-truth depth maps.
pub fn save_scene(root: &Path, scene: &SceneBundle) -> Result<()> {
    let paths = ScenePaths::new(root);
    let (near, far) = (scene.depth_range.min(), scene.depth_range.max());
    for (view, (img, cam)) in scene.images.iter().zip(&scene.cameras).enumerate() {
        write_image(&paths.image(view), img)?;
        write_cam(&paths.camera(view), &CamFile::from_camera(cam, near, far))?;
        if let Some(gt) = &scene.gt_depths {
            write_pfm(&paths.depth(view), &gt[view])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraView;
    use crate::grid::{DepthMap, Image};
    use nalgebra::{Matrix3, Vector3};

    fn scene() -> SceneBundle {
        let images = (0..3)
            .map(|v| Image::from_fn(6, 4, |x, y| ((x + 3 * y + 7 * v) % 256) as f64 / 255.0))
            .collect();
        let cameras = (0..3)
            .map(|v| CameraView::simple(10.0, 6, 4, Matrix3::identity(), Vector3::new(0.1 * v as f64, 0.0, 0.0)).unwrap())
            .collect();
        let depths = (0..3).map(|v| DepthMap::filled(6, 4, 2.5 + v as f64)).collect();
        SceneBundle::new(images, cameras, Some(depths), DepthRange::new(1.5, 6.0).unwrap()).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let s = scene();
        save_scene(dir.path(), &s).unwrap();
        assert_eq!(load_scene(dir.path()).unwrap(), s);
    }

    #[test]
    fn missing_camera_names_the_view() {
        let dir = tempfile::tempdir().unwrap();
        save_scene(dir.path(), &scene()).unwrap();
        std::fs::remove_file(ScenePaths::new(dir.path()).camera(1)).unwrap();
        match load_scene(dir.path()) {
            Err(MvsError::MissingFile { view, what, .. }) => {
                assert_eq!(view, 1);
                assert_eq!(what, "camera file");
            }
            other => panic!("{other:?}"),
        }
    }
}
