//! File formats: MVSNet camera files, PFM depth maps, ASCII PLY clouds,
//! 8-bit images, per-level distribution volumes and scene directories.
//!
//! Every writer goes through [`atomic_write`], so readers never observe a
//! partially written file.

mod cam;
mod image_io;
mod pfm;
mod ply;
mod scene;
mod volume;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use cam::{format_cam, parse_cam, read_cam, write_cam, CamFile, DEFAULT_PLANE_COUNT};
pub use image_io::{read_image, write_image};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use ply::{read_ply, write_ply};
pub use scene::{load_scene, save_scene, ScenePaths};
pub use volume::{read_volume, write_volume, LevelDistribution};

use crate::error::Result;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
