//! MVSNet `cam.txt` camera files.
//!
//! ```text
//! extrinsic
//! r11 r12 r13 t1
//! r21 r22 r23 t2
//! r31 r32 r33 t3
//! 0 0 0 1
//!
//! intrinsic
//! fx 0 cx
//! 0 fy cy
//! 0 0 1
//!
//! d_min d_interval [plane_count [d_max]]
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{MvsError, Result};
use crate::geometry::CameraView;

use super::atomic_write;

/// Plane count assumed when a file gives only `d_min d_interval`.
pub const DEFAULT_PLANE_COUNT: usize = 192;

#[derive(Clone, Debug, PartialEq)]
pub struct CamFile {
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub depth_min: f64,
    pub depth_interval: f64,
    pub plane_count: Option<usize>,
    pub depth_max: Option<f64>,
}

impl CamFile {
    pub fn from_camera(cam: &CameraView, depth_min: f64, depth_max: f64) -> Self {
        let planes = DEFAULT_PLANE_COUNT;
        Self {
            intrinsics: *cam.intrinsics(),
            rotation: *cam.rotation(),
            translation: *cam.translation(),
            depth_min,
            depth_interval: (depth_max - depth_min) / (planes - 1) as f64,
            plane_count: Some(planes),
            depth_max: Some(depth_max),
        }
    }

    /// Far bound: explicit, else `d_min + d_interval * (planes - 1)`.
    pub fn far(&self) -> f64 {
        self.depth_max.unwrap_or_else(|| {
            let n = self.plane_count.unwrap_or(DEFAULT_PLANE_COUNT);
            self.depth_min + self.depth_interval * (n.max(2) - 1) as f64
        })
    }

    pub fn camera(&self, width: usize, height: usize) -> Result<CameraView> {
        CameraView::new(self.intrinsics, self.rotation, self.translation, width, height)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> MvsError {
    MvsError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses camera text; `path` only labels diagnostics.
pub fn parse_cam(text: &str, path: &Path) -> Result<CamFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let last_line = text.lines().count().max(1);

    let expect_header = |name: &str, lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<()> {
        match lines.next() {
            Some((_, l)) if l.eq_ignore_ascii_case(name) => Ok(()),
            Some((n, l)) => Err(parse_err(path, n, format!("expected `{name}`, found `{l}`"))),
            None => Err(parse_err(path, last_line, format!("missing `{name}` section"))),
        }
    };
    let numbers = |lines: &mut dyn Iterator<Item = (usize, &str)>, count: usize, what: &str| -> Result<(usize, Vec<f64>)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err(path, last_line, format!("missing {what}")))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, n, format!("`{t}` is not a number"))))
            .collect::<Result<_>>()?;
        if vals.len() != count {
            return Err(parse_err(path, n, format!("{what}: expected {count} values, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, n, format!("{what}: non-finite value")));
        }
        Ok((n, vals))
    };

    expect_header("extrinsic", &mut lines)?;
    let mut rotation = Matrix3::zeros();
    let mut translation = Vector3::zeros();
    for r in 0..4 {
        let (n, row) = numbers(&mut lines, 4, "extrinsic row")?;
        if r < 3 {
            for c in 0..3 {
                rotation[(r, c)] = row[c];
            }
            translation[r] = row[3];
        } else if row != [0.0, 0.0, 0.0, 1.0] {
            return Err(parse_err(path, n, "last extrinsic row must be `0 0 0 1`"));
        }
    }
    expect_header("intrinsic", &mut lines)?;
    let mut intrinsics = Matrix3::zeros();
    for r in 0..3 {
        let (_, row) = numbers(&mut lines, 3, "intrinsic row")?;
        for c in 0..3 {
            intrinsics[(r, c)] = row[c];
        }
    }
    let (n, l) = lines
        .next()
        .ok_or_else(|| parse_err(path, last_line, "missing depth line"))?;
    let vals: Vec<f64> = l
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, n, format!("`{t}` is not a number"))))
        .collect::<Result<_>>()?;
    if !(2..=4).contains(&vals.len()) {
        return Err(parse_err(path, n, format!("depth line needs 2 to 4 values, found {}", vals.len())));
    }
    let plane_count = match vals.get(2) {
        Some(&v) if v >= 2.0 && v.fract() == 0.0 => Some(v as usize),
        Some(&v) => return Err(parse_err(path, n, format!("plane count `{v}` must be an integer >= 2"))),
        None => None,
    };
    let cam = CamFile {
        intrinsics,
        rotation,
        translation,
        depth_min: vals[0],
        depth_interval: vals[1],
        plane_count,
        depth_max: vals.get(3).copied(),
    };
    if !(cam.depth_min > 0.0 && cam.far() > cam.depth_min) {
        return Err(parse_err(
            path,
            n,
            format!("depth range [{}, {}] is empty or non-positive", cam.depth_min, cam.far()),
        ));
    }
    if let Some((n, l)) = lines.next() {
        return Err(parse_err(path, n, format!("unexpected trailing content `{l}`")));
    }
    Ok(cam)
}

pub fn format_cam(cam: &CamFile) -> String {
    let mut s = String::from("extrinsic\n");
    for r in 0..3 {
        let _ = writeln!(
            s,
            "{:?} {:?} {:?} {:?}",
            cam.rotation[(r, 0)],
            cam.rotation[(r, 1)],
            cam.rotation[(r, 2)],
            cam.translation[r]
        );
    }
    s.push_str("0 0 0 1\n\nintrinsic\n");
    for r in 0..3 {
        let _ = writeln!(s, "{:?} {:?} {:?}", cam.intrinsics[(r, 0)], cam.intrinsics[(r, 1)], cam.intrinsics[(r, 2)]);
    }
    let _ = write!(s, "\n{:?} {:?}", cam.depth_min, cam.depth_interval);
    if let Some(n) = cam.plane_count {
        let _ = write!(s, " {n}");
        if let Some(m) = cam.depth_max {
            let _ = write!(s, " {m:?}");
        }
    }
    s.push('\n');
    s
}

pub fn read_cam(path: &Path) -> Result<CamFile> {
    parse_cam(&std::fs::read_to_string(path)?, path)
}

pub fn write_cam(path: &Path, cam: &CamFile) -> Result<()> {
    atomic_write(path, format_cam(cam).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "extrinsic
0.970263 0.00747983 0.241939 -191.02
-0.0147429 0.999493 0.0282234 3.28832
-0.241605 -0.030951 0.969881 22.5401
0.0 0.0 0.0 1.0

intrinsic
2892.33 0 823.205
0 2883.18 619.071
0 0 1

425.0 2.5
";

    #[test]
    fn parses_known_fixture() {
        let cam = parse_cam(FIXTURE, Path::new("fixture.txt")).unwrap();
        assert_eq!(cam.rotation[(0, 2)], 0.241939);
        assert_eq!(cam.rotation[(2, 0)], -0.241605);
        assert_eq!(cam.translation, Vector3::new(-191.02, 3.28832, 22.5401));
        assert_eq!(cam.intrinsics[(0, 0)], 2892.33);
        assert_eq!(cam.intrinsics[(1, 2)], 619.071);
        assert_eq!(cam.intrinsics[(2, 2)], 1.0);
        assert_eq!((cam.depth_min, cam.depth_interval), (425.0, 2.5));
        assert_eq!(cam.plane_count, None);
        assert_eq!(cam.far(), 425.0 + 2.5 * 191.0);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut cam = parse_cam(FIXTURE, Path::new("f")).unwrap();
        cam.rotation[(0, 0)] = 0.1 + 0.2;
        cam.plane_count = Some(192);
        cam.depth_max = Some(1.0 / 3.0 + 900.0);
        let again = parse_cam(&format_cam(&cam), Path::new("g")).unwrap();
        assert_eq!(again, cam);
    }

    #[test]
    fn diagnostics_name_the_line() {
        let bad = FIXTURE.replace("2883.18", "x2883");
        match parse_cam(&bad, Path::new("bad.txt")) {
            Err(MvsError::Parse { line, path, .. }) => {
                assert_eq!(line, 9);
                assert_eq!(path, Path::new("bad.txt"));
            }
            other => panic!("{other:?}"),
        }
        let short = FIXTURE.replace("0 2883.18 619.071", "0 2883.18");
        assert!(matches!(parse_cam(&short, Path::new("s")), Err(MvsError::Parse { line: 9, .. })));
        let no_depth = FIXTURE.replace("425.0 2.5", "");
        assert!(matches!(parse_cam(&no_depth, Path::new("s")), Err(MvsError::Parse { .. })));
        let header = FIXTURE.replace("intrinsic", "intrinsics");
        assert!(matches!(parse_cam(&header, Path::new("s")), Err(MvsError::Parse { line: 7, .. })));
    }
}
