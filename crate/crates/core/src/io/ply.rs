//! ASCII PLY point clouds with `x y z red green blue` vertices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{MvsError, Result};
use crate::evaluation::PointCloud;

use super::atomic_write;

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.len()
    );
    for (i, p) in cloud.points.iter().enumerate() {
        let c = cloud.colors.as_ref().map_or([255, 255, 255], |c| c[i]);
        let _ = writeln!(s, "{:?} {:?} {:?} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
    }
    atomic_write(path, s.as_bytes())
}

/// Reads ASCII PLY files whose vertex element starts with `x y z`,
/// optionally followed by `red green blue`.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, message: String| MvsError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut header_done = false;
    for (n, l) in lines.by_ref() {
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["ply"] | ["comment", ..] | [] => {}
            ["format", "ascii", _] => {}
            ["format", f, ..] => return Err(err(n, format!("unsupported format `{f}`"))),
            ["element", "vertex", c] => {
                count = Some(c.parse::<usize>().map_err(|_| err(n, format!("bad vertex count `{c}`")))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", _, name] if in_vertex => props.push(name.to_string()),
            ["property", ..] => {}
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(err(n, format!("unexpected header line `{l}`"))),
        }
    }
    if !header_done {
        return Err(err(text.lines().count(), "missing end_header".into()));
    }
    let count = count.ok_or_else(|| err(1, "no vertex element".into()))?;
    if props.len() < 3 || props[..3] != ["x", "y", "z"] {
        return Err(err(1, "vertex properties must start with x y z".into()));
    }
    let color = props.len() >= 6 && props[3..6] == ["red", "green", "blue"];
    let mut cloud = PointCloud {
        points: Vec::with_capacity(count),
        colors: color.then(|| Vec::with_capacity(count)),
    };
    for _ in 0..count {
        let (n, l) = lines.next().ok_or_else(|| err(text.lines().count(), "fewer vertices than declared".into()))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(n, format!("`{t}` is not a number"))))
            .collect::<Result<_>>()?;
        if vals.len() != props.len() {
            return Err(err(n, format!("expected {} values, found {}", props.len(), vals.len())));
        }
        cloud.points.push(Point3::new(vals[0], vals[1], vals[2]));
        if let Some(c) = cloud.colors.as_mut() {
            c.push([vals[3] as u8, vals[4] as u8, vals[5] as u8]);
        }
    }
    Ok(cloud)
}
