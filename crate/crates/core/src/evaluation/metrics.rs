//! Accuracy and completeness between point clouds.

use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{invalid_arg, Result};

use super::fusion::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudMetrics {
    /// Mean distance from estimated points to the ground truth; `None` when
    /// every distance exceeds the cap.
    pub accuracy: Option<f64>,
    /// Mean distance from ground-truth points to the estimate.
    pub completeness: Option<f64>,
    /// Mean of accuracy and completeness.
    pub overall: Option<f64>,
}

type Cell = [i64; 3];

/// Uniform hash grid with cell size equal to the search radius, so every
/// point within the radius lies in the 27 cells around the query.
struct RadiusGrid<'a> {
    points: &'a [Point3<f64>],
    cell: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> RadiusGrid<'a> {
    fn new(points: &'a [Point3<f64>], cell: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    fn key(p: &Point3<f64>, cell: f64) -> Cell {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    /// Distance to the nearest point if it is within the cell size.
    fn nearest_within(&self, q: &Point3<f64>) -> Option<f64> {
        let k = Self::key(q, self.cell);
        let mut best = f64::INFINITY;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in ids {
                            best = best.min((self.points[i] - q).norm());
                        }
                    }
                }
            }
        }
        (best <= self.cell).then_some(best)
    }
}

/// Exact nearest-neighbor distance by exhaustive search.
pub fn brute_force_nearest(points: &[Point3<f64>], q: &Point3<f64>) -> Option<f64> {
    points.iter().map(|p| (p - q).norm()).min_by(f64::total_cmp)
}

fn mean_capped(from: &[Point3<f64>], to: &[Point3<f64>], cap: f64) -> Option<f64> {
    let grid = RadiusGrid::new(to, cap);
    let dists: Vec<f64> = from.par_iter().filter_map(|q| grid.nearest_within(q)).collect();
    (!dists.is_empty()).then(|| crate::supervision::neumaier_sum(dists.iter().copied()) / dists.len() as f64)
}

/// Mean nearest-neighbor distances in both directions, ignoring distances
/// above `d_cap`.
pub fn accuracy_completeness(est: &PointCloud, gt: &PointCloud, d_cap: f64) -> Result<CloudMetrics> {
    if !(d_cap > 0.0) || !d_cap.is_finite() {
        return Err(invalid_arg("outlier cap must be positive and finite"));
    }
    let accuracy = mean_capped(&est.points, &gt.points, d_cap);
    let completeness = mean_capped(&gt.points, &est.points, d_cap);
    let overall = accuracy.zip(completeness).map(|(a, c)| (a + c) / 2.0);
    Ok(CloudMetrics {
        accuracy,
        completeness,
        overall,
    })
}
