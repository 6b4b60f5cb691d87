//! Sparse cost volume over per-pixel hypotheses at refined levels.
//!
//! Every hypothesis becomes a 3D point with an integer lattice coordinate
//! `(u, v, bin)`. Costs are computed by projecting the point into each
//! source view. Aggregation runs (1,2,1)/4 filters along u, v and bin over
//! whichever lattice neighbors exist, then a softmax per pixel.

use std::collections::HashMap;

use nalgebra::{Point2, Point3};
use rayon::prelude::*;

use crate::cost::{check_groups, correlate_into, softmax_in_place, visibility_weight, ProbabilityVolume, Regularization, ViewLevel};
use crate::error::{invalid_arg, MvsError, Result};
use crate::npdist::HypothesisSet;

/// Lattice coordinate `(u, v, depth bin)`.
pub type LatticeCoord = [i64; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct SparsePoint {
    pub pixel: (usize, usize),
    /// Index of the sample within its pixel.
    pub sample: usize,
    pub lattice: LatticeCoord,
    pub point: Point3<f64>,
    pub costs: Vec<f64>,
    /// Number of source views that observed the point.
    pub valid_views: u8,
}

/// Points stored pixel-major: point `p * samples + m` is sample `m` of
/// pixel `p`.
#[derive(Clone, Debug)]
pub struct SparseCostVolume {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub samples: usize,
    pub groups: usize,
    points: Vec<SparsePoint>,
    pixel_valid: Vec<bool>,
    index: HashMap<LatticeCoord, usize>,
}

impl SparseCostVolume {
    pub fn from_points(
        level: usize,
        width: usize,
        height: usize,
        groups: usize,
        points: Vec<SparsePoint>,
        pixel_valid: Vec<bool>,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 || points.is_empty() || points.len() % n != 0 {
            return Err(invalid_arg(format!(
                "{} points do not fill a {width}x{height} grid evenly",
                points.len()
            )));
        }
        if pixel_valid.len() != n {
            return Err(MvsError::ShapeMismatch("pixel validity mask size".into()));
        }
        let samples = points.len() / n;
        let mut index = HashMap::with_capacity(points.len());
        for (i, pt) in points.iter().enumerate() {
            let p = i / samples;
            if pt.pixel != (p % width, p / width) || pt.sample != i % samples {
                return Err(invalid_arg(format!("point {i} is out of pixel-major order")));
            }
            if pt.costs.len() != groups || !pt.costs.iter().all(|c| c.is_finite()) {
                return Err(invalid_arg(format!("point {i} needs {groups} finite costs")));
            }
            if index.insert(pt.lattice, i).is_some() {
                return Err(invalid_arg(format!("duplicate lattice key {:?}", pt.lattice)));
            }
        }
        Ok(Self {
            level,
            width,
            height,
            samples,
            groups,
            points,
            pixel_valid,
            index,
        })
    }

    pub fn points(&self) -> &[SparsePoint] {
        &self.points
    }

    pub fn pixel_valid(&self) -> &[bool] {
        &self.pixel_valid
    }

    /// Total number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn lookup_index(&self, coord: LatticeCoord, axis: usize, offset: i64) -> Option<usize> {
        let mut key = coord;
        key[axis] += offset;
        self.index.get(&key).copied()
    }

    /// Exact-match lookup of the point at `coord` moved by `offset` along
    /// `axis` (0 = u, 1 = v, 2 = depth bin).
    pub fn neighbor_lookup(&self, coord: LatticeCoord, axis: usize, offset: i64) -> Option<&SparsePoint> {
        if axis > 2 {
            return None;
        }
        self.lookup_index(coord, axis, offset).map(|i| &self.points[i])
    }
}

/// Costs of every hypothesis against every source view, fused with the
/// same visibility weighting as the dense volume.
pub fn build_sparse_volume(
    hyps: &HypothesisSet,
    reference: ViewLevel<'_>,
    sources: &[ViewLevel<'_>],
    groups: usize,
) -> Result<SparseCostVolume> {
    if hyps.samples == 0 || hyps.pixel_count() == 0 {
        return Err(invalid_arg("empty hypothesis set"));
    }
    let rf = reference.features;
    if (rf.width, rf.height) != (hyps.width, hyps.height) {
        return Err(MvsError::ShapeMismatch(format!(
            "hypotheses {}x{} vs reference features {}x{}",
            hyps.width, hyps.height, rf.width, rf.height
        )));
    }
    if sources.iter().any(|s| s.features.channels != rf.channels) {
        return Err(MvsError::ShapeMismatch("descriptor channel counts differ".into()));
    }
    if sources.len() > u8::MAX as usize {
        return Err(invalid_arg("too many source views"));
    }
    check_groups(rf.channels, groups)?;
    let (w, m, d) = (hyps.width, hyps.samples, rf.channels);

    let per_pixel: Vec<(Vec<SparsePoint>, bool)> = (0..hyps.pixel_count())
        .into_par_iter()
        .map(|p| {
            let (u, v) = (p % w, p / w);
            let f_ref = &rf.values[p * d..(p + 1) * d];
            let depths = hyps.pixel_depths(p);
            let points: Vec<Point3<f64>> = depths
                .iter()
                .map(|&z| reference.camera.unproject(Point2::new(u as f64, v as f64), z))
                .collect();
            // view-major costs for this pixel: [view][sample][group]
            let mut costs = vec![0.0; sources.len() * m * groups];
            let mut valid = vec![false; sources.len() * m];
            let mut sampled = vec![0.0; d];
            if rf.valid[p] {
                for (vi, src) in sources.iter().enumerate() {
                    for (s, pt) in points.iter().enumerate() {
                        let Ok((px, _)) = src.camera.project(pt) else {
                            continue;
                        };
                        if !src.features.sample_bilinear(px.x, px.y, &mut sampled) {
                            continue;
                        }
                        let cell = vi * m + s;
                        correlate_into(f_ref, &sampled, &mut costs[cell * groups..(cell + 1) * groups]);
                        valid[cell] = true;
                    }
                }
            }
            let mean = |cell: usize| costs[cell * groups..(cell + 1) * groups].iter().sum::<f64>() / groups as f64;
            let weights: Vec<f64> = (0..sources.len())
                .map(|vi| visibility_weight((0..m).filter(|&s| valid[vi * m + s]).map(|s| mean(vi * m + s))))
                .collect();
            let pixel_valid = weights.iter().sum::<f64>() > 0.0;

            let out = (0..m)
                .map(|s| {
                    let mut fused = vec![0.0; groups];
                    let mut den = 0.0;
                    let mut count = 0u8;
                    for (vi, &wt) in weights.iter().enumerate() {
                        let cell = vi * m + s;
                        if !valid[cell] {
                            continue;
                        }
                        count += 1;
                        if wt > 0.0 {
                            den += wt;
                            for (a, c) in fused.iter_mut().zip(&costs[cell * groups..(cell + 1) * groups]) {
                                *a += wt * c;
                            }
                        }
                    }
                    if den > 0.0 {
                        fused.iter_mut().for_each(|a| *a /= den);
                    } else {
                        fused.iter_mut().for_each(|a| *a = 0.0);
                    }
                    SparsePoint {
                        pixel: (u, v),
                        sample: s,
                        lattice: [u as i64, v as i64, hyps.bins[p * m + s]],
                        point: points[s],
                        costs: fused,
                        valid_views: count,
                    }
                })
                .collect();
            (out, pixel_valid)
        })
        .collect();

    let mut points = Vec::with_capacity(hyps.pixel_count() * m);
    let mut pixel_valid = Vec::with_capacity(hyps.pixel_count());
    for (pts, ok) in per_pixel {
        points.extend(pts);
        pixel_valid.push(ok);
    }
    SparseCostVolume::from_points(hyps.level, hyps.width, hyps.height, groups, points, pixel_valid)
}

/// Factorized (1,2,1)/4 filtering along u, v and depth bin over existing
/// lattice neighbors, then a softmax over each pixel's samples.
pub fn sparse_aggregate(volume: &SparseCostVolume, reg: Regularization) -> Result<ProbabilityVolume> {
    if !(reg.temperature > 0.0) {
        return Err(invalid_arg("softmax temperature must be positive"));
    }
    let g = volume.groups as f64;
    let links: Vec<[[Option<usize>; 2]; 3]> = volume
        .points
        .par_iter()
        .map(|pt| {
            std::array::from_fn(|axis| {
                [
                    volume.lookup_index(pt.lattice, axis, -1),
                    volume.lookup_index(pt.lattice, axis, 1),
                ]
            })
        })
        .collect();
    let mut values: Vec<f64> = volume.points.iter().map(|pt| pt.costs.iter().sum::<f64>() / g).collect();
    for _ in 0..reg.passes {
        for axis in 0..3 {
            values = links
                .par_iter()
                .enumerate()
                .map(|(i, l)| {
                    let mut acc = 2.0 * values[i];
                    let mut wsum = 2.0;
                    for j in l[axis].iter().flatten() {
                        acc += values[*j];
                        wsum += 1.0;
                    }
                    acc / wsum
                })
                .collect();
        }
    }
    let m = volume.samples;
    values
        .par_chunks_mut(m)
        .zip(volume.pixel_valid.par_iter())
        .for_each(|(px, &valid)| {
            if valid {
                softmax_in_place(px, reg.temperature);
            } else {
                px.iter_mut().for_each(|v| *v = 0.0);
            }
        });
    Ok(ProbabilityVolume {
        width: volume.width,
        height: volume.height,
        samples: m,
        probs: values,
        valid: volume.pixel_valid.clone(),
    })
}
