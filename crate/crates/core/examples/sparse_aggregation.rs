//! Sparse cost volume on a ragged lattice: pixels hold different depth bins,
//! neighbors are found through the spatial index, and aggregation uses
//! only the neighbors that exist.

use nalgebra::Point3;
use np_mvs::cost::Regularization;
use np_mvs::sparse::{sparse_aggregate, SparseCostVolume, SparsePoint};

fn main() -> np_mvs::Result<()> {
    let (w, h, m) = (6usize, 4usize, 4usize);
    let mut points = Vec::new();
    for v in 0..h {
        for u in 0..w {
            // each pixel keeps two pairs of sibling bins, like top-2 children
            let first = (u / 3 + v / 2) as i64 % 3;
            let bins = [2 * first, 2 * first + 1, 2 * (first + 4), 2 * (first + 4) + 1];
            for (s, &bin) in bins.iter().enumerate() {
                let cost = if bin == 2 * first + 1 { 1.0 } else { -0.2 * s as f64 };
                points.push(SparsePoint {
                    pixel: (u, v),
                    sample: s,
                    lattice: [u as i64, v as i64, bin],
                    point: Point3::origin(),
                    costs: vec![cost; 2],
                    valid_views: 2,
                });
            }
        }
    }
    let volume = SparseCostVolume::from_points(1, w, h, 2, points, vec![true; w * h])?;
    let here = volume.points()[(w + 1) * m].lattice;
    for (axis, name) in ["u", "v", "bin"].iter().enumerate() {
        let found = [-1, 1].map(|o| volume.neighbor_lookup(here, axis, o).is_some());
        println!("neighbors of {here:?} along {name}: -1 {} +1 {}", found[0], found[1]);
    }
    let probs = sparse_aggregate(&volume, Regularization::default())?;
    for v in 0..h {
        let row: Vec<String> = (0..w)
            .map(|u| {
                let p = probs.pixel(v * w + u);
                format!("{:.2}", p.iter().copied().fold(0.0, f64::max))
            })
            .collect();
        println!("peak probability row {v}: {}", row.join(" "));
    }
    println!("{} points, {} samples per pixel", volume.len(), volume.samples);
    Ok(())
}
