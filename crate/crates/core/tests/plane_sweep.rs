use nalgebra::{Matrix3, Vector3};

use np_mvs::cost::{aggregate_views, build_view_cost, regularize_dense, Regularization, ViewLevel};
use np_mvs::features::extract_features;
use np_mvs::geometry::CameraView;
use np_mvs::Image;

fn texture(x: f64, y: f64) -> f64 {
    0.5 + 0.2 * (1.7 * x + 0.3 * y).sin() + 0.15 * (0.4 * x - 2.3 * y).sin() + 0.1 * (3.1 * x + 1.9 * y).cos()
}

/// Both cameras look at a textured fronto-parallel plane; the source is
/// shifted by `center_x` along x.
fn render(w: usize, h: usize, f: f64, z: f64, center_x: f64) -> Image {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    Image::from_fn(w, h, |x, y| {
        let wx = (x as f64 - cx) * z / f + center_x;
        let wy = (y as f64 - cy) * z / f;
        texture(4.5 * wx, 4.5 * wy)
    })
}

#[test]
fn dense_sweep_peaks_at_nearest_plane() {
    let (w, h, f, z) = (48usize, 36usize, 40.0, 8.0);
    let reference = CameraView::simple(f, w, h, Matrix3::identity(), Vector3::zeros()).unwrap();
    let f_ref = extract_features(&render(w, h, f, z, 0.0)).unwrap();
    let depths = [6.0, 7.0, 8.0, 9.0, 10.0];
    let mut volumes = Vec::new();
    let mut cams = Vec::new();
    let mut feats = Vec::new();
    for shift in [1.0, -1.0] {
        cams.push(CameraView::simple(f, w, h, Matrix3::identity(), Vector3::new(-shift, 0.0, 0.0)).unwrap());
        feats.push(extract_features(&render(w, h, f, z, shift)).unwrap());
    }
    for (cam, feat) in cams.iter().zip(&feats) {
        volumes.push(
            build_view_cost(
                ViewLevel { features: &f_ref, camera: &reference },
                ViewLevel { features: feat, camera: cam },
                &depths,
                4,
            )
            .unwrap(),
        );
    }
    let fused = aggregate_views(&volumes).unwrap();
    let probs = regularize_dense(&fused, Regularization::default()).unwrap();
    // disparities reach f * b / 6 = 6.7 px, so both sources frame every
    // sample only away from the left and right borders
    let mut checked = 0;
    for y in 4..h - 4 {
        for x in 8..w - 8 {
            let p = y * w + x;
            assert!(fused.pixel_valid[p]);
            let raw = (0..5).max_by(|&a, &b| fused.mean_cost(p, a).total_cmp(&fused.mean_cost(p, b))).unwrap();
            assert_eq!(raw, 2, "raw cost at ({x},{y})");
            let pr = probs.pixel(p);
            let best = (0..5).max_by(|&a, &b| pr[a].total_cmp(&pr[b])).unwrap();
            assert_eq!(best, 2, "probability at ({x},{y})");
            checked += 1;
        }
    }
    assert!(checked > 800);
}
