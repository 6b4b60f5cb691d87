//! Region segmentation, depth-map fusion and point-cloud metrics.

mod fusion;
mod metrics;
mod segmentation;

pub use fusion::{fuse_depth_maps, FusionParams, FusionView, PointCloud};
pub use metrics::{accuracy_completeness, brute_force_nearest, CloudMetrics};
pub use segmentation::{default_theta, laplacian_segmentation, region_depth_error, RegionLabels, REGION_COUNT};
