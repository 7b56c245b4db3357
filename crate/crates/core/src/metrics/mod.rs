//! Pose-error and image-quality metrics.

mod image_quality;
mod pose_error;
mod procrustes;
mod report;

pub use image_quality::{psnr, ssim, PSNR_CAP_DB, SSIM_WINDOW};
pub use pose_error::{mpjpe, mpvpe, pa_mpjpe, pa_mpvpe, pose_errors};
pub use procrustes::{procrustes_align, AlignMode, SimilarityTransform};
pub use report::{error_growth_rate, round2, ImageQuality, MetricRow, MetricsReport};
