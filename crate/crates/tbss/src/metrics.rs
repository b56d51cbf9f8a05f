//! Hausdorff-distance evaluation of reconstructed contours against
//! ground-truth boundary voxels, stratified by channel and by the
//! healthy/unhealthy slice annotation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::SliceContours;
use crate::volume::{LabelVolume, SliceMeta, VoxelSpacing, INNER, OUTER};

#[derive(Error, Debug)]
pub enum MetricsError {
    #[error("hausdorff distance of an empty point set is undefined")]
    EmptySet,
    #[error("contour list has {contours} slices but ground truth has {gt}")]
    ContourLengthMismatch { contours: usize, gt: usize },
    #[error("slice annotation has {meta} entries but ground truth has {gt} slices")]
    MetaLengthMismatch { meta: usize, gt: usize },
}

fn squared(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dr = a.0.abs_diff(b.0) as u64;
    let dc = a.1.abs_diff(b.1) as u64;
    dr * dr + dc * dc
}

/// max over `a` of the distance to the nearest point of `b`, in Euclidean
/// pixel units. Distances are compared as exact integer squares; the square
/// root is taken once at the end.
pub fn directed_hausdorff(
    a: &[(usize, usize)],
    b: &[(usize, usize)],
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut worst = 0u64;
    for &p in a {
        let nearest = b.iter().map(|&q| squared(p, q)).min().unwrap();
        worst = worst.max(nearest);
    }
    Ok((worst as f64).sqrt())
}

/// Symmetric Hausdorff distance: the larger of the two directed distances.
pub fn hausdorff(a: &[(usize, usize)], b: &[(usize, usize)]) -> Result<f64, MetricsError> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

/// Mean distance over the included slices of one channel × stratum cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    /// Mean Hausdorff distance in voxel units; absent when no slice of the
    /// cell had both point sets non-empty.
    pub mean_voxels: Option<f64>,
    /// `mean_voxels` scaled by the in-plane voxel size, when spacing is known.
    pub mean_mm: Option<f64>,
    /// Slices contributing to the mean.
    pub included: usize,
    /// Slices skipped because the contour or the ground truth was empty.
    pub excluded: usize,
}

/// Raw per-slice distances in voxel units; `None` marks an excluded slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceDistance {
    pub slice: usize,
    pub healthy: bool,
    pub inner_voxels: Option<f64>,
    pub outer_voxels: Option<f64>,
}

/// Table of mean Hausdorff distances per channel × stratum, plus the raw
/// per-slice distances behind the means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub inner_healthy: StratumStats,
    pub inner_unhealthy: StratumStats,
    pub outer_healthy: StratumStats,
    pub outer_unhealthy: StratumStats,
    pub per_slice: Vec<SliceDistance>,
}

impl EvalReport {
    pub fn cell(&self, label: u8, healthy: bool) -> &StratumStats {
        match (label, healthy) {
            (INNER, true) => &self.inner_healthy,
            (INNER, false) => &self.inner_unhealthy,
            (OUTER, true) => &self.outer_healthy,
            (OUTER, false) => &self.outer_unhealthy,
            _ => panic!("no stats for label {label}"),
        }
    }

    /// Four-row CSV rendering of the stratified table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,stratum,mean_voxels,mean_mm,included,excluded\n");
        let rows = [
            ("inner", "healthy", &self.inner_healthy),
            ("inner", "unhealthy", &self.inner_unhealthy),
            ("outer", "healthy", &self.outer_healthy),
            ("outer", "unhealthy", &self.outer_unhealthy),
        ];
        for (channel, stratum, stats) in rows {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{channel},{stratum},{},{},{},{}\n",
                fmt(stats.mean_voxels),
                fmt(stats.mean_mm),
                stats.included,
                stats.excluded,
            ));
        }
        out
    }
}

struct StratumAccumulator {
    sum: f64,
    included: usize,
    excluded: usize,
}

impl StratumAccumulator {
    fn new() -> Self {
        StratumAccumulator { sum: 0.0, included: 0, excluded: 0 }
    }

    fn add(&mut self, distance: Option<f64>) {
        match distance {
            Some(d) => {
                self.sum += d;
                self.included += 1;
            }
            None => self.excluded += 1,
        }
    }

    fn finish(self, in_plane_mm: Option<f64>) -> StratumStats {
        let mean_voxels =
            (self.included > 0).then(|| self.sum / self.included as f64);
        StratumStats {
            mean_voxels,
            mean_mm: match (mean_voxels, in_plane_mm) {
                (Some(v), Some(s)) => Some(v * s),
                _ => None,
            },
            included: self.included,
            excluded: self.excluded,
        }
    }
}

fn gt_points(gt: &LabelVolume, slice: usize, label: u8) -> Vec<(usize, usize)> {
    let dims = gt.dims();
    let mut points = Vec::new();
    for (i, &v) in gt.slice(slice).iter().enumerate() {
        if v == label {
            points.push((i / dims.cols, i % dims.cols));
        }
    }
    points
}

/// Compares per-slice contours to the ground-truth boundary voxels of each
/// channel. Slices where either point set is empty are excluded from the
/// corresponding mean and counted; slices accumulate in index order.
pub fn evaluate(
    contours: &[SliceContours],
    gt: &LabelVolume,
    meta: &SliceMeta,
    spacing: Option<&VoxelSpacing>,
) -> Result<EvalReport, MetricsError> {
    let n = gt.dims().slices;
    if contours.len() != n {
        return Err(MetricsError::ContourLengthMismatch { contours: contours.len(), gt: n });
    }
    if meta.healthy.len() != n {
        return Err(MetricsError::MetaLengthMismatch { meta: meta.healthy.len(), gt: n });
    }
    let in_plane_mm = spacing.map(|s| s.in_plane_mm);

    let mut cells = [
        StratumAccumulator::new(), // inner healthy
        StratumAccumulator::new(), // inner unhealthy
        StratumAccumulator::new(), // outer healthy
        StratumAccumulator::new(), // outer unhealthy
    ];
    let mut per_slice = Vec::with_capacity(n);
    for (slice, slice_contours) in contours.iter().enumerate() {
        let healthy = meta.healthy[slice];
        let mut channel = |label: u8, points: &[(usize, usize)]| -> Option<f64> {
            let truth = gt_points(gt, slice, label);
            let distance = if points.is_empty() || truth.is_empty() {
                None
            } else {
                Some(hausdorff(points, &truth).expect("both sets non-empty"))
            };
            let row = if label == INNER { 0 } else { 2 };
            cells[row + usize::from(!healthy)].add(distance);
            distance
        };
        let inner_voxels = channel(INNER, &slice_contours.inner.points);
        let outer_voxels = channel(OUTER, &slice_contours.outer.points);
        per_slice.push(SliceDistance { slice, healthy, inner_voxels, outer_voxels });
    }

    let [ih, iu, oh, ou] = cells;
    Ok(EvalReport {
        inner_healthy: ih.finish(in_plane_mm),
        inner_unhealthy: iu.finish(in_plane_mm),
        outer_healthy: oh.finish(in_plane_mm),
        outer_unhealthy: ou.finish(in_plane_mm),
        per_slice,
    })
}
