//! Global-threshold baseline: Otsu's method over a 256-bin histogram of the
//! probability volume, plus the label assembly used to compare against the
//! path-search reconstruction.

use thiserror::Error;

use crate::volume::{Dims, LabelVolume, ProbabilityVolume, INNER, OUTER};

#[derive(Error, Debug)]
pub enum BaselineError {
    /// All voxels fall into a single histogram bin, so no split separates
    /// two non-empty classes.
    #[error("degenerate input: all {count} voxels fall into histogram bin {bin}")]
    Degenerate { bin: usize, count: u64 },
    #[error("empty volume")]
    EmptyVolume,
    #[error("channel dims differ: inner {inner}, outer {outer}")]
    DimsMismatch { inner: Dims, outer: Dims },
}

pub const HISTOGRAM_BINS: usize = 256;

/// Histogram of probabilities uniformly quantized on [0, 1]: bin
/// `min(floor(v * 256), 255)`.
pub fn histogram256(vol: &ProbabilityVolume) -> [u64; HISTOGRAM_BINS] {
    let mut bins = [0u64; HISTOGRAM_BINS];
    for &v in vol.data() {
        let bin = ((f64::from(v) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        bins[bin] += 1;
    }
    bins
}

/// Otsu's global threshold: the split of the 256-bin histogram maximizing
/// between-class variance `w0 * w1 * (mu0 - mu1)^2`, with ties broken toward
/// the lowest split. The returned scalar is the center of the first bin of
/// the upper class, so `p > t` classification agrees with the histogram
/// split for every value outside that single bin.
pub fn otsu_threshold(vol: &ProbabilityVolume) -> Result<f64, BaselineError> {
    let bins = histogram256(vol);
    let total: u64 = bins.iter().sum();
    if total == 0 {
        return Err(BaselineError::EmptyVolume);
    }
    let occupied: Vec<usize> =
        (0..HISTOGRAM_BINS).filter(|&k| bins[k] > 0).collect();
    if occupied.len() == 1 {
        return Err(BaselineError::Degenerate { bin: occupied[0], count: total });
    }

    // Means are accumulated in bin-index units; between-class variance is
    // invariant to that affine rescaling of the value axis.
    let total_f = total as f64;
    let total_sum: f64 = bins.iter().enumerate().map(|(k, &n)| k as f64 * n as f64).sum();
    let mut best_split = 1usize;
    let mut best_variance = f64::NEG_INFINITY;
    let mut n0 = 0u64;
    let mut sum0 = 0.0f64;
    for split in 1..HISTOGRAM_BINS {
        n0 += bins[split - 1];
        sum0 += (split - 1) as f64 * bins[split - 1] as f64;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let mu0 = sum0 / n0 as f64;
        let mu1 = (total_sum - sum0) / n1 as f64;
        let w0 = n0 as f64 / total_f;
        let w1 = n1 as f64 / total_f;
        let variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if variance > best_variance {
            best_variance = variance;
            best_split = split;
        }
    }
    Ok((best_split as f64 + 0.5) / HISTOGRAM_BINS as f64)
}

/// How the per-channel classification threshold is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdMode {
    /// Per-channel Otsu threshold over the whole volume.
    Otsu,
    /// One fixed threshold for both channels; 0.5 reproduces plain
    /// thresholding of the original probabilities.
    Fixed(f64),
}

/// Baseline label volume plus the thresholds actually applied.
#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub labels: LabelVolume,
    pub inner_threshold: f64,
    pub outer_threshold: f64,
}

/// Thresholds each channel (`p > t`, strict) and combines the two masks
/// under the inner > outer > background priority rule.
pub fn baseline_reconstruct(
    inner: &ProbabilityVolume,
    outer: &ProbabilityVolume,
    mode: ThresholdMode,
) -> Result<BaselineResult, BaselineError> {
    if inner.dims() != outer.dims() {
        return Err(BaselineError::DimsMismatch { inner: inner.dims(), outer: outer.dims() });
    }
    let (t_inner, t_outer) = match mode {
        ThresholdMode::Otsu => (otsu_threshold(inner)?, otsu_threshold(outer)?),
        ThresholdMode::Fixed(t) => (t, t),
    };
    let mut labels = LabelVolume::zeros(inner.dims());
    let data = labels.data_mut();
    for (i, (&pi, &po)) in inner.data().iter().zip(outer.data()).enumerate() {
        data[i] = if f64::from(pi) > t_inner {
            INNER
        } else if f64::from(po) > t_outer {
            OUTER
        } else {
            crate::volume::BACKGROUND
        };
    }
    Ok(BaselineResult { labels, inner_threshold: t_inner, outer_threshold: t_outer })
}
