//! Synthetic tube phantoms: concentric 1-pixel boundary rings swept along a
//! stack of slices, degraded into probability volumes by Gaussian blur,
//! angular hole punching, and seeded uniform noise.
//!
//! Generation is fully deterministic for a given spec: noise comes from a
//! counter-based generator (ChaCha8) with one stream per slice, so slices can
//! be produced in parallel without changing a single bit of the output.

use std::f64::consts::TAU;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{Dims, LabelVolume, ProbabilityVolume, SliceMeta, INNER, OUTER};

#[derive(Error, Debug)]
pub enum PhantomError {
    #[error("phantom dims must all be at least 1")]
    BadDims,
    #[error("noise amplitude {0} outside [0, 1]")]
    BadNoiseAmp(f64),
    #[error("blur sigma {0} must be finite and non-negative")]
    BadBlurSigma(f64),
    #[error("slice {slice}: {channel} radius {radius:.3} must be finite and at least 1")]
    RadiusTooSmall { slice: usize, channel: &'static str, radius: f64 },
    #[error(
        "slice {slice}: outer radius {outer:.3} leaves less than 2 voxels of ring \
         separation from inner radius {inner:.3} at eccentricity {eccentricity:.3}"
    )]
    RingsTooClose { slice: usize, inner: f64, outer: f64, eccentricity: f64 },
    #[error("slice {slice}: outer radius {outer:.3} exceeds the limit {limit:.3} for this grid")]
    OuterTooLarge { slice: usize, outer: f64, limit: f64 },
    #[error("hole slice range {first}..={last} invalid for {slices} slices")]
    BadHoleRange { first: usize, last: usize, slices: usize },
    #[error("hole angle range [{start}, {end}] must be finite with end >= start")]
    BadHoleAngles { start: f64, end: f64 },
}

/// Per-slice boundary radius along the artery, in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusProfile {
    Constant { radius: f64 },
    /// Linear taper from `start` on the first slice to `end` on the last.
    Linear { start: f64, end: f64 },
    /// Stenosis-like oscillation: `base + amplitude * sin(TAU * s / period_slices + phase)`.
    Sinusoidal { base: f64, amplitude: f64, period_slices: f64, phase: f64 },
}

impl RadiusProfile {
    pub fn at(&self, slice: usize, n_slices: usize) -> f64 {
        match *self {
            RadiusProfile::Constant { radius } => radius,
            RadiusProfile::Linear { start, end } => {
                let t = if n_slices <= 1 {
                    0.0
                } else {
                    slice as f64 / (n_slices - 1) as f64
                };
                start + (end - start) * t
            }
            RadiusProfile::Sinusoidal { base, amplitude, period_slices, phase } => {
                base + amplitude * (phase_at(slice, period_slices, phase)).sin()
            }
        }
    }
}

fn phase_at(slice: usize, period_slices: f64, phase: f64) -> f64 {
    if period_slices > 0.0 {
        TAU * slice as f64 / period_slices + phase
    } else {
        phase
    }
}

/// Sinusoidal drift of the inner-ring center around the image center,
/// modeling plaque-like asymmetry between the two walls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eccentricity {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub period_slices: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Eccentricity {
    /// Center offset (rows, cols) of the inner ring on one slice.
    pub fn offset(&self, slice: usize) -> (f64, f64) {
        if self.amplitude == 0.0 {
            return (0.0, 0.0);
        }
        let angle = phase_at(slice, self.period_slices, self.phase);
        (self.amplitude * angle.sin(), self.amplitude * angle.cos())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Inner,
    Outer,
}

fn default_angle_end() -> f64 {
    TAU
}

/// A span of slices where one channel's boundary probability is zeroed over
/// an angular wedge about the image center. The default angle range covers
/// the full circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub channel: Channel,
    pub first_slice: usize,
    pub last_slice: usize,
    #[serde(default)]
    pub angle_start: f64,
    #[serde(default = "default_angle_end")]
    pub angle_end: f64,
}

impl HoleSpec {
    pub fn covers_slice(&self, slice: usize) -> bool {
        (self.first_slice..=self.last_slice).contains(&slice)
    }

    fn covers_angle(&self, theta: f64) -> bool {
        let span = self.angle_end - self.angle_start;
        if span >= TAU {
            return true;
        }
        (theta - self.angle_start).rem_euclid(TAU) <= span
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
    pub inner_radius: RadiusProfile,
    pub outer_radius: RadiusProfile,
    #[serde(default)]
    pub eccentricity: Eccentricity,
    #[serde(default)]
    pub blur_sigma: f64,
    #[serde(default)]
    pub noise_amp: f64,
    #[serde(default)]
    pub holes: Vec<HoleSpec>,
    pub seed: u64,
}

/// Everything the generator produces for one artery.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub inner: ProbabilityVolume,
    pub outer: ProbabilityVolume,
    pub gt: LabelVolume,
    pub meta: SliceMeta,
}

impl PhantomSpec {
    pub fn dims(&self) -> Dims {
        Dims { slices: self.slices, rows: self.rows, cols: self.cols }
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        if self.slices == 0 || self.rows == 0 || self.cols == 0 {
            return Err(PhantomError::BadDims);
        }
        if !(0.0..=1.0).contains(&self.noise_amp) || !self.noise_amp.is_finite() {
            return Err(PhantomError::BadNoiseAmp(self.noise_amp));
        }
        if !self.blur_sigma.is_finite() || self.blur_sigma < 0.0 {
            return Err(PhantomError::BadBlurSigma(self.blur_sigma));
        }
        let limit = self.rows.min(self.cols) as f64 / 2.0 - 1.0;
        for slice in 0..self.slices {
            let inner = self.inner_radius.at(slice, self.slices);
            let outer = self.outer_radius.at(slice, self.slices);
            let (er, ec) = self.eccentricity.offset(slice);
            let eccentricity = (er * er + ec * ec).sqrt();
            if !inner.is_finite() || inner < 1.0 {
                return Err(PhantomError::RadiusTooSmall { slice, channel: "inner", radius: inner });
            }
            if !outer.is_finite() || outer < 1.0 {
                return Err(PhantomError::RadiusTooSmall { slice, channel: "outer", radius: outer });
            }
            if !eccentricity.is_finite() || outer - inner - eccentricity < 2.0 {
                return Err(PhantomError::RingsTooClose { slice, inner, outer, eccentricity });
            }
            if outer + eccentricity.max(0.0) > limit {
                return Err(PhantomError::OuterTooLarge { slice, outer, limit });
            }
        }
        for hole in &self.holes {
            if hole.first_slice > hole.last_slice || hole.last_slice >= self.slices {
                return Err(PhantomError::BadHoleRange {
                    first: hole.first_slice,
                    last: hole.last_slice,
                    slices: self.slices,
                });
            }
            if !hole.angle_start.is_finite()
                || !hole.angle_end.is_finite()
                || hole.angle_end < hole.angle_start
            {
                return Err(PhantomError::BadHoleAngles {
                    start: hole.angle_start,
                    end: hole.angle_end,
                });
            }
        }
        Ok(())
    }
}

/// Closed 8-connected 1-pixel ring of the circle with integer center and
/// radius, clipped to the grid.
fn midpoint_circle(
    center: (i64, i64),
    radius: i64,
    rows: usize,
    cols: usize,
) -> Vec<(usize, usize)> {
    let mut points = Vec::new();
    let mut plot = |dr: i64, dc: i64| {
        let r = center.0 + dr;
        let c = center.1 + dc;
        if r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols {
            points.push((r as usize, c as usize));
        }
    };
    let mut x = radius;
    let mut y = 0i64;
    let mut err = 1 - radius;
    while x >= y {
        plot(y, x);
        plot(y, -x);
        plot(-y, x);
        plot(-y, -x);
        plot(x, y);
        plot(x, -y);
        plot(-x, y);
        plot(-x, -y);
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
    points.sort_unstable();
    points.dedup();
    points
}

fn round_i64(v: f64) -> i64 {
    v.round() as i64
}

/// Half of a normalized Gaussian kernel truncated at 3 sigma; index 0 is the
/// center tap.
fn half_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut taps: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable in-plane Gaussian blur with zero padding, followed by rescaling
/// the slice so its peak value is 1 again. Without the rescale a blurred
/// 1-pixel ring would peak far below any useful probability threshold.
fn blur_and_renormalize(slice: &mut [f64], rows: usize, cols: usize, half: &[f64]) {
    let mut tmp = vec![0.0f64; slice.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = half[0] * slice[r * cols + c];
            for (k, &w) in half.iter().enumerate().skip(1) {
                if c >= k {
                    acc += w * slice[r * cols + c - k];
                }
                if c + k < cols {
                    acc += w * slice[r * cols + c + k];
                }
            }
            tmp[r * cols + c] = acc;
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = half[0] * tmp[r * cols + c];
            for (k, &w) in half.iter().enumerate().skip(1) {
                if r >= k {
                    acc += w * tmp[(r - k) * cols + c];
                }
                if r + k < rows {
                    acc += w * tmp[(r + k) * cols + c];
                }
            }
            slice[r * cols + c] = acc;
        }
    }
    let peak = slice.iter().cloned().fold(0.0f64, f64::max);
    if peak > 0.0 {
        for v in slice.iter_mut() {
            *v = (*v / peak).min(1.0);
        }
    }
}

/// Zeroes each hole's angular wedge about the image center, then adds
/// uniform noise in `[-noise_amp, +noise_amp]` (clamped to [0, 1]) from one
/// ChaCha8 stream per slice. Holes are applied regardless of their channel
/// tag; callers pass the relevant channel's holes.
pub fn corrupt(
    vol: &ProbabilityVolume,
    holes: &[HoleSpec],
    noise_amp: f64,
    seed: u64,
) -> ProbabilityVolume {
    let dims = vol.dims();
    let center_r = (dims.rows as f64 - 1.0) / 2.0;
    let center_c = (dims.cols as f64 - 1.0) / 2.0;
    let slices: Vec<Vec<f32>> = (0..dims.slices)
        .into_par_iter()
        .map(|s| {
            let mut out = vol.slice(s).to_vec();
            for hole in holes.iter().filter(|h| h.covers_slice(s)) {
                for r in 0..dims.rows {
                    for c in 0..dims.cols {
                        let theta =
                            (r as f64 - center_r).atan2(c as f64 - center_c).rem_euclid(TAU);
                        if hole.covers_angle(theta) {
                            out[r * dims.cols + c] = 0.0;
                        }
                    }
                }
            }
            if noise_amp > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                for v in out.iter_mut() {
                    let noise: f64 = rng.random_range(-noise_amp..=noise_amp);
                    *v = (f64::from(*v) + noise).clamp(0.0, 1.0) as f32;
                }
            }
            out
        })
        .collect();
    ProbabilityVolume::new(dims, slices.concat()).expect("corrupt preserves dims and range")
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

// Decorrelates the outer channel's noise from the inner channel's.
const OUTER_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Builds the ground-truth rings, the degraded probability channels, and the
/// per-slice healthy flags for `spec`.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom, PhantomError> {
    spec.validate()?;
    let dims = spec.dims();
    let center_r = (spec.rows as f64 - 1.0) / 2.0;
    let center_c = (spec.cols as f64 - 1.0) / 2.0;
    let half = (spec.blur_sigma > 0.0).then(|| half_kernel(spec.blur_sigma));

    struct SlicePlan {
        inner: Vec<f64>,
        outer: Vec<f64>,
        inner_ring: Vec<(usize, usize)>,
        outer_ring: Vec<(usize, usize)>,
    }

    let plans: Vec<SlicePlan> = (0..spec.slices)
        .into_par_iter()
        .map(|s| {
            let (er, ec) = spec.eccentricity.offset(s);
            let inner_center = (round_i64(center_r + er), round_i64(center_c + ec));
            let outer_center = (round_i64(center_r), round_i64(center_c));
            let inner_ring = midpoint_circle(
                inner_center,
                round_i64(spec.inner_radius.at(s, spec.slices)).max(1),
                spec.rows,
                spec.cols,
            );
            let outer_ring = midpoint_circle(
                outer_center,
                round_i64(spec.outer_radius.at(s, spec.slices)).max(1),
                spec.rows,
                spec.cols,
            );
            let len = spec.rows * spec.cols;
            let mut inner = vec![0.0f64; len];
            let mut outer = vec![0.0f64; len];
            for &(r, c) in &inner_ring {
                inner[r * spec.cols + c] = 1.0;
            }
            for &(r, c) in &outer_ring {
                outer[r * spec.cols + c] = 1.0;
            }
            if let Some(half) = &half {
                blur_and_renormalize(&mut inner, spec.rows, spec.cols, half);
                blur_and_renormalize(&mut outer, spec.rows, spec.cols, half);
            }
            SlicePlan { inner, outer, inner_ring, outer_ring }
        })
        .collect();

    let mut gt = LabelVolume::zeros(dims);
    let mut inner_data = Vec::with_capacity(dims.voxels());
    let mut outer_data = Vec::with_capacity(dims.voxels());
    for (s, plan) in plans.iter().enumerate() {
        for &(r, c) in &plan.outer_ring {
            gt.set(s, r, c, OUTER);
        }
        // Inner labels overwrite outer on (validated-away) overlaps.
        for &(r, c) in &plan.inner_ring {
            gt.set(s, r, c, INNER);
        }
        inner_data.extend(plan.inner.iter().map(|&v| v as f32));
        outer_data.extend(plan.outer.iter().map(|&v| v as f32));
    }
    let inner_clean = ProbabilityVolume::new(dims, inner_data).expect("values in [0,1]");
    let outer_clean = ProbabilityVolume::new(dims, outer_data).expect("values in [0,1]");

    let inner_holes: Vec<HoleSpec> =
        spec.holes.iter().copied().filter(|h| h.channel == Channel::Inner).collect();
    let outer_holes: Vec<HoleSpec> =
        spec.holes.iter().copied().filter(|h| h.channel == Channel::Outer).collect();
    let inner = corrupt(&inner_clean, &inner_holes, spec.noise_amp, spec.seed);
    let outer = corrupt(&outer_clean, &outer_holes, spec.noise_amp, spec.seed ^ OUTER_SEED_SALT);

    let inner_radii: Vec<f64> = (0..spec.slices).map(|s| spec.inner_radius.at(s, spec.slices)).collect();
    let outer_radii: Vec<f64> = (0..spec.slices).map(|s| spec.outer_radius.at(s, spec.slices)).collect();
    let inner_median = median(inner_radii.clone());
    let outer_median = median(outer_radii.clone());
    let healthy = (0..spec.slices)
        .map(|s| {
            let holed = spec.holes.iter().any(|h| h.covers_slice(s));
            let anomalous = (inner_radii[s] - inner_median).abs() > 0.1 * inner_median
                || (outer_radii[s] - outer_median).abs() > 0.1 * outer_median;
            !holed && !anomalous
        })
        .collect();

    Ok(Phantom { inner, outer, gt, meta: SliceMeta { healthy } })
}
