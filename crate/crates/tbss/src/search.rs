//! Path search across slices under beam, stack, and threshold constraints.
//!
//! A path assigns one voxel per slice of a section; each step stays inside a
//! `beam_side x beam_side` window around the previous voxel, every prefix of
//! the cumulative log-probability must stay strictly above the threshold, and
//! at most `stack_cap` children are expanded per path per slice (the highest
//! probability candidates that pass the threshold, ties broken by ascending
//! `(row, col)`). A path is accepted when it reaches the section's last slice;
//! the reconstruction is the union of all accepted paths' voxels.
//!
//! Because probabilities never exceed 1, prefix sums only decrease, so a path
//! is accepted exactly when its total stays above the threshold, and the
//! stack cap keeps a fixed top-`stack_cap` edge set per voxel regardless of
//! the running sum. The search therefore computes, per voxel, the best
//! achievable prefix and suffix sums over that edge set and emits the voxels
//! whose combined best path clears the threshold. This yields the same mask
//! as exhaustive depth-first enumeration with backtracking in time polynomial
//! in the section size.

use rayon::prelude::*;
use thiserror::Error;

use crate::volume::{BinaryMask, Dims, LabelVolume, ProbabilityVolume, VoxelCoord, INNER, OUTER};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("section_len must be at least 1")]
    BadSectionLen,
    #[error("stack_cap must be at least 1")]
    BadStackCap,
    #[error("beam_side must be odd and at least 1, got {0}")]
    BadBeamSide(usize),
    #[error("log_floor must be finite and in (0, 1], got {0}")]
    BadLogFloor(f64),
    #[error("threshold must be finite, got {0}")]
    BadThreshold(f64),
    #[error("section slice {index} has {len} values, expected {expected}")]
    BadSectionSlice { index: usize, len: usize, expected: usize },
    #[error("section must contain at least one slice")]
    EmptySection,
    #[error("section range {start}..{end} out of bounds for {slices} slices")]
    RangeOutOfBounds { start: usize, end: usize, slices: usize },
    #[error("dims mismatch: {0} vs {1}")]
    DimsMismatch(Dims, Dims),
}

/// Search hyperparameters. Distinct thresholds are carried for the inner and
/// outer boundary; section search takes the applicable one explicitly.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SearchParams {
    /// Slices per section (`M`); the final section may be shorter.
    pub section_len: usize,
    /// Log-probability threshold for the inner boundary.
    pub threshold_inner: f64,
    /// Log-probability threshold for the outer boundary.
    pub threshold_outer: f64,
    /// Maximum children expanded per path per slice (`S`).
    pub stack_cap: usize,
    /// Side of the square step neighbourhood (`B = beam_side^2`); must be odd.
    pub beam_side: usize,
    /// Probability substituted for values below it before taking the log.
    pub log_floor: f64,
    /// Scale the threshold by `section length / section_len` for the final
    /// short section instead of applying it unchanged.
    pub scale_threshold: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            section_len: 8,
            threshold_inner: -0.5,
            threshold_outer: -3.0,
            stack_cap: 9,
            beam_side: 5,
            log_floor: 1e-9,
            scale_threshold: false,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.section_len < 1 {
            return Err(SearchError::BadSectionLen);
        }
        if self.stack_cap < 1 {
            return Err(SearchError::BadStackCap);
        }
        if self.beam_side < 1 || self.beam_side % 2 == 0 {
            return Err(SearchError::BadBeamSide(self.beam_side));
        }
        if !self.log_floor.is_finite() || self.log_floor <= 0.0 || self.log_floor > 1.0 {
            return Err(SearchError::BadLogFloor(self.log_floor));
        }
        for t in [self.threshold_inner, self.threshold_outer] {
            if !t.is_finite() {
                return Err(SearchError::BadThreshold(t));
            }
        }
        Ok(())
    }
}

/// Half-open slice range `[start, end)` forming one section.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SectionRange {
    pub start: usize,
    pub end: usize,
}

impl SectionRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Splits `n_slices` into consecutive sections of `section_len` slices; the
/// last section keeps the remainder and may be shorter.
pub fn partition_sections(n_slices: usize, section_len: usize) -> Vec<SectionRange> {
    assert!(section_len >= 1, "section_len must be at least 1");
    let mut out = Vec::with_capacity(n_slices.div_ceil(section_len));
    let mut start = 0;
    while start < n_slices {
        let end = (start + section_len).min(n_slices);
        out.push(SectionRange { start, end });
        start = end;
    }
    out
}

/// Cumulative natural-log probability of a voxel sequence.
pub fn path_logprob(probs: &[f64], log_floor: f64) -> f64 {
    probs.iter().map(|&p| p.max(log_floor).ln()).sum()
}

/// Search direction along the artery axis.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Borrowed view of one section's probability slices in search order.
#[derive(Clone, Debug)]
pub struct SectionView<'a> {
    rows: usize,
    cols: usize,
    slices: Vec<&'a [f32]>,
}

impl<'a> SectionView<'a> {
    pub fn new(rows: usize, cols: usize, slices: Vec<&'a [f32]>) -> Result<Self, SearchError> {
        if slices.is_empty() {
            return Err(SearchError::EmptySection);
        }
        for (index, s) in slices.iter().enumerate() {
            if s.len() != rows * cols {
                return Err(SearchError::BadSectionSlice {
                    index,
                    len: s.len(),
                    expected: rows * cols,
                });
            }
        }
        Ok(SectionView { rows, cols, slices })
    }

    pub fn from_volume(
        vol: &'a ProbabilityVolume,
        range: SectionRange,
    ) -> Result<Self, SearchError> {
        let dims = vol.dims();
        if range.is_empty() || range.end > dims.slices {
            return Err(SearchError::RangeOutOfBounds {
                start: range.start,
                end: range.end,
                slices: dims.slices,
            });
        }
        let slices = (range.start..range.end).map(|s| vol.slice(s)).collect();
        Ok(SectionView { rows: dims.rows, cols: dims.cols, slices })
    }

    /// Same slices in reversed order.
    pub fn reversed(mut self) -> Self {
        self.slices.reverse();
        self
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// One accepted path: one voxel per section slice (`slice` is the position
/// within the searched section) and the cumulative log-probability.
#[derive(Clone, PartialEq, Debug)]
pub struct SearchPath {
    pub coords: Vec<VoxelCoord>,
    pub cum_logprob: f64,
}

/// Per-voxel best prefix/suffix log-probability sums over the capped edges.
struct PathTables {
    rows: usize,
    cols: usize,
    logp: Vec<Vec<f64>>,
    prefix: Vec<Vec<f64>>,
    suffix: Vec<Vec<f64>>,
}

/// Collects the top-`stack_cap` step candidates from `(row, col)` into
/// `next`, ordered by descending probability with ties by ascending
/// `(row, col)`, into `buf`.
fn top_children(
    next: &[f32],
    rows: usize,
    cols: usize,
    row: usize,
    col: usize,
    half: usize,
    stack_cap: usize,
    buf: &mut Vec<(f32, usize, usize)>,
) {
    buf.clear();
    let r0 = row.saturating_sub(half);
    let r1 = (row + half).min(rows - 1);
    let c0 = col.saturating_sub(half);
    let c1 = (col + half).min(cols - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            buf.push((next[r * cols + c], r, c));
        }
    }
    buf.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    buf.truncate(stack_cap);
}

fn compute_tables(section: &SectionView<'_>, params: &SearchParams, threshold: f64) -> PathTables {
    let m = section.len();
    let rows = section.rows;
    let cols = section.cols;
    let n = rows * cols;
    let half = params.beam_side / 2;
    let floor = params.log_floor;

    let logp: Vec<Vec<f64>> = section
        .slices
        .iter()
        .map(|s| s.iter().map(|&p| (p as f64).max(floor).ln()).collect())
        .collect();

    let mut buf = Vec::with_capacity(params.beam_side * params.beam_side);

    // suffix[i][v]: best log-probability sum collectable over slices i+1..m
    // when a path sits at v, following only top-capped edges.
    let mut suffix = vec![vec![0.0f64; n]; m];
    for i in (0..m - 1).rev() {
        let (head, tail) = suffix.split_at_mut(i + 1);
        let cur = &mut head[i];
        let nxt = &tail[0];
        for row in 0..rows {
            for col in 0..cols {
                top_children(section.slices[i + 1], rows, cols, row, col, half, params.stack_cap, &mut buf);
                let mut best = f64::NEG_INFINITY;
                for &(_, r, c) in &buf {
                    let v = logp[i + 1][r * cols + c] + nxt[r * cols + c];
                    if v > best {
                        best = v;
                    }
                }
                cur[row * cols + col] = best;
            }
        }
    }

    // prefix[i][v]: best log-probability sum of a path over slices 0..=i
    // ending at v. Prefixes at or below the threshold are dead ends and are
    // not extended, matching the depth-first expansion rule.
    let mut prefix = vec![vec![f64::NEG_INFINITY; n]; m];
    prefix[0] = logp[0].clone();
    for i in 1..m {
        let (head, tail) = prefix.split_at_mut(i);
        let prev = &head[i - 1];
        let cur = &mut tail[0];
        for row in 0..rows {
            for col in 0..cols {
                let base = prev[row * cols + col];
                if base <= threshold {
                    continue;
                }
                top_children(section.slices[i], rows, cols, row, col, half, params.stack_cap, &mut buf);
                for &(_, r, c) in &buf {
                    let v = base + logp[i][r * cols + c];
                    let slot = &mut cur[r * cols + c];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
    }

    PathTables { rows, cols, logp, prefix, suffix }
}

/// Searches one section and returns the union of accepted paths' voxels as a
/// `section length x rows x cols` mask.
pub fn search_section(
    section: &SectionView<'_>,
    params: &SearchParams,
    threshold: f64,
) -> Result<BinaryMask, SearchError> {
    params.validate()?;
    if !threshold.is_finite() {
        return Err(SearchError::BadThreshold(threshold));
    }
    let tables = compute_tables(section, params, threshold);
    let m = section.len();
    let n = tables.rows * tables.cols;
    let mut mask = BinaryMask::zeros(Dims::new(m, tables.rows, tables.cols));
    for i in 0..m {
        let out = mask.slice_mut(i);
        for v in 0..n {
            if tables.prefix[i][v] + tables.suffix[i][v] > threshold {
                out[v] = 1;
            }
        }
    }
    Ok(mask)
}

/// Reconstructs one accepted path through `(slice, row, col)` of the section,
/// or `None` when no accepted path visits that voxel. The returned path
/// maximises the cumulative log-probability among those through the voxel.
pub fn witness_path(
    section: &SectionView<'_>,
    params: &SearchParams,
    threshold: f64,
    slice: usize,
    row: usize,
    col: usize,
) -> Result<Option<SearchPath>, SearchError> {
    params.validate()?;
    if !threshold.is_finite() {
        return Err(SearchError::BadThreshold(threshold));
    }
    let m = section.len();
    assert!(slice < m && row < section.rows && col < section.cols, "voxel out of bounds");
    let tables = compute_tables(section, params, threshold);
    let cols = tables.cols;
    let v = row * cols + col;
    let total = tables.prefix[slice][v] + tables.suffix[slice][v];
    if !(total > threshold) {
        return Ok(None);
    }

    let half = params.beam_side / 2;
    let mut buf = Vec::with_capacity(params.beam_side * params.beam_side);
    let mut coords = vec![VoxelCoord::new(slice, row, col)];

    // Walk the prefix backwards: find a predecessor whose capped children
    // include the current voxel and whose best prefix extends to ours.
    let (mut r, mut c) = (row, col);
    for i in (1..=slice).rev() {
        let target = tables.prefix[i][r * cols + c];
        let mut found = false;
        'scan: for pr in r.saturating_sub(half)..=(r + half).min(tables.rows - 1) {
            for pc in c.saturating_sub(half)..=(c + half).min(cols - 1) {
                let base = tables.prefix[i - 1][pr * cols + pc];
                if !(base > threshold) {
                    continue;
                }
                top_children(section.slices[i], tables.rows, cols, pr, pc, half, params.stack_cap, &mut buf);
                if buf.iter().any(|&(_, br, bc)| br == r && bc == c)
                    && base + tables.logp[i][r * cols + c] == target
                {
                    coords.push(VoxelCoord::new(i - 1, pr, pc));
                    r = pr;
                    c = pc;
                    found = true;
                    break 'scan;
                }
            }
        }
        assert!(found, "prefix table inconsistent");
    }
    coords.reverse();

    // Walk the suffix forwards along best capped children.
    let (mut r, mut c) = (row, col);
    for i in slice..m - 1 {
        let target = tables.suffix[i][r * cols + c];
        top_children(section.slices[i + 1], tables.rows, cols, r, c, half, params.stack_cap, &mut buf);
        let step = buf
            .iter()
            .find(|&&(_, br, bc)| {
                tables.logp[i + 1][br * cols + bc] + tables.suffix[i + 1][br * cols + bc] == target
            })
            .copied();
        let (_, br, bc) = step.expect("suffix table inconsistent");
        coords.push(VoxelCoord::new(i + 1, br, bc));
        r = br;
        c = bc;
    }

    Ok(Some(SearchPath { coords, cum_logprob: total }))
}

fn effective_threshold(threshold: f64, section_slices: usize, params: &SearchParams) -> f64 {
    if params.scale_threshold {
        threshold * section_slices as f64 / params.section_len as f64
    } else {
        threshold
    }
}

/// Runs the sectioned search over a whole volume in one direction. Reverse
/// search reverses each section's slice order before searching and maps the
/// resulting mask back to artery order.
pub fn search_direction(
    vol: &ProbabilityVolume,
    params: &SearchParams,
    threshold: f64,
    direction: Direction,
) -> Result<BinaryMask, SearchError> {
    params.validate()?;
    if !threshold.is_finite() {
        return Err(SearchError::BadThreshold(threshold));
    }
    let dims = vol.dims();
    let sections = partition_sections(dims.slices, params.section_len);
    let parts: Vec<(SectionRange, BinaryMask)> = sections
        .into_par_iter()
        .map(|range| {
            let mut view = SectionView::from_volume(vol, range)?;
            if direction == Direction::Reverse {
                view = view.reversed();
            }
            let t = effective_threshold(threshold, range.len(), params);
            search_section(&view, params, t).map(|mask| (range, mask))
        })
        .collect::<Result<_, SearchError>>()?;

    let mut out = BinaryMask::zeros(dims);
    for (range, mask) in parts {
        for j in 0..range.len() {
            let artery_slice = match direction {
                Direction::Forward => range.start + j,
                Direction::Reverse => range.end - 1 - j,
            };
            out.slice_mut(artery_slice).copy_from_slice(mask.slice(j));
        }
    }
    Ok(out)
}

/// Merges the four directional masks into labels: inner wins where both
/// boundaries claim a voxel, background elsewhere.
pub fn merge_masks(
    inner_fwd: &BinaryMask,
    outer_fwd: &BinaryMask,
    inner_rev: &BinaryMask,
    outer_rev: &BinaryMask,
) -> Result<LabelVolume, SearchError> {
    let dims = inner_fwd.dims();
    for other in [outer_fwd.dims(), inner_rev.dims(), outer_rev.dims()] {
        if other != dims {
            return Err(SearchError::DimsMismatch(dims, other));
        }
    }
    let mut labels = LabelVolume::zeros(dims);
    let n = dims.voxels();
    for i in 0..n {
        let v = if inner_fwd.data()[i] | inner_rev.data()[i] != 0 {
            INNER
        } else if outer_fwd.data()[i] | outer_rev.data()[i] != 0 {
            OUTER
        } else {
            continue;
        };
        labels.data_mut()[i] = v;
    }
    Ok(labels)
}

/// Full reconstruction: bidirectional search per boundary channel, then merge.
pub fn reconstruct_artery(
    inner_probs: &ProbabilityVolume,
    outer_probs: &ProbabilityVolume,
    params: &SearchParams,
) -> Result<LabelVolume, SearchError> {
    if inner_probs.dims() != outer_probs.dims() {
        return Err(SearchError::DimsMismatch(inner_probs.dims(), outer_probs.dims()));
    }
    params.validate()?;
    let ((inner_fwd, inner_rev), (outer_fwd, outer_rev)) = rayon::join(
        || {
            rayon::join(
                || search_direction(inner_probs, params, params.threshold_inner, Direction::Forward),
                || search_direction(inner_probs, params, params.threshold_inner, Direction::Reverse),
            )
        },
        || {
            rayon::join(
                || search_direction(outer_probs, params, params.threshold_outer, Direction::Forward),
                || search_direction(outer_probs, params, params.threshold_outer, Direction::Reverse),
            )
        },
    );
    merge_masks(&inner_fwd?, &outer_fwd?, &inner_rev?, &outer_rev?)
}
