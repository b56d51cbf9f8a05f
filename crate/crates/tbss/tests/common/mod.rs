//! Independent reference implementations ("oracles") and random-input
//! generators shared by the integration tests. Everything here is written
//! from the definitions, deliberately not reusing library internals, so a
//! match is evidence rather than tautology.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tbss::volume::{Dims, ProbabilityVolume, SliceMask};

/// Exhaustive beam/stack/threshold path search over one section by explicit
/// depth-first enumeration with backtracking. Returns every voxel lying on
/// at least one accepted full-length path.
pub fn oracle_search(
    slices: &[Vec<f32>],
    rows: usize,
    cols: usize,
    beam_side: usize,
    stack_cap: usize,
    log_floor: f64,
    threshold: f64,
) -> HashSet<(usize, usize, usize)> {
    assert!(beam_side % 2 == 1);
    let mut accepted = HashSet::new();
    let logw = |s: usize, r: usize, c: usize| -> f64 {
        f64::from(slices[s][r * cols + c]).max(log_floor).ln()
    };
    let mut path: Vec<(usize, usize)> = Vec::new();

    fn extend(
        slices: &[Vec<f32>],
        rows: usize,
        cols: usize,
        beam_side: usize,
        stack_cap: usize,
        log_floor: f64,
        threshold: f64,
        path: &mut Vec<(usize, usize)>,
        cum: f64,
        accepted: &mut HashSet<(usize, usize, usize)>,
    ) {
        if path.len() == slices.len() {
            for (s, &(r, c)) in path.iter().enumerate() {
                accepted.insert((s, r, c));
            }
            return;
        }
        let next = path.len();
        let (pr, pc) = *path.last().unwrap();
        let half = beam_side / 2;
        // Threshold filter first, then keep the `stack_cap` most probable
        // children, breaking probability ties toward smaller (row, col).
        let mut children: Vec<(f32, usize, usize)> = Vec::new();
        for r in pr.saturating_sub(half)..=(pr + half).min(rows - 1) {
            for c in pc.saturating_sub(half)..=(pc + half).min(cols - 1) {
                let p = slices[next][r * cols + c];
                if cum + f64::from(p).max(log_floor).ln() > threshold {
                    children.push((p, r, c));
                }
            }
        }
        children.sort_by(|a, b| {
            b.0.partial_cmp(&a.0).unwrap().then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
        });
        children.truncate(stack_cap);
        for (p, r, c) in children {
            path.push((r, c));
            extend(
                slices,
                rows,
                cols,
                beam_side,
                stack_cap,
                log_floor,
                threshold,
                path,
                cum + f64::from(p).max(log_floor).ln(),
                accepted,
            );
            path.pop();
        }
    }

    for r in 0..rows {
        for c in 0..cols {
            let w = logw(0, r, c);
            if w > threshold {
                path.push((r, c));
                extend(
                    slices, rows, cols, beam_side, stack_cap, log_floor, threshold, &mut path,
                    w, &mut accepted,
                );
                path.pop();
            }
        }
    }
    accepted
}

/// Runs `oracle_search` on a stored volume treated as a single section.
pub fn oracle_search_volume(
    vol: &ProbabilityVolume,
    beam_side: usize,
    stack_cap: usize,
    log_floor: f64,
    threshold: f64,
) -> HashSet<(usize, usize, usize)> {
    let dims = vol.dims();
    let slices: Vec<Vec<f32>> = (0..dims.slices).map(|s| vol.slice(s).to_vec()).collect();
    oracle_search(&slices, dims.rows, dims.cols, beam_side, stack_cap, log_floor, threshold)
}

/// Straightforward two-subiteration thinning to fixpoint on a bool grid,
/// written directly from the deletion rules.
pub fn oracle_thin(grid: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let rows = grid.len();
    let cols = if rows > 0 { grid[0].len() } else { 0 };
    let mut cur = grid.to_vec();
    let px = |g: &[Vec<bool>], r: isize, c: isize| -> u32 {
        if r < 0 || c < 0 || r as usize >= rows || c as usize >= cols {
            0
        } else {
            u32::from(g[r as usize][c as usize])
        }
    };
    loop {
        let mut changed = false;
        for second_pass in [false, true] {
            let mut kill: Vec<(usize, usize)> = Vec::new();
            for r in 0..rows as isize {
                for c in 0..cols as isize {
                    if px(&cur, r, c) == 0 {
                        continue;
                    }
                    // P2..P9 clockwise from north.
                    let p = [
                        px(&cur, r - 1, c),
                        px(&cur, r - 1, c + 1),
                        px(&cur, r, c + 1),
                        px(&cur, r + 1, c + 1),
                        px(&cur, r + 1, c),
                        px(&cur, r + 1, c - 1),
                        px(&cur, r, c - 1),
                        px(&cur, r - 1, c - 1),
                    ];
                    let b: u32 = p.iter().sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a: u32 =
                        (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count() as u32;
                    if a != 1 {
                        continue;
                    }
                    let conditions = if !second_pass {
                        p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0
                    } else {
                        p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0
                    };
                    if conditions {
                        kill.push((r as usize, c as usize));
                    }
                }
            }
            if !kill.is_empty() {
                changed = true;
                for (r, c) in kill {
                    cur[r][c] = false;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

pub fn mask_to_grid(mask: &SliceMask) -> Vec<Vec<bool>> {
    (0..mask.rows()).map(|r| (0..mask.cols()).map(|c| mask.get(r, c)).collect()).collect()
}

pub fn grid_to_mask(grid: &[Vec<bool>]) -> SliceMask {
    let rows = grid.len();
    let cols = if rows > 0 { grid[0].len() } else { 0 };
    let mut mask = SliceMask::zeros(rows, cols);
    for (r, row) in grid.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v {
                mask.set(r, c, true);
            }
        }
    }
    mask
}

/// Plain double-loop Hausdorff distance with per-pair square roots.
pub fn oracle_hausdorff(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| -> f64 {
        let mut worst = 0.0f64;
        for &(pr, pc) in from {
            let mut nearest = f64::INFINITY;
            for &(qr, qc) in to {
                let dr = pr as f64 - qr as f64;
                let dc = pc as f64 - qc as f64;
                nearest = nearest.min((dr * dr + dc * dc).sqrt());
            }
            worst = worst.max(nearest);
        }
        worst
    };
    directed(a, b).max(directed(b, a))
}

/// Exhaustive Otsu scan: every split of the 256-bin histogram, between-class
/// variance computed on bin-center values, lowest maximizing split wins.
/// Returns the threshold (center of the first upper-class bin), or `None`
/// when no split yields two non-empty classes.
pub fn oracle_otsu(values: &[f32]) -> Option<f64> {
    let mut bins = [0u64; 256];
    for &v in values {
        bins[((f64::from(v) * 256.0) as usize).min(255)] += 1;
    }
    let total: u64 = bins.iter().sum();
    let center = |k: usize| (k as f64 + 0.5) / 256.0;
    let mut best: Option<(f64, usize)> = None;
    for split in 1..256 {
        let n0: u64 = bins[..split].iter().sum();
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let mu0: f64 =
            bins[..split].iter().enumerate().map(|(k, &n)| center(k) * n as f64).sum::<f64>()
                / n0 as f64;
        let mu1: f64 =
            bins[split..].iter().enumerate().map(|(k, &n)| center(split + k) * n as f64).sum::<f64>()
                / n1 as f64;
        let w0 = n0 as f64 / total as f64;
        let w1 = n1 as f64 / total as f64;
        let v = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if best.map_or(true, |(bv, _)| v > bv) {
            best = Some((v, split));
        }
    }
    best.map(|(_, split)| center(split))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability volume mixing exact 0.0, exact 1.0, and uniform draws,
/// so ties and the log floor both get exercised.
pub fn random_probability_volume(rng: &mut ChaCha8Rng, dims: Dims) -> ProbabilityVolume {
    let data: Vec<f32> = (0..dims.voxels())
        .map(|_| match rng.random_range(0..10u32) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..=1.0f32),
        })
        .collect();
    ProbabilityVolume::new(dims, data).unwrap()
}

/// Random union of integer-centered discs (radius >= 2). Integer centers
/// keep isolated discs odd-symmetric, so plain two-subiteration thinning
/// leaves a residue instead of erasing the whole blob.
pub fn random_blob(rng: &mut ChaCha8Rng, max_side: usize) -> SliceMask {
    let rows = rng.random_range(8..=max_side);
    let cols = rng.random_range(8..=max_side);
    let mut mask = SliceMask::zeros(rows, cols);
    let discs = rng.random_range(1..=4usize);
    for _ in 0..discs {
        // Keep every disc fully inside the grid: a disc clipped by the border
        // degenerates into a solid block, a shape two-subiteration thinning
        // erodes to nothing (the 2x2-square pathology writ large).
        let max_fit = ((rows.min(cols) as i64) - 1) / 2;
        let radius = rng.random_range(2..=7i64).min(max_fit);
        let cr = rng.random_range(radius..rows as i64 - radius);
        let cc = rng.random_range(radius..cols as i64 - radius);
        for r in (cr - radius)..=(cr + radius) {
            for c in (cc - radius)..=(cc + radius) {
                let dr = r - cr;
                let dc = c - cc;
                if dr * dr + dc * dc <= radius * radius {
                    mask.set(r as usize, c as usize, true);
                }
            }
        }
    }
    mask
}

/// Number of 8-connected foreground components.
pub fn count_components(mask: &SliceMask) -> usize {
    let rows = mask.rows();
    let cols = mask.cols();
    let mut seen = vec![false; rows * cols];
    let mut count = 0;
    for start in 0..rows * cols {
        if seen[start] || mask.data()[start] == 0 {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if !seen[j] && mask.data()[j] != 0 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    count
}

/// 4-connected background regions, split into the outside (touching the
/// image frame) and enclosed holes.
pub struct BackgroundRegions {
    pub outside: HashSet<(usize, usize)>,
    pub holes: Vec<HashSet<(usize, usize)>>,
}

pub fn background_regions(mask: &SliceMask) -> BackgroundRegions {
    let rows = mask.rows();
    let cols = mask.cols();
    let mut seen = vec![false; rows * cols];
    let mut outside = HashSet::new();
    let mut holes = Vec::new();
    for start in 0..rows * cols {
        if seen[start] || mask.data()[start] != 0 {
            continue;
        }
        let mut region = HashSet::new();
        let mut frame = false;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            region.insert((r, c));
            if r == 0 || c == 0 || r == rows - 1 || c == cols - 1 {
                frame = true;
            }
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                    continue;
                }
                let j = nr as usize * cols + nc as usize;
                if !seen[j] && mask.data()[j] == 0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if frame {
            outside.extend(region);
        } else {
            holes.push(region);
        }
    }
    BackgroundRegions { outside, holes }
}

/// Foreground pixels 4-adjacent to any pixel of `region`.
pub fn adjacent_foreground(
    mask: &SliceMask,
    region: &HashSet<(usize, usize)>,
) -> HashSet<(usize, usize)> {
    let mut out = HashSet::new();
    for &(r, c) in region {
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr as usize >= mask.rows() || nc as usize >= mask.cols() {
                continue;
            }
            if mask.get(nr as usize, nc as usize) {
                out.insert((nr as usize, nc as usize));
            }
        }
    }
    out
}

/// Random point set with coordinates below `limit`.
pub fn random_points(rng: &mut ChaCha8Rng, max_len: usize, limit: usize) -> Vec<(usize, usize)> {
    let n = rng.random_range(1..=max_len);
    (0..n).map(|_| (rng.random_range(0..limit), rng.random_range(0..limit))).collect()
}

pub fn mask_to_set(mask: &tbss::volume::BinaryMask) -> HashSet<(usize, usize, usize)> {
    let dims = mask.dims();
    let mut set = HashSet::new();
    for s in 0..dims.slices {
        for r in 0..dims.rows {
            for c in 0..dims.cols {
                if mask.get(s, r, c) {
                    set.insert((s, r, c));
                }
            }
        }
    }
    set
}
