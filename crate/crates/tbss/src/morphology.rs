//! Per-slice binary morphology: thinning, border following, and the
//! inside-contour extraction used to sharpen reconstructed boundaries.
//!
//! Foreground is 8-connected and background 4-connected throughout. Traced
//! contours are normalised to start at their lexicographically smallest
//! `(row, col)` pixel and, when they enclose area, to proceed clockwise in
//! image coordinates (row axis pointing down).

use rayon::prelude::*;

use crate::volume::{LabelVolume, SliceMask, INNER, OUTER};

/// Ordered border pixels. `closed` is set for traced borders, whose last
/// point is 8-adjacent to the first; the empty contour is open.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Contour {
    pub points: Vec<(usize, usize)>,
    pub closed: bool,
}

impl Contour {
    pub fn empty() -> Self {
        Contour { points: Vec::new(), closed: false }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Borders of one mask, split by kind: outer borders enclose a foreground
/// component; hole borders run along an enclosed background component.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Borders {
    pub outer: Vec<Contour>,
    pub holes: Vec<Contour>,
}

/// Inner and outer channel contours of one slice.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SliceContours {
    pub inner: Contour,
    pub outer: Contour,
}

// Neighbour order used by thinning: N, NE, E, SE, S, SW, W, NW.
const NB8: [(i32, i32); 8] =
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

fn neighbourhood(mask: &SliceMask, row: usize, col: usize) -> [u8; 8] {
    let mut nb = [0u8; 8];
    for (i, (dr, dc)) in NB8.iter().enumerate() {
        let r = row as i32 + dr;
        let c = col as i32 + dc;
        if r >= 0 && c >= 0 && (r as usize) < mask.rows() && (c as usize) < mask.cols() {
            nb[i] = u8::from(mask.get(r as usize, c as usize));
        }
    }
    nb
}

fn zero_one_transitions(nb: &[u8; 8]) -> u32 {
    let mut count = 0;
    for i in 0..8 {
        if nb[i] == 0 && nb[(i + 1) % 8] == 1 {
            count += 1;
        }
    }
    count
}

/// Two-subiteration thinning to a 1-pixel-wide skeleton. Each subiteration
/// flags deletable border pixels against the current state and removes them
/// together; iteration stops at the fixpoint.
pub fn skeletonize(mask: &SliceMask) -> SliceMask {
    let mut cur = mask.clone();
    let rows = cur.rows();
    let cols = cur.cols();
    if rows == 0 || cols == 0 {
        return cur;
    }
    let mut deletions: Vec<(usize, usize)> = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            deletions.clear();
            for row in 0..rows {
                for col in 0..cols {
                    if !cur.get(row, col) {
                        continue;
                    }
                    let nb = neighbourhood(&cur, row, col);
                    let b: u32 = nb.iter().map(|&v| u32::from(v)).sum();
                    if !(2..=6).contains(&b) || zero_one_transitions(&nb) != 1 {
                        continue;
                    }
                    let (n, e, s, w) = (nb[0], nb[2], nb[4], nb[6]);
                    let ok = if pass == 0 {
                        n & e & s == 0 && e & s & w == 0
                    } else {
                        n & e & w == 0 && n & s & w == 0
                    };
                    if ok {
                        deletions.push((row, col));
                    }
                }
            }
            if !deletions.is_empty() {
                changed = true;
                for &(row, col) in &deletions {
                    cur.set(row, col, false);
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

// Border following directions, counterclockwise on screen: E, NE, N, NW, W,
// SW, S, SE.
const TRACE_DIRS: [(i32, i32); 8] =
    [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)];

fn dir_index(dr: i32, dc: i32) -> usize {
    TRACE_DIRS.iter().position(|&d| d == (dr, dc)).expect("non-adjacent pixels")
}

fn at(f: &[i32], rows: usize, cols: usize, r: i32, c: i32) -> i32 {
    if r < 0 || c < 0 || r as usize >= rows || c as usize >= cols {
        0
    } else {
        f[r as usize * cols + c as usize]
    }
}

/// Follows one border starting at `start`, whose neighbour `first_bg` is the
/// background pixel that triggered the start condition. Marks followed pixels
/// in `f` with `nbd` (negated on east-facing border pixels) and returns the
/// visited sequence.
fn follow_border(
    f: &mut [i32],
    rows: usize,
    cols: usize,
    start: (usize, usize),
    first_bg: (i32, i32),
    nbd: i32,
) -> Vec<(usize, usize)> {
    let (si, sj) = (start.0 as i32, start.1 as i32);
    let d0 = dir_index(first_bg.0 - si, first_bg.1 - sj);

    // Clockwise sweep around the start for the first border neighbour.
    let mut p1 = None;
    for k in 0..8 {
        let idx = (d0 + 8 - k) % 8;
        let (dr, dc) = TRACE_DIRS[idx];
        if at(f, rows, cols, si + dr, sj + dc) != 0 {
            p1 = Some((si + dr, sj + dc));
            break;
        }
    }
    let Some(p1) = p1 else {
        f[start.0 * cols + start.1] = -nbd;
        return vec![start];
    };

    let mut points = Vec::new();
    let mut p2 = p1;
    let mut p3 = (si, sj);
    loop {
        // Counterclockwise sweep around p3, starting just past p2.
        let d = dir_index(p2.0 - p3.0, p2.1 - p3.1);
        let mut p4 = (0, 0);
        let mut east_bg_examined = false;
        for k in 1..=8 {
            let idx = (d + k) % 8;
            let (dr, dc) = TRACE_DIRS[idx];
            let (r, c) = (p3.0 + dr, p3.1 + dc);
            if at(f, rows, cols, r, c) != 0 {
                p4 = (r, c);
                break;
            }
            if idx == 0 {
                east_bg_examined = true;
            }
        }
        let slot = &mut f[p3.0 as usize * cols + p3.1 as usize];
        if east_bg_examined {
            *slot = -nbd;
        } else if *slot == 1 {
            *slot = nbd;
        }
        points.push((p3.0 as usize, p3.1 as usize));
        if p4 == (si, sj) && p3 == p1 {
            return points;
        }
        p2 = p3;
        p3 = p4;
    }
}

/// Rotates the cycle to start at its smallest point and orients enclosing
/// contours clockwise in image coordinates.
fn normalise_contour(mut points: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    if points.len() < 2 {
        return points;
    }
    let min_at = points
        .iter()
        .enumerate()
        .min_by_key(|&(_, p)| p)
        .map(|(i, _)| i)
        .unwrap();
    points.rotate_left(min_at);
    let mut area2 = 0i64;
    for i in 0..points.len() {
        let (y0, x0) = points[i];
        let (y1, x1) = points[(i + 1) % points.len()];
        area2 += x0 as i64 * y1 as i64 - x1 as i64 * y0 as i64;
    }
    if area2 < 0 {
        points[1..].reverse();
    }
    points
}

/// Traces every border of the mask by raster scan and border following,
/// classifying each as an outer or a hole border at its start condition.
pub fn trace_borders(mask: &SliceMask) -> Borders {
    let rows = mask.rows();
    let cols = mask.cols();
    let mut borders = Borders::default();
    if rows == 0 || cols == 0 {
        return borders;
    }
    let mut f: Vec<i32> = mask.data().iter().map(|&v| i32::from(v)).collect();
    let mut nbd = 1i32;
    for r in 0..rows {
        for c in 0..cols {
            let v = f[r * cols + c];
            if v == 0 {
                continue;
            }
            let west_bg = c == 0 || f[r * cols + c - 1] == 0;
            let east_bg = c + 1 == cols || f[r * cols + c + 1] == 0;
            let (is_hole, first_bg) = if v == 1 && west_bg {
                (false, (r as i32, c as i32 - 1))
            } else if v >= 1 && east_bg {
                (true, (r as i32, c as i32 + 1))
            } else {
                continue;
            };
            nbd += 1;
            let points = follow_border(&mut f, rows, cols, (r, c), first_bg, nbd);
            let contour = Contour { points: normalise_contour(points), closed: true };
            if is_hole {
                borders.holes.push(contour);
            } else {
                borders.outer.push(contour);
            }
        }
    }
    borders
}

fn longest(contours: Vec<Contour>) -> Option<Contour> {
    let mut best: Option<Contour> = None;
    for c in contours {
        let better = match &best {
            None => true,
            Some(b) => c.len() > b.len() || (c.len() == b.len() && c.points < b.points),
        };
        if better {
            best = Some(c);
        }
    }
    best
}

/// The boundary line facing the vessel interior: the longest hole border,
/// falling back to the longest outer border for masks without holes, and the
/// empty contour for empty masks.
pub fn inside_contour(mask: &SliceMask) -> Contour {
    let borders = trace_borders(mask);
    longest(borders.holes)
        .or_else(|| longest(borders.outer))
        .unwrap_or_else(Contour::empty)
}

/// Per-slice, per-channel contour extraction; `thin` selects whether each
/// channel mask is skeletonized before taking the inside contour.
pub fn extract_contours(labels: &LabelVolume, thin: bool) -> Vec<SliceContours> {
    let dims = labels.dims();
    (0..dims.slices)
        .into_par_iter()
        .map(|s| {
            let channel = |label: u8| {
                let mask = labels.channel_slice(s, label);
                let mask = if thin { skeletonize(&mask) } else { mask };
                inside_contour(&mask)
            };
            SliceContours { inner: channel(INNER), outer: channel(OUTER) }
        })
        .collect()
}

/// Skeletonizes each channel slice and extracts its inside contour.
pub fn refine_labels(labels: &LabelVolume) -> Vec<SliceContours> {
    extract_contours(labels, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: usize, cols: usize, on: &[(usize, usize)]) -> SliceMask {
        let mut m = SliceMask::zeros(rows, cols);
        for &(r, c) in on {
            m.set(r, c, true);
        }
        m
    }

    fn square_ring(top: usize, left: usize, side: usize) -> Vec<(usize, usize)> {
        let mut px = Vec::new();
        for i in 0..side {
            px.push((top, left + i));
            px.push((top + side - 1, left + i));
            px.push((top + i, left));
            px.push((top + i, left + side - 1));
        }
        px.sort_unstable();
        px.dedup();
        px
    }

    #[test]
    fn thin_line_is_stable() {
        let line: Vec<(usize, usize)> = (1..8).map(|c| (1, c)).collect();
        let m = mask_from(3, 9, &line);
        assert_eq!(skeletonize(&m), m);
    }

    #[test]
    fn empty_mask_is_stable() {
        let m = SliceMask::zeros(4, 4);
        assert_eq!(skeletonize(&m), m);
        assert_eq!(trace_borders(&m), Borders::default());
        assert_eq!(inside_contour(&m), Contour::empty());
    }

    #[test]
    fn skeleton_is_subset_and_idempotent() {
        let mut m = SliceMask::zeros(9, 16);
        for r in 2..7usize {
            for c in 2..14usize {
                m.set(r, c, true);
            }
        }
        let skel = skeletonize(&m);
        for r in 0..9 {
            for c in 0..16 {
                assert!(!skel.get(r, c) || m.get(r, c));
            }
        }
        assert_eq!(skeletonize(&skel), skel);
        assert!(skel.count_ones() > 0);
        // A wide rectangle thins to a roughly medial horizontal curve.
        assert!(skel.count_ones() < 20);
    }

    #[test]
    fn even_square_erodes_away() {
        // Known property of two-subiteration thinning: a 2x2 block satisfies
        // both subiteration-1 masks at every pixel and is deleted whole.
        let m = mask_from(4, 4, &[(1, 1), (1, 2), (2, 1), (2, 2)]);
        assert_eq!(skeletonize(&m).count_ones(), 0);
    }

    #[test]
    fn single_pixel_is_one_outer_border() {
        let m = mask_from(3, 3, &[(1, 1)]);
        let borders = trace_borders(&m);
        assert_eq!(borders.outer.len(), 1);
        assert!(borders.holes.is_empty());
        assert_eq!(borders.outer[0].points, vec![(1, 1)]);
        assert!(borders.outer[0].closed);
    }

    #[test]
    fn square_ring_has_one_outer_and_one_hole_border() {
        let ring = square_ring(1, 1, 7);
        let m = mask_from(9, 9, &ring);
        let borders = trace_borders(&m);
        assert_eq!(borders.outer.len(), 1);
        assert_eq!(borders.holes.len(), 1);

        // The hole border is exactly the ring pixels 4-adjacent to the hole.
        let mut expected: Vec<(usize, usize)> = ring
            .iter()
            .copied()
            .filter(|&(r, c)| {
                [(0i32, 1i32), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dr, dc)| {
                    let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                    (2..=6).contains(&nr) && (2..=6).contains(&nc) && !m.get(nr as usize, nc as usize)
                })
            })
            .collect();
        expected.sort_unstable();
        let mut got = borders.holes[0].points.clone();
        got.sort_unstable();
        got.dedup();
        assert_eq!(got, expected);
        assert_eq!(expected.len(), 20);
    }

    #[test]
    fn one_pixel_ring_inside_contour_is_the_ring() {
        let ring = square_ring(2, 2, 5);
        let m = mask_from(9, 9, &ring);
        let contour = inside_contour(&m);
        let mut got = contour.points.clone();
        got.sort_unstable();
        got.dedup();
        let expected: Vec<(usize, usize)> = ring
            .iter()
            .copied()
            .filter(|&(r, c)| {
                [(0i32, 1i32), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dr, dc)| {
                    let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                    (3..=5).contains(&nr) && (3..=5).contains(&nc)
                })
            })
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn thick_ring_inside_contour_is_the_inner_layer() {
        let mut on = Vec::new();
        for r in 0..8usize {
            for c in 0..8usize {
                let border1 = r == 0 || r == 7 || c == 0 || c == 7;
                let border2 = r == 1 || r == 6 || c == 1 || c == 6;
                if border1 || border2 {
                    on.push((r, c));
                }
            }
        }
        let m = mask_from(8, 8, &on);
        let contour = inside_contour(&m);
        let mut got = contour.points.clone();
        got.sort_unstable();
        got.dedup();
        let expected: Vec<(usize, usize)> = on
            .iter()
            .copied()
            .filter(|&(r, c)| {
                [(0i32, 1i32), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dr, dc)| {
                    let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                    (2..=5).contains(&nr) && (2..=5).contains(&nc)
                })
            })
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn open_arc_falls_back_to_outer_border() {
        let mut ring = square_ring(1, 1, 5);
        ring.retain(|&(r, _)| r != 1);
        let m = mask_from(7, 7, &ring);
        let borders = trace_borders(&m);
        assert!(borders.holes.is_empty());
        let contour = inside_contour(&m);
        assert!(!contour.is_empty());
        let mut got = contour.points.clone();
        got.sort_unstable();
        got.dedup();
        let mut expected = ring.clone();
        expected.sort_unstable();
        assert_eq!(got, expected);
    }

    #[test]
    fn two_components_trace_two_outer_borders() {
        let mut on = Vec::new();
        for r in 1..4usize {
            for c in 1..4usize {
                on.push((r, c));
                on.push((r + 5, c + 5));
            }
        }
        let m = mask_from(10, 10, &on);
        let borders = trace_borders(&m);
        assert_eq!(borders.outer.len(), 2);
        assert!(borders.holes.is_empty());
    }

    #[test]
    fn contours_start_at_min_point_and_close() {
        let ring = square_ring(2, 3, 5);
        let m = mask_from(9, 10, &ring);
        let borders = trace_borders(&m);
        for contour in borders.outer.iter().chain(&borders.holes) {
            let min = contour.points.iter().min().unwrap();
            assert_eq!(&contour.points[0], min);
            let first = contour.points[0];
            let last = *contour.points.last().unwrap();
            assert!(first.0.abs_diff(last.0) <= 1 && first.1.abs_diff(last.1) <= 1);
        }
    }

    #[test]
    fn refine_picks_longest_component_contour() {
        let ring = square_ring(1, 1, 6);
        let mut on = ring.clone();
        on.push((8, 8));
        let m = mask_from(10, 10, &on);
        let contour = inside_contour(&m);
        assert!(contour.len() >= 4);
        assert!(contour.points.iter().all(|p| ring.contains(p)));
    }
}
