//! Optimal detection-to-vessel assignment.
//!
//! Minimum-cost bipartite matching (Jonker-Volgenant style potentials
//! with shortest augmenting paths, O(n^3)) on the theta cost matrix,
//! padded square with the threshold so that staying unmatched is always
//! available at cost `threshold`.

use nalgebra::DMatrix;

use super::{match_cost, Detection2D, ProjectedSegment};

/// One accepted detection-vessel pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub detection_index: usize,
    pub mmsi: u32,
    pub theta: f64,
}

/// Sides left unpaired, with the only reason matching itself can give.
#[derive(Debug, Clone, PartialEq)]
pub struct Unmatched {
    pub detections: Vec<usize>,
    pub vessels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationOutcome {
    pub matched: Vec<Association>,
    pub no_match: Unmatched,
}

/// Exact minimum-cost assignment on a square matrix; returns the column
/// chosen for each row.
pub fn solve_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; p[j] is the row assigned to column j (0 = none).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Associates detections with projected vessel segments.
///
/// The cost matrix is padded square with `threshold`; pairs whose theta
/// ends up at or above the threshold are reported unmatched (the boundary
/// is exclusive). Either side may be empty.
pub fn associate(
    dets: &[Detection2D],
    segs: &[(u32, ProjectedSegment)],
    image_w: f64,
    image_h: f64,
    threshold: f64,
    border_margin_px: f64,
) -> AssociationOutcome {
    let nd = dets.len();
    let ns = segs.len();
    let n = nd.max(ns);
    if n == 0 {
        return AssociationOutcome {
            matched: Vec::new(),
            no_match: Unmatched {
                detections: Vec::new(),
                vessels: Vec::new(),
            },
        };
    }
    let cost = DMatrix::from_fn(n, n, |i, j| {
        if i < nd && j < ns {
            match_cost(&dets[i], &segs[j].1, image_w, image_h, border_margin_px)
        } else {
            threshold
        }
    });
    let row_to_col = solve_assignment(&cost);

    let mut matched = Vec::new();
    let mut unmatched_d = Vec::new();
    let mut vessel_taken = vec![false; ns];
    for (i, &j) in row_to_col.iter().enumerate().take(nd) {
        let theta = cost[(i, j)];
        if j < ns && theta < threshold {
            matched.push(Association {
                detection_index: i,
                mmsi: segs[j].0,
                theta,
            });
            vessel_taken[j] = true;
        } else {
            unmatched_d.push(i);
        }
    }
    let unmatched_v = segs
        .iter()
        .zip(&vessel_taken)
        .filter(|(_, &t)| !t)
        .map(|((m, _), _)| *m)
        .collect();
    AssociationOutcome {
        matched,
        no_match: Unmatched {
            detections: unmatched_d,
            vessels: unmatched_v,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::Rect;
    use crate::Vec2;
    use itertools::Itertools;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn brute_force(cost: &DMatrix<f64>) -> (f64, Vec<usize>) {
        let n = cost.nrows();
        (0..n)
            .permutations(n)
            .map(|perm| {
                let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
                (total, perm)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    }

    #[test]
    fn matches_brute_force_up_to_seven() {
        let mut rng = StdRng::seed_from_u64(99);
        for trial in 0..300 {
            let n = rng.random_range(1..=7);
            let cost = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
            let assignment = solve_assignment(&cost);
            let total: f64 = assignment
                .iter()
                .enumerate()
                .map(|(i, &j)| cost[(i, j)])
                .sum();
            let (best, _) = brute_force(&cost);
            assert!(
                (total - best).abs() < 1e-9,
                "trial {trial}: solver {total} vs brute force {best}"
            );
            // Must be a permutation.
            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
        }
    }

    fn d(cx: f64, w: f64, bottom: f64, score: f64) -> Detection2D {
        Detection2D {
            image_id: "i".into(),
            rect: Rect::new(cx - w / 2.0, bottom - 40.0, cx + w / 2.0, bottom),
            score,
        }
    }

    fn s(mmsi: u32, cx: f64, w: f64, bottom: f64) -> (u32, ProjectedSegment) {
        let rect = Rect::new(cx - w / 2.0, bottom - 30.0, cx + w / 2.0, bottom);
        (
            mmsi,
            ProjectedSegment {
                pixels: [
                    Vec2::new(rect.min_x, rect.min_y),
                    Vec2::new(rect.max_x, rect.min_y),
                    Vec2::new(rect.max_x, rect.max_y),
                    Vec2::new(rect.min_x, rect.max_y),
                ],
                rect,
            },
        )
    }

    #[test]
    fn simple_pair_matches_below_threshold() {
        let dets = [d(500.0, 120.0, 400.0, 0.9)];
        let segs = [s(7, 510.0, 118.0, 405.0)];
        let out = associate(&dets, &segs, 1920.0, 1080.0, 0.35, 2.0);
        assert_eq!(out.matched.len(), 1);
        assert_eq!(out.matched[0].mmsi, 7);
        assert_eq!(out.matched[0].detection_index, 0);
        assert!(out.no_match.detections.is_empty());
        assert!(out.no_match.vessels.is_empty());
    }

    #[test]
    fn threshold_boundary_is_exclusive() {
        let dets = [d(500.0, 120.0, 400.0, 1.0)];
        let segs = [s(7, 500.0, 120.0, 400.0)];
        // Perfect match: theta = 0 < any positive threshold.
        assert_eq!(
            associate(&dets, &segs, 1920.0, 1080.0, 1e-12, 2.0)
                .matched
                .len(),
            1
        );
        // theta exactly at the threshold must not match.
        assert!(associate(&dets, &segs, 1920.0, 1080.0, 0.0, 2.0)
            .matched
            .is_empty());
    }

    #[test]
    fn mismatched_sides_leave_remainders() {
        let dets = [d(300.0, 100.0, 500.0, 0.9), d(1300.0, 90.0, 600.0, 0.8)];
        let segs = [s(5, 1302.0, 92.0, 598.0)];
        let out = associate(&dets, &segs, 1920.0, 1080.0, 0.35, 2.0);
        assert_eq!(out.matched.len(), 1);
        assert_eq!(out.matched[0].mmsi, 5);
        assert_eq!(out.matched[0].detection_index, 1);
        assert_eq!(out.no_match.detections, vec![0]);

        let out = associate(
            &dets[..1],
            &[segs[0].clone(), s(9, 200.0, 50.0, 700.0)][..],
            1920.0,
            1080.0,
            0.35,
            2.0,
        );
        assert!(out.matched.is_empty() || out.matched.len() == 1);
        let total = out.matched.len() + out.no_match.vessels.len();
        assert_eq!(total, 2);
    }

    #[test]
    fn empty_sides_are_fine() {
        let out = associate(&[], &[], 100.0, 100.0, 0.35, 2.0);
        assert!(out.matched.is_empty());
        let dets = [d(300.0, 100.0, 500.0, 0.9)];
        let out = associate(&dets, &[], 1920.0, 1080.0, 0.35, 2.0);
        assert_eq!(out.no_match.detections, vec![0]);
        let segs = [s(5, 300.0, 100.0, 500.0)];
        let out = associate(&[], &segs, 1920.0, 1080.0, 0.35, 2.0);
        assert_eq!(out.no_match.vessels, vec![5]);
    }

    #[test]
    fn prefers_globally_optimal_pairing() {
        // Greedy on d0 would grab s2 (cost 6 px of center shift) and
        // strand d1 on s1 (50 px); the optimal total takes 34 + 10.
        let dets = [d(512.0, 100.0, 400.0, 1.0), d(520.0, 100.0, 400.0, 1.0)];
        let segs = [s(1, 495.0, 100.0, 400.0), s(2, 515.0, 100.0, 400.0)];
        let out = associate(&dets, &segs, 1920.0, 1080.0, 0.35, 2.0);
        assert_eq!(out.matched.len(), 2);
        let by_det: Vec<u32> = {
            let mut m = out.matched.clone();
            m.sort_by_key(|a| a.detection_index);
            m.iter().map(|a| a.mmsi).collect()
        };
        assert_eq!(by_det, vec![1, 2]);
    }
}
