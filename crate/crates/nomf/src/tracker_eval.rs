//! Region proposal on denoised frames, overlap tracking, and IoU-thresholded
//! precision/recall evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framer::EbbiFrame;
use crate::geom::BoundingBox;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("frame lists must be sorted by frame index without duplicates (index {0})")]
    MisalignedFrames(u32),
    #[error("empty ground truth")]
    EmptyGroundTruth,
}

/// A connected set of 1-pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub label: u32,
    pub bbox: BoundingBox,
    pub pixels: Vec<(u16, u16)>,
}

impl Region {
    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }
}

/// Label the maximal connected components of the frame's 1-pixels. Labels
/// are assigned in row-major order of each component's first pixel.
pub fn connected_components(frame: &EbbiFrame, connectivity: u8) -> Vec<Region> {
    assert!(connectivity == 4 || connectivity == 8, "connectivity must be 4 or 8");
    let w = frame.width() as i32;
    let h = frame.height() as i32;
    let mut visited = vec![false; frame.geometry().pixel_count()];
    let mut regions = Vec::new();
    let offsets: &[(i32, i32)] = if connectivity == 4 {
        &[(1, 0), (-1, 0), (0, 1), (0, -1)]
    } else {
        &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    };
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if visited[idx] || frame.get(x as u16, y as u16) == 0 {
                continue;
            }
            let mut stack = vec![(x, y)];
            visited[idx] = true;
            let mut pixels = Vec::new();
            let (mut x_min, mut y_min, mut x_max, mut y_max) = (x, y, x, y);
            while let Some((cx, cy)) = stack.pop() {
                pixels.push((cx as u16, cy as u16));
                x_min = x_min.min(cx);
                x_max = x_max.max(cx);
                y_min = y_min.min(cy);
                y_max = y_max.max(cy);
                for &(dx, dy) in offsets {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let nidx = (ny * w + nx) as usize;
                    if !visited[nidx] && frame.get(nx as u16, ny as u16) == 1 {
                        visited[nidx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            regions.push(Region {
                label: regions.len() as u32,
                bbox: BoundingBox::new(x_min as u16, y_min as u16, x_max as u16, y_max as u16),
                pixels,
            });
        }
    }
    regions
}

/// Intersection-over-union with inclusive pixel areas.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = match a.intersection(b) {
        Some(i) => i.area(),
        None => return 0.0,
    };
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Precision and recall per IoU threshold (parallel arrays).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Per-frame box lists, sorted by frame index.
pub type FrameBoxes = Vec<(u32, Vec<BoundingBox>)>;

fn check_sorted(frames: &FrameBoxes) -> Result<(), EvalError> {
    for pair in frames.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(EvalError::MisalignedFrames(pair[1].0));
        }
    }
    Ok(())
}

/// Pooled precision/recall over all frames.
///
/// Within a frame, proposals and ground truth are matched greedily one-to-one
/// by descending IoU over all overlapping pairs; a matched proposal is a true
/// positive at every threshold not exceeding its match IoU. Since greedy
/// decisions depend only on higher-IoU pairs, one matching serves every
/// threshold. Proposals with box area below `min_area` are discarded first.
/// With zero surviving proposals precision is 1 by convention.
pub fn evaluate(
    proposals: &FrameBoxes,
    ground_truth: &FrameBoxes,
    thresholds: &[f64],
    min_area: u64,
) -> Result<EvalCurve, EvalError> {
    check_sorted(proposals)?;
    check_sorted(ground_truth)?;
    let total_gt: usize = ground_truth.iter().map(|(_, b)| b.len()).sum();
    if total_gt == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }

    let mut total_proposals = 0usize;
    let mut matched_ious: Vec<f64> = Vec::new();
    let mut gt_iter = ground_truth.iter().peekable();
    for (frame, props) in proposals {
        let props: Vec<&BoundingBox> =
            props.iter().filter(|b| b.area() >= min_area).collect();
        total_proposals += props.len();
        while gt_iter.peek().is_some_and(|(f, _)| f < frame) {
            gt_iter.next();
        }
        let Some((gt_frame, gts)) = gt_iter.peek() else { continue };
        if gt_frame != frame {
            continue;
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (pi, p) in props.iter().enumerate() {
            for (gi, g) in gts.iter().enumerate() {
                let v = iou(p, g);
                if v > 0.0 {
                    pairs.push((v, pi, gi));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut p_used = vec![false; props.len()];
        let mut g_used = vec![false; gts.len()];
        for (v, pi, gi) in pairs {
            if !p_used[pi] && !g_used[gi] {
                p_used[pi] = true;
                g_used[gi] = true;
                matched_ious.push(v);
            }
        }
    }

    let mut precision = Vec::with_capacity(thresholds.len());
    let mut recall = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let tp = matched_ious.iter().filter(|&&v| v >= t).count();
        precision.push(if total_proposals == 0 { 1.0 } else { tp as f64 / total_proposals as f64 });
        recall.push(tp as f64 / total_gt as f64);
    }
    Ok(EvalCurve { thresholds: thresholds.to_vec(), precision, recall })
}

/// A tracked object: stable id plus (frame, box) observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Track {
    pub id: u32,
    pub entries: Vec<(u32, BoundingBox)>,
}

/// Greedy frame-to-frame overlap tracker: boxes of consecutive frames are
/// associated by maximum IoU > 0; unmatched boxes start new tracks.
pub fn track_overlap(frames: &FrameBoxes) -> Result<Vec<Track>, EvalError> {
    check_sorted(frames)?;
    let mut tracks: Vec<Track> = Vec::new();
    // track ids active in the previous frame
    let mut active: Vec<u32> = Vec::new();
    let mut prev_frame: Option<u32> = None;
    for (frame, boxes) in frames {
        let candidates: Vec<u32> = if prev_frame == Some(frame.wrapping_sub(1)) {
            active.clone()
        } else {
            Vec::new()
        };
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, &tid) in candidates.iter().enumerate() {
            let last = tracks[tid as usize].entries.last().unwrap().1;
            for (bi, b) in boxes.iter().enumerate() {
                let v = iou(&last, b);
                if v > 0.0 {
                    pairs.push((v, ti, bi));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut t_used = vec![false; candidates.len()];
        let mut b_assigned: Vec<Option<u32>> = vec![None; boxes.len()];
        for (_, ti, bi) in pairs {
            if !t_used[ti] && b_assigned[bi].is_none() {
                t_used[ti] = true;
                b_assigned[bi] = Some(candidates[ti]);
            }
        }
        let mut next_active = Vec::with_capacity(boxes.len());
        for (bi, b) in boxes.iter().enumerate() {
            let tid = match b_assigned[bi] {
                Some(tid) => tid,
                None => {
                    let tid = tracks.len() as u32;
                    tracks.push(Track { id: tid, entries: Vec::new() });
                    tid
                }
            };
            tracks[tid as usize].entries.push((*frame, *b));
            next_active.push(tid);
        }
        active = next_active;
        prev_frame = Some(*frame);
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::SensorGeometry;
    use proptest::prelude::*;

    fn frame(w: u16, h: u16, ones: &[(u16, u16)]) -> EbbiFrame {
        let mut f = EbbiFrame::zeros(SensorGeometry::new(w, h), 0, 1000);
        for &(x, y) in ones {
            f.set(x, y, 1);
        }
        f
    }

    #[test]
    fn all_zero_frame_has_no_components() {
        assert!(connected_components(&frame(8, 8, &[]), 8).is_empty());
    }

    #[test]
    fn diagonal_pixels_split_by_connectivity() {
        let f = frame(8, 8, &[(2, 2), (3, 3)]);
        assert_eq!(connected_components(&f, 8).len(), 1);
        assert_eq!(connected_components(&f, 4).len(), 2);
    }

    #[test]
    fn labels_follow_row_major_first_pixels() {
        let f = frame(8, 8, &[(6, 0), (0, 3)]);
        let regions = connected_components(&f, 8);
        assert_eq!(regions[0].pixels[0], (6, 0));
        assert_eq!(regions[1].pixels[0], (0, 3));
    }

    #[test]
    fn iou_hand_case() {
        let a = BoundingBox::new(0, 0, 9, 9);
        let b = BoundingBox::new(5, 0, 14, 9);
        // intersection 5x10 = 50, union 150
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BoundingBox::new(20, 20, 25, 25)), 0.0);
    }

    #[test]
    fn iou_matches_pixel_enumeration_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let mut gen_box = || {
                let x0 = rng.gen_range(0u16..20);
                let y0 = rng.gen_range(0u16..20);
                BoundingBox::new(x0, y0, x0 + rng.gen_range(0..10), y0 + rng.gen_range(0..10))
            };
            let (a, b) = (gen_box(), gen_box());
            let mut inter = 0u64;
            let mut union = 0u64;
            for x in 0u16..32 {
                for y in 0u16..32 {
                    let in_a = x >= a.x_min && x <= a.x_max && y >= a.y_min && y <= a.y_max;
                    let in_b = x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max;
                    inter += (in_a && in_b) as u64;
                    union += (in_a || in_b) as u64;
                }
            }
            assert!((iou(&a, &b) - inter as f64 / union as f64).abs() < 1e-12);
        }
    }

    fn bx(x0: u16, y0: u16, x1: u16, y1: u16) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1)
    }

    #[test]
    fn perfect_proposals_score_one_everywhere() {
        let gt: FrameBoxes = vec![(0, vec![bx(0, 0, 9, 9)]), (1, vec![bx(5, 5, 14, 14)])];
        let curve = evaluate(&gt, &gt, &[0.25, 0.5, 0.75, 1.0], 1).unwrap();
        assert!(curve.precision.iter().all(|&p| p == 1.0));
        assert!(curve.recall.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn zero_proposal_convention() {
        let gt: FrameBoxes = vec![(0, vec![bx(0, 0, 9, 9)])];
        let props: FrameBoxes = vec![(0, vec![])];
        let curve = evaluate(&props, &gt, &[0.5], 1).unwrap();
        assert_eq!(curve.precision, vec![1.0]);
        assert_eq!(curve.recall, vec![0.0]);
    }

    #[test]
    fn empty_ground_truth_is_rejected() {
        let props: FrameBoxes = vec![(0, vec![bx(0, 0, 1, 1)])];
        assert!(matches!(
            evaluate(&props, &vec![(0, vec![])], &[0.5], 1),
            Err(EvalError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn min_area_discards_small_proposals() {
        let gt: FrameBoxes = vec![(0, vec![bx(0, 0, 9, 9)])];
        let props: FrameBoxes = vec![(0, vec![bx(0, 0, 9, 9), bx(20, 20, 20, 20)])];
        let strict = evaluate(&props, &gt, &[0.5], 5).unwrap();
        assert_eq!(strict.precision, vec![1.0]); // 1x1 noise box dropped
        let loose = evaluate(&props, &gt, &[0.5], 1).unwrap();
        assert_eq!(loose.precision, vec![0.5]);
    }

    #[test]
    fn duplicate_frame_index_is_misaligned() {
        let frames: FrameBoxes = vec![(0, vec![]), (0, vec![])];
        assert!(matches!(
            evaluate(&frames, &vec![(0, vec![bx(0, 0, 1, 1)])], &[0.5], 1),
            Err(EvalError::MisalignedFrames(0))
        ));
    }

    #[test]
    fn moving_box_forms_a_single_track() {
        let frames: FrameBoxes = (0..10u32)
            .map(|f| (f, vec![bx(f as u16, 0, f as u16 + 9, 9)]))
            .collect();
        let tracks = track_overlap(&frames).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].entries.len(), 10);
    }

    #[test]
    fn disjoint_boxes_form_two_tracks() {
        let frames: FrameBoxes = (0..5u32)
            .map(|f| (f, vec![bx(0, 0, 4, 4), bx(50, 50, 54, 54)]))
            .collect();
        let tracks = track_overlap(&frames).unwrap();
        assert_eq!(tracks.len(), 2);
        assert!(tracks.iter().all(|t| t.entries.len() == 5));
    }

    proptest! {
        #[test]
        fn components_partition_the_one_pixels(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let geo = SensorGeometry::new(24, 24);
            let bits: Vec<u8> = (0..geo.pixel_count()).map(|_| rng.gen_bool(0.35) as u8).collect();
            let f = EbbiFrame::from_bits(geo, bits, 0, 1000);
            for connectivity in [4u8, 8] {
                let regions = connected_components(&f, connectivity);
                let mut seen = std::collections::HashSet::new();
                let mut total = 0usize;
                for r in &regions {
                    for &(x, y) in &r.pixels {
                        prop_assert_eq!(f.get(x, y), 1);
                        prop_assert!(seen.insert((x, y)), "pixel in two regions");
                        total += 1;
                    }
                }
                prop_assert_eq!(total, f.count_ones());
            }
        }

        #[test]
        fn precision_recall_monotone_in_threshold(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut gen_boxes = |count: usize| -> Vec<BoundingBox> {
                (0..count).map(|_| {
                    let x0 = rng.gen_range(0u16..40);
                    let y0 = rng.gen_range(0u16..40);
                    bx(x0, y0, x0 + rng.gen_range(0..15), y0 + rng.gen_range(0..15))
                }).collect()
            };
            let gt: FrameBoxes = (0..5u32).map(|f| (f, gen_boxes(3))).collect();
            let props: FrameBoxes = (0..5u32).map(|f| (f, gen_boxes(4))).collect();
            let thresholds: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
            let strict = evaluate(&props, &gt, &thresholds, 4).unwrap();
            for w in strict.precision.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            for w in strict.recall.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            // raising min_area never increases recall
            let loose = evaluate(&props, &gt, &thresholds, 1).unwrap();
            for (a, b) in strict.recall.iter().zip(&loose.recall) {
                prop_assert!(a <= b);
            }
        }
    }
}
