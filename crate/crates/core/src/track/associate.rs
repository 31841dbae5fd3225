use crate::geometry::BBox;

/// Result of matching predicted track boxes against detections.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    /// `(track index, detection index, iou)` in the order they were taken.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy matching in descending IoU order. Pairs below `iou_threshold` are
/// never taken; equal IoUs resolve by track index, then detection index.
pub fn associate(tracks: &[BBox], detections: &[BBox], iou_threshold: f64) -> Association {
    let scores: Vec<Vec<f64>> = tracks.iter().map(|t| detections.iter().map(|d| t.iou(d)).collect()).collect();
    greedy_assign(&scores, detections.len(), iou_threshold)
}

/// Greedy one-to-one assignment over a `tracks x detections` score matrix.
pub fn greedy_assign(scores: &[Vec<f64>], detections: usize, threshold: f64) -> Association {
    let mut cands = Vec::new();
    for (i, row) in scores.iter().enumerate() {
        for (j, &s) in row.iter().enumerate().take(detections) {
            if s >= threshold && s > 0.0 {
                cands.push((i, j, s));
            }
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut t_used = vec![false; scores.len()];
    let mut d_used = vec![false; detections];
    let mut out = Association::default();
    for (i, j, s) in cands {
        if !t_used[i] && !d_used[j] {
            t_used[i] = true;
            d_used[j] = true;
            out.pairs.push((i, j, s));
        }
    }
    out.unmatched_tracks = (0..scores.len()).filter(|&i| !t_used[i]).collect();
    out.unmatched_detections = (0..detections).filter(|&j| !d_used[j]).collect();
    out
}
