use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::Clip;

/// Label and softmax confidence for one clip window `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub label: usize,
    pub confidence: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub action: String,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub confidence: f64,
}

/// Sliding majority vote over a centered window (truncated at the ends).
/// Ties keep the previous output label when it is among the leaders, then
/// the input label, then the smallest.
pub fn smooth_predictions(labels: &[usize], window: usize) -> Result<Vec<usize>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Config(format!("smoothing window must be odd and positive, got {window}")));
    }
    let half = window / 2;
    let mut out: Vec<usize> = Vec::with_capacity(labels.len());
    for i in 0..labels.len() {
        let win = &labels[i.saturating_sub(half)..(i + half + 1).min(labels.len())];
        let count = |l: usize| win.iter().filter(|&&v| v == l).count();
        let best = win.iter().map(|&l| count(l)).max().unwrap_or(0);
        let leads = |l: usize| count(l) == best;
        let pick = match out.last() {
            Some(&p) if leads(p) => p,
            _ if leads(labels[i]) => labels[i],
            _ => *win.iter().filter(|&&l| leads(l)).min().expect("window is non-empty"),
        };
        out.push(pick);
    }
    Ok(out)
}

/// Frames each clip answers for: overlapping neighbours split their
/// overlap at its midpoint. Clips must be sorted by start.
fn owned_spans(clips: &[ClipPrediction]) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = clips.iter().map(|c| (c.start, c.end)).collect();
    for i in 1..spans.len() {
        let (prev_end, start) = (clips[i - 1].end, clips[i].start);
        if start < prev_end {
            let mid = (start + prev_end).div_ceil(2).max(spans[i - 1].0 + 1);
            spans[i - 1].1 = mid;
            spans[i].0 = mid;
        }
    }
    spans
}

/// Merges runs of equal smoothed labels into events. Events cover exactly
/// the frames covered by the clips, splitting only where clips leave a gap.
pub fn build_person_timeline(clips: &[ClipPrediction], smoothed: &[usize], labels: &[String]) -> Result<Vec<TimelineEvent>> {
    if clips.len() != smoothed.len() {
        return Err(Error::Dimension(format!("{} clips but {} labels", clips.len(), smoothed.len())));
    }
    if clips.windows(2).any(|w| w[1].start < w[0].start) || clips.iter().any(|c| c.start >= c.end) {
        return Err(Error::Config("clip windows must be non-empty and sorted by start".into()));
    }
    let name = |l: usize| {
        labels.get(l).cloned().ok_or_else(|| Error::Index(format!("label {l} outside a table of {}", labels.len())))
    };
    let spans = owned_spans(clips);
    let mut events: Vec<TimelineEvent> = Vec::new();
    let mut confs: Vec<f64> = Vec::new();
    let mut current: Option<usize> = None;
    for (i, &(s, e)) in spans.iter().enumerate() {
        let label = smoothed[i];
        let extends = current == Some(label) && events.last().is_some_and(|ev| ev.end == s);
        if extends {
            let ev = events.last_mut().expect("checked above");
            ev.end = e;
            confs.push(clips[i].confidence);
        } else {
            if let Some(ev) = events.last_mut() {
                ev.confidence = mean(&confs);
            }
            events.push(TimelineEvent { action: name(label)?, start: s, end: e, confidence: 0.0 });
            confs = vec![clips[i].confidence];
            current = Some(label);
        }
    }
    if let Some(ev) = events.last_mut() {
        ev.confidence = mean(&confs);
    }
    Ok(events)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One event per shot `[b_i, b_{i+1})`, labelled by a majority vote of the
/// clips whose midpoint falls in it. Vote ties go to the higher mean
/// confidence, then the smaller label. Shots without clips are skipped.
pub fn build_shot_timeline(
    frames: usize,
    boundaries: &[usize],
    clips: &[ClipPrediction],
    labels: &[String],
) -> Result<Vec<TimelineEvent>> {
    if boundaries.windows(2).any(|w| w[1] <= w[0]) || boundaries.iter().any(|&b| b == 0 || b >= frames) {
        return Err(Error::Config(format!("shot boundaries {boundaries:?} must increase strictly inside 1..{frames}")));
    }
    let mut edges = vec![0];
    edges.extend_from_slice(boundaries);
    edges.push(frames);
    let mut events = Vec::new();
    for w in edges.windows(2) {
        let (s, e) = (w[0], w[1]);
        let members: Vec<&ClipPrediction> = clips.iter().filter(|c| (s..e).contains(&((c.start + c.end) / 2))).collect();
        if members.is_empty() {
            log::warn!("shot {s}..{e} has no complete clip; left out of the timeline");
            continue;
        }
        let mut tally: Vec<(usize, usize, f64)> = Vec::new();
        for c in &members {
            match tally.iter_mut().find(|t| t.0 == c.label) {
                Some(t) => {
                    t.1 += 1;
                    t.2 += c.confidence;
                }
                None => tally.push((c.label, 1, c.confidence)),
            }
        }
        let (label, n, sum) = *tally
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then((a.2 / a.1 as f64).total_cmp(&(b.2 / b.1 as f64))).then(b.0.cmp(&a.0)))
            .expect("members is non-empty");
        let action = labels.get(label).cloned().ok_or_else(|| Error::Index(format!("label {label} outside the table")))?;
        events.push(TimelineEvent { action, start: s, end: e, confidence: sum / n as f64 });
    }
    Ok(events)
}

/// Mean absolute difference from the previous frame over all values; 0 for
/// the first frame.
pub fn frame_energy(video: &Clip) -> Vec<f64> {
    let mut out = vec![0.0; video.len()];
    for t in 1..video.len() {
        let (a, b) = (video.frame(t), video.frame(t - 1));
        out[t] = a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.len() as f64;
    }
    out
}

pub const DEFAULT_SHOT_THRESHOLD: f64 = 0.15;

/// Frames whose difference energy exceeds `threshold` start a new shot.
pub fn detect_shots(video: &Clip, threshold: f64) -> Vec<usize> {
    frame_energy(video).iter().enumerate().filter(|(_, &e)| e > threshold).map(|(t, _)| t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn owned_spans_split_overlaps() {
        let c = |s, e| ClipPrediction { label: 0, confidence: 1.0, start: s, end: e };
        assert_eq!(owned_spans(&[c(0, 16), c(8, 24), c(16, 32)]), vec![(0, 12), (12, 20), (20, 32)]);
        assert_eq!(owned_spans(&[c(0, 8), c(10, 18)]), vec![(0, 8), (10, 18)]);
    }

    #[test]
    fn even_window_is_rejected() {
        assert!(smooth_predictions(&[0, 1], 2).is_err());
    }
}
