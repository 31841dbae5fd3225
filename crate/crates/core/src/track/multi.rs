use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::associate::associate;
use super::kcf::{KcfConfig, KcfState};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::{Detection, Gray};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub kcf: KcfConfig,
    pub iou_threshold: f64,
    /// Consecutive missed frames tolerated before a track closes.
    pub max_miss: usize,
    /// Smallest detection area (pixels) that may start a track.
    pub min_area: usize,
    /// Below this response peak the filter's own estimate is not trusted.
    pub peak_threshold: f64,
    /// A detection covering more than this share of a live track's box does
    /// not start a new one.
    pub birth_overlap: f64,
    /// Relative size change beyond which a matched track's filter restarts.
    pub resize_tolerance: f64,
    /// Past states used for constant-velocity extrapolation.
    pub velocity_window: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            kcf: KcfConfig::default(),
            iou_threshold: 0.3,
            max_miss: 10,
            min_area: 64,
            peak_threshold: 0.25,
            birth_overlap: 0.5,
            resize_tolerance: 0.2,
            velocity_window: 5,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.kcf.validate()?;
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!("iou threshold must be in (0, 1], got {}", self.iou_threshold)));
        }
        if self.velocity_window < 2 {
            return Err(Error::Config("velocity window needs at least 2 states".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Active,
    /// Missed at least the latest frame but still inside the miss budget.
    Lost,
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub frame: usize,
    pub bbox: BBox,
}

#[derive(Clone, Debug)]
pub struct Track {
    pub id: usize,
    pub states: Vec<TrackState>,
    pub misses: usize,
    pub status: TrackStatus,
    kcf: Option<KcfState>,
}

impl Track {
    pub fn last(&self) -> Option<&TrackState> {
        self.states.last()
    }

    /// First and last frame index.
    pub fn span(&self) -> Option<(usize, usize)> {
        Some((self.states.first()?.frame, self.states.last()?.frame))
    }

    fn push(&mut self, frame: usize, bbox: BBox) {
        match self.states.last_mut() {
            Some(s) if s.frame == frame => s.bbox = bbox,
            _ => self.states.push(TrackState { frame, bbox }),
        }
    }

    /// Constant-velocity guess for `frame` from the trailing states.
    fn extrapolate(&self, frame: usize, window: usize) -> Option<BBox> {
        let n = self.states.len();
        let last = self.states.last()?;
        if n < 2 {
            return Some(last.bbox);
        }
        let first = &self.states[n.saturating_sub(window)];
        let span = (last.frame - first.frame) as f64;
        if span == 0.0 {
            return Some(last.bbox);
        }
        let (c0, c1) = (first.bbox.center(), last.bbox.center());
        let ahead = (frame - last.frame) as f64;
        Some(last.bbox.translate((c1.0 - c0.0) / span * ahead, (c1.1 - c0.1) / span * ahead))
    }
}

struct Prediction {
    track: usize,
    bbox: BBox,
    confident: bool,
}

/// Frame-by-frame detection-to-track association with one correlation
/// filter per live track.
#[derive(Debug)]
pub struct MultiTracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: usize,
    frame: usize,
}

impl MultiTracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(MultiTracker { config, tracks: Vec::new(), next_id: 0, frame: 0 })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tracks.len()).filter(|&i| self.tracks[i].status != TrackStatus::Closed)
    }

    fn predict(&self, gray: &Gray) -> Vec<Prediction> {
        let mut out = Vec::new();
        for i in self.live() {
            let t = &self.tracks[i];
            let Some(kcf) = &t.kcf else { continue };
            let (dx, dy, peak) = kcf.detect(gray);
            let moved = kcf.bbox.translate(dx, dy);
            let guess = t.extrapolate(self.frame, self.config.velocity_window);
            // A jump far from the motion so far means the filter latched onto
            // something else, typically while its target is hidden.
            let plausible = guess.map_or(true, |g| {
                let (a, b) = (g.center(), moved.center());
                (a.0 - b.0).abs() <= g.w / 2.0 && (a.1 - b.1).abs() <= g.h / 2.0
            });
            let confident =
                peak >= self.config.peak_threshold && plausible && !moved.outside(gray.width, gray.height);
            let bbox = match (confident, guess) {
                (true, _) => moved,
                (false, Some(b)) => b,
                (false, None) => continue,
            };
            out.push(Prediction { track: i, bbox, confident });
        }
        out
    }

    fn close(&mut self, i: usize) {
        let t = &mut self.tracks[i];
        t.status = TrackStatus::Closed;
        t.kcf = None;
    }

    /// Consumes the next frame and its detections.
    pub fn step(&mut self, gray: &Gray, detections: &[Detection]) -> Result<()> {
        let frame = self.frame;
        let preds = self.predict(gray);
        let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox()).collect();

        // A blob covering most of two or more predicted boxes is a merge of
        // several people. Their filters see each other, so those tracks coast
        // at constant velocity with frozen models.
        let covers = |d: &BBox, p: &BBox| p.area() > 0.0 && d.intersection(p) / p.area() >= 0.5;
        let mut contested = vec![false; detections.len()];
        let mut held = vec![false; preds.len()];
        for (j, d) in det_boxes.iter().enumerate() {
            let hits: Vec<usize> = (0..preds.len()).filter(|&k| covers(d, &preds[k].bbox)).collect();
            if hits.len() >= 2 {
                contested[j] = true;
                for k in hits {
                    held[k] = true;
                }
            }
        }

        let free_preds: Vec<usize> = (0..preds.len()).filter(|&k| !held[k]).collect();
        let free_dets: Vec<usize> = (0..detections.len()).filter(|&j| !contested[j]).collect();
        let a = associate(
            &free_preds.iter().map(|&k| preds[k].bbox).collect::<Vec<_>>(),
            &free_dets.iter().map(|&j| det_boxes[j]).collect::<Vec<_>>(),
            self.config.iou_threshold,
        );
        let mut matches: Vec<(usize, usize)> = a.pairs.iter().map(|&(pk, dj, _)| (free_preds[pk], free_dets[dj])).collect();
        // Second chance against the last recorded box, for targets that
        // turned sharply and left their predicted box behind.
        let left_preds: Vec<usize> = a.unmatched_tracks.iter().map(|&pk| free_preds[pk]).collect();
        let left_dets: Vec<usize> = a.unmatched_detections.iter().map(|&dj| free_dets[dj]).collect();
        let last_boxes: Vec<BBox> =
            left_preds.iter().map(|&k| self.tracks[preds[k].track].last().map_or(preds[k].bbox, |s| s.bbox)).collect();
        let b = associate(&last_boxes, &left_dets.iter().map(|&j| det_boxes[j]).collect::<Vec<_>>(), self.config.iou_threshold);
        matches.extend(b.pairs.iter().map(|&(pk, dj, _)| (left_preds[pk], left_dets[dj])));
        let unmatched_preds: Vec<usize> = b.unmatched_tracks.iter().map(|&pk| left_preds[pk]).collect();
        let unmatched_dets: Vec<usize> = b.unmatched_detections.iter().map(|&dj| left_dets[dj]).collect();

        for &(k, j) in &matches {
            let p = &preds[k];
            let det = det_boxes[j];
            let tol = self.config.resize_tolerance;
            let t = &mut self.tracks[p.track];
            let kcf = t.kcf.as_mut().expect("live track has a filter");
            let resized = (det.w / kcf.bbox.w - 1.0).abs() > tol || (det.h / kcf.bbox.h - 1.0).abs() > tol;
            if resized {
                match KcfState::init(gray, det, &self.config.kcf) {
                    Ok(k) => *kcf = k,
                    Err(_) => kcf.bbox = det,
                }
            } else {
                kcf.retrain(gray, det, self.config.kcf.interp);
            }
            t.misses = 0;
            t.status = TrackStatus::Active;
            t.push(frame, det);
        }
        for (k, p) in preds.iter().enumerate() {
            if !held[k] {
                continue;
            }
            let t = &mut self.tracks[p.track];
            let b = t.extrapolate(frame, self.config.velocity_window).unwrap_or(p.bbox);
            if let Some(kcf) = t.kcf.as_mut() {
                kcf.bbox = b;
            }
            t.misses = 0;
            t.status = TrackStatus::Active;
            t.push(frame, b);
        }
        let mut to_close = Vec::new();
        for &k in &unmatched_preds {
            let p = &preds[k];
            let t = &mut self.tracks[p.track];
            t.misses += 1;
            t.status = TrackStatus::Lost;
            if p.confident {
                if let Some(kcf) = t.kcf.as_mut() {
                    kcf.bbox = p.bbox;
                }
                t.push(frame, p.bbox);
            }
            if t.misses > self.config.max_miss {
                to_close.push(p.track);
            }
        }
        // Live tracks without a prediction have drifted out of the frame.
        let predicted: Vec<usize> = preds.iter().map(|p| p.track).collect();
        to_close.extend(self.live().filter(|i| !predicted.contains(i)).collect::<Vec<_>>());
        for i in to_close {
            self.close(i);
        }

        for &j in &unmatched_dets {
            if detections[j].area < self.config.min_area {
                continue;
            }
            let d = det_boxes[j];
            let overlaps = self.live().any(|i| {
                self.tracks[i].last().is_some_and(|s| {
                    let m = s.bbox.area().min(d.area());
                    m > 0.0 && s.bbox.intersection(&d) / m > self.config.birth_overlap
                })
            });
            if overlaps {
                continue;
            }
            let Ok(kcf) = KcfState::init(gray, d, &self.config.kcf) else { continue };
            log::debug!("frame {frame}: track {} starts at {:?}", self.next_id, d);
            self.tracks.push(Track {
                id: self.next_id,
                states: vec![TrackState { frame, bbox: d }],
                misses: 0,
                status: TrackStatus::Active,
                kcf: Some(kcf),
            });
            self.next_id += 1;
        }
        self.frame += 1;
        Ok(())
    }

    /// Tracks every frame; `detections[t]` belongs to `frames[t]`.
    pub fn run(config: TrackerConfig, frames: &[Gray], detections: &[Vec<Detection>]) -> Result<Vec<Track>> {
        if frames.len() != detections.len() {
            return Err(Error::Dimension(format!(
                "{} frames but {} detection lists",
                frames.len(),
                detections.len()
            )));
        }
        let mut mt = MultiTracker::new(config)?;
        for (g, d) in frames.iter().zip(detections) {
            mt.step(g, d)?;
        }
        Ok(mt.into_tracks())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub track: usize,
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// One JSON object per line for every (track, frame) state.
pub fn write_track_dump<W: Write>(tracks: &[Track], mut out: W) -> Result<()> {
    for t in tracks {
        for s in &t.states {
            let r = DumpRecord { track: t.id, frame: s.frame, x: s.bbox.x, y: s.bbox.y, w: s.bbox.w, h: s.bbox.h };
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n").map_err(|e| Error::io("writing track dump", e))?;
        }
    }
    Ok(())
}

pub fn read_track_dump<R: BufRead>(input: R) -> Result<Vec<DumpRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("reading track dump", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
