//! Per-person network inputs: cropped RGB clips, background-subtracted
//! clips and motion history images.
mod mhi;

pub use mhi::{compute_mhi, MhiImage, DEFAULT_MHI_THRESHOLD, DEFAULT_TAU};

use serde::{Deserialize, Serialize};

pub use crate::video::subsample_time;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::Mask;
use crate::tensor::Tensor;
use crate::track::TrackState;
use crate::video::{resize_bilinear, Clip};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    /// Output side in pixels.
    pub size: usize,
    /// Extra context around the box, as a fraction of its longer side.
    pub margin: f64,
    /// Crop one region covering the whole window instead of following the
    /// box frame by frame, so that displacement stays visible.
    pub union: bool,
    /// Shortest track span worth extracting.
    pub min_frames: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig { size: 64, margin: 0.15, union: true, min_frames: 8 }
    }
}

/// Square crop window in frame pixels; may extend past the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub x: isize,
    pub y: isize,
    pub side: usize,
}

impl Region {
    /// Square of side `max(w, h) * (1 + margin)` centered on the box.
    pub fn around(b: &BBox, margin: f64) -> Region {
        let side = (b.w.max(b.h) * (1.0 + margin)).round().max(1.0) as usize;
        let (cx, cy) = b.center();
        Region {
            x: (cx - side as f64 / 2.0).round() as isize,
            y: (cy - side as f64 / 2.0).round() as isize,
            side,
        }
    }

    fn source(&self, i: usize, j: usize, h: usize, w: usize) -> Option<usize> {
        let (y, x) = (self.y + i as isize, self.x + j as isize);
        (y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w).then(|| y as usize * w + x as usize)
    }
}

/// `C x side x side` copy of a planar frame, zero where the region leaves it.
pub fn crop_planar(frame: &[f32], c: usize, h: usize, w: usize, r: Region) -> Vec<f32> {
    let mut out = vec![0.0; c * r.side * r.side];
    for ch in 0..c {
        let plane = &frame[ch * h * w..(ch + 1) * h * w];
        for i in 0..r.side {
            for j in 0..r.side {
                if let Some(s) = r.source(i, j, h, w) {
                    out[(ch * r.side + i) * r.side + j] = plane[s];
                }
            }
        }
    }
    out
}

/// Binary crop resampled to `size x size` by corner-aligned nearest
/// neighbour, so it stays binary.
fn crop_mask(mask: &Mask, r: Region, size: usize) -> Vec<f32> {
    let pick = |i: usize| if size == 1 { 0 } else { (i * (r.side - 1) * 2 + (size - 1)) / (2 * (size - 1)) };
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let on = r.source(pick(i), pick(j), mask.height, mask.width).is_some_and(|s| mask.data[s]);
            out.push(if on { 1.0 } else { 0.0 });
        }
    }
    out
}

/// Boxes for every frame from `first` to `last`, linearly interpolated over
/// frames the track skipped.
pub fn boxes_for_span(states: &[TrackState], first: usize, last: usize) -> Vec<BBox> {
    let mut out = Vec::with_capacity(last + 1 - first);
    let mut k = 0;
    for f in first..=last {
        while k + 1 < states.len() && states[k + 1].frame <= f {
            k += 1;
        }
        let a = &states[k];
        let b = states.get(k + 1);
        out.push(match b {
            Some(b) if f > a.frame => {
                let t = (f - a.frame) as f64 / (b.frame - a.frame) as f64;
                BBox::new(
                    a.bbox.x + t * (b.bbox.x - a.bbox.x),
                    a.bbox.y + t * (b.bbox.y - a.bbox.y),
                    a.bbox.w + t * (b.bbox.w - a.bbox.w),
                    a.bbox.h + t * (b.bbox.h - a.bbox.h),
                )
            }
            _ => a.bbox,
        });
    }
    out
}

/// One person's aligned RGB and background-subtracted clips.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonSequence {
    pub track: usize,
    pub rgb: Clip,
    pub bs: Clip,
    /// First and last frame, inclusive.
    pub span: (usize, usize),
}

impl PersonSequence {
    pub fn mhi(&self, tau: usize, threshold: f32) -> Result<MhiImage> {
        compute_mhi(&self.bs, tau, threshold)
    }
}

/// Crops the states' frames out of `video` and `masks` (one mask per video
/// frame). States must be sorted by frame.
pub fn extract_person_sequence(
    video: &Clip,
    track: usize,
    states: &[TrackState],
    masks: &[Mask],
    config: &CropConfig,
) -> Result<PersonSequence> {
    let (Some(first), Some(last)) = (states.first(), states.last()) else {
        return Err(Error::InsufficientFrames { needed: config.min_frames.max(1), got: 0 });
    };
    let (first, last) = (first.frame, last.frame);
    let len = last + 1 - first;
    if len < config.min_frames.max(1) {
        return Err(Error::InsufficientFrames { needed: config.min_frames.max(1), got: len });
    }
    if last >= video.len() || last >= masks.len() {
        return Err(Error::Index(format!(
            "track {track} reaches frame {last} of a {}-frame video with {} masks",
            video.len(),
            masks.len()
        )));
    }
    if config.size == 0 {
        return Err(Error::Config("crop size must be positive".into()));
    }
    let boxes = boxes_for_span(states, first, last);
    let whole = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.union(b));
    let (c, h, w, s) = (video.channels(), video.height(), video.width(), config.size);
    let mut rgb = Vec::with_capacity(len * c * s * s);
    let mut bs = Vec::with_capacity(len * c * s * s);
    for (i, b) in boxes.iter().enumerate() {
        let r = Region::around(if config.union { &whole } else { b }, config.margin);
        let raw = Tensor::new(&[c, r.side, r.side], crop_planar(video.frame(first + i), c, h, w, r))?;
        let frame = resize_bilinear(&raw, s, s)?.into_data();
        let mask = crop_mask(&masks[first + i], r, s);
        for ch in 0..c {
            for (k, m) in mask.iter().enumerate() {
                bs.push(frame[ch * s * s + k] * m);
            }
        }
        rgb.extend(frame);
    }
    let source = format!("{}#track{track}", video.source);
    Ok(PersonSequence {
        track,
        rgb: Clip::new(Tensor::new(&[len, c, s, s], rgb)?, video.fps, source.clone(), video.start + first)?,
        bs: Clip::new(Tensor::new(&[len, c, s, s], bs)?, video.fps, source, video.start + first)?,
        span: (first, last),
    })
}

/// Frame windows `[start, end)` of `frames` frames every `stride` frames
/// within a track's span. A span shorter than one window but at least
/// `min_frames` long gives a single window over the whole span.
pub fn track_windows(states: &[TrackState], frames: usize, stride: usize, min_frames: usize) -> Vec<(usize, usize)> {
    let (Some(a), Some(b)) = (states.first(), states.last()) else { return Vec::new() };
    let (first, end) = (a.frame, b.frame + 1);
    let len = end - first;
    if len < frames {
        return if len >= min_frames.max(1) { vec![(first, end)] } else { Vec::new() };
    }
    let stride = stride.max(1);
    let mut out: Vec<(usize, usize)> = (first..=end - frames).step_by(stride).map(|s| (s, s + frames)).collect();
    // Cover the tail when the stride skips past it.
    if out.last().is_some_and(|w| w.1 < end) {
        out.push((end - frames, end));
    }
    out
}

/// States restricted to frames `[start, end)`.
pub fn states_in(states: &[TrackState], start: usize, end: usize) -> Vec<TrackState> {
    states.iter().filter(|s| s.frame >= start && s.frame < end).copied().collect()
}
