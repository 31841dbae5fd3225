use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A run of frames stored as a `T x C x H x W` tensor of values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    frames: Tensor<f32>,
    pub fps: f64,
    pub source: String,
    /// Index of the first frame within the source video.
    pub start: usize,
}

impl Clip {
    pub fn new(frames: Tensor<f32>, fps: f64, source: impl Into<String>, start: usize) -> Result<Self> {
        if frames.rank() != 4 {
            return Err(Error::Dimension(format!("clips are T x C x H x W, got {:?}", frames.shape())));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        if let Some(v) = frames.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Numeric(format!("clip value {v} outside [0, 1]")));
        }
        Ok(Clip { frames, fps, source: source.into(), start })
    }

    pub fn frames(&self) -> &Tensor<f32> {
        &self.frames
    }

    pub fn into_frames(self) -> Tensor<f32> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.frames.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.frames.shape()[3]
    }

    pub fn frame_len(&self) -> usize {
        self.channels() * self.height() * self.width()
    }

    /// Planar `C x H x W` values of frame `t`.
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.frames.data()[t * n..(t + 1) * n]
    }

    /// Frames `[start, end)` as a new clip.
    pub fn slice(&self, start: usize, end: usize) -> Result<Clip> {
        if start >= end || end > self.len() {
            return Err(Error::Index(format!("frame range {start}..{end} of a {}-frame clip", self.len())));
        }
        let n = self.frame_len();
        let mut shape = self.frames.shape().to_vec();
        shape[0] = end - start;
        let frames = Tensor::new(&shape, self.frames.data()[start * n..end * n].to_vec())?;
        Ok(Clip { frames, fps: self.fps, source: self.source.clone(), start: self.start + start })
    }

    /// Picks frames by index (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Result<Clip> {
        if indices.is_empty() {
            return Err(Error::Empty("no frames selected".into()));
        }
        let n = self.frame_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Index(format!("frame {i} of a {}-frame clip", self.len())));
            }
            data.extend_from_slice(self.frame(i));
        }
        let mut shape = self.frames.shape().to_vec();
        shape[0] = indices.len();
        Ok(Clip { frames: Tensor::new(&shape, data)?, fps: self.fps, source: self.source.clone(), start: self.start })
    }

    pub fn resized(&self, out_h: usize, out_w: usize) -> Result<Clip> {
        Ok(Clip { frames: resize_bilinear(&self.frames, out_h, out_w)?, ..self.clone() })
    }
}

/// Source coordinate for output index `i` under corner-aligned sampling.
fn source_coord(i: usize, out: usize, inp: usize) -> f64 {
    if out == 1 {
        (inp - 1) as f64 / 2.0
    } else {
        i as f64 * (inp - 1) as f64 / (out - 1) as f64
    }
}

fn taps(out: usize, inp: usize) -> Vec<(usize, usize, f32)> {
    (0..out)
        .map(|i| {
            let s = source_coord(i, out, inp);
            let lo = (s.floor() as usize).min(inp - 1);
            let hi = (lo + 1).min(inp - 1);
            (lo, hi, (s - lo as f64) as f32)
        })
        .collect()
}

/// Interpolates and clamps to the endpoints so rounding never leaves `[a, b]`.
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    (a + t * (b - a)).clamp(a.min(b), a.max(b))
}

/// Bilinear resize of the last two axes of a tensor of rank 2 or more, with
/// corner-aligned sampling: output corners land exactly on input corners. A
/// single output row or column samples the input center.
pub fn resize_bilinear(input: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Config(format!("resize target {out_h}x{out_w} has a zero extent")));
    }
    let r = input.rank();
    if r < 2 {
        return Err(Error::Dimension(format!("resize needs at least 2 axes, got {:?}", input.shape())));
    }
    let (h, w) = (input.shape()[r - 2], input.shape()[r - 1]);
    if (h, w) == (out_h, out_w) {
        return Ok(input.clone());
    }
    let planes = input.len() / (h * w);
    let ty = taps(out_h, h);
    let tx = taps(out_w, w);
    let mut out = Vec::with_capacity(planes * out_h * out_w);
    for plane in input.data().chunks(h * w) {
        for &(y0, y1, fy) in &ty {
            for &(x0, x1, fx) in &tx {
                let top = lerp(plane[y0 * w + x0], plane[y0 * w + x1], fx);
                let bot = lerp(plane[y1 * w + x0], plane[y1 * w + x1], fx);
                out.push(lerp(top, bot, fy));
            }
        }
    }
    let mut shape = input.shape().to_vec();
    shape[r - 2] = out_h;
    shape[r - 1] = out_w;
    debug_assert_eq!(out.len(), planes * out_h * out_w);
    Tensor::new(&shape, out)
}

/// Cuts `video` into windows of `round(fps * clip_seconds)` frames starting
/// every `round(fps * stride_seconds)` frames. A trailing partial window is
/// dropped, so a video shorter than one window yields no clips.
pub fn segment_into_clips(video: &Clip, clip_seconds: f64, stride_seconds: f64) -> Result<Vec<Clip>> {
    let n = (video.fps * clip_seconds).round();
    let stride = (video.fps * stride_seconds).round();
    if !(n >= 1.0 && stride >= 1.0) {
        return Err(Error::Config(format!(
            "clip length {clip_seconds}s and stride {stride_seconds}s must each span at least one frame at {} fps",
            video.fps
        )));
    }
    let (n, stride) = (n as usize, stride as usize);
    let mut clips = Vec::new();
    let mut start = 0;
    while start + n <= video.len() {
        clips.push(video.slice(start, start + n)?);
        start += stride;
    }
    Ok(clips)
}

/// Frame indices for [`subsample_time`].
pub fn subsample_indices(len: usize, target: usize) -> Vec<usize> {
    if len <= target {
        return (0..target).map(|i| i.min(len - 1)).collect();
    }
    if target == 1 {
        return vec![0];
    }
    // round(i * (len - 1) / (target - 1)), halves rounding up, in integers.
    let (num, den) = (len - 1, target - 1);
    (0..target).map(|i| (2 * i * num + den) / (2 * den)).collect()
}

/// Resamples a clip to exactly `target` frames. Longer clips take evenly
/// spaced frames (first and last kept); shorter ones are padded by repeating
/// their last frame.
pub fn subsample_time(clip: &Clip, target: usize) -> Result<Clip> {
    if target == 0 {
        return Err(Error::Config("target frame count must be positive".into()));
    }
    clip.select(&subsample_indices(clip.len(), target))
}
