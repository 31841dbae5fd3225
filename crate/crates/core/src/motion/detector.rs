use serde::{Deserialize, Serialize};

use super::{close, connected_components, dilate, open, to_gray, BackgroundModel, Detection, Gray, Mask};
use crate::error::{Error, Result};
use crate::video::Clip;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub alpha: f32,
    pub threshold: f32,
    pub open_radius: usize,
    pub close_radius: usize,
    pub min_area: usize,
    /// Leading frames whose per-pixel median seeds the background.
    pub warmup: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { alpha: 0.05, threshold: 0.1, open_radius: 1, close_radius: 2, min_area: 64, warmup: 25 }
    }
}

/// Per-frame foreground masks and detections for one video.
#[derive(Clone, Debug)]
pub struct MotionDetector {
    config: DetectorConfig,
    model: BackgroundModel,
    next_frame: usize,
}

impl MotionDetector {
    /// Seeds the background from the median of the first `warmup` frames
    /// (all of them if the video is shorter).
    pub fn new(config: DetectorConfig, video: &Clip) -> Result<Self> {
        if config.warmup == 0 {
            return Err(Error::Config("detector warm-up must be at least one frame".into()));
        }
        let n = config.warmup.min(video.len());
        let frames = (0..n).map(|t| gray_frame(video, t)).collect::<Result<Vec<_>>>()?;
        let model = BackgroundModel::from_median(&frames, config.alpha, config.threshold)?;
        Ok(MotionDetector { config, model, next_frame: 0 })
    }

    pub fn model(&self) -> &BackgroundModel {
        &self.model
    }

    /// Cleaned foreground mask and detections for the next frame, then a
    /// background update that skips pixels near the foreground.
    pub fn step(&mut self, frame: &Gray) -> Result<(Mask, Vec<Detection>)> {
        let raw = self.model.fg_mask(frame)?;
        let cleaned = close(&open(&raw, self.config.open_radius), self.config.close_radius);
        let mut dets = connected_components(&cleaned, self.config.min_area);
        for d in &mut dets {
            d.frame = self.next_frame;
        }
        self.model.update_masked(frame, &dilate(&cleaned, self.config.close_radius.max(1)))?;
        self.next_frame += 1;
        Ok((cleaned, dets))
    }

    /// Runs every frame of `video`.
    pub fn run(config: DetectorConfig, video: &Clip) -> Result<(Vec<Mask>, Vec<Vec<Detection>>)> {
        let mut det = MotionDetector::new(config, video)?;
        let mut masks = Vec::with_capacity(video.len());
        let mut all = Vec::with_capacity(video.len());
        for t in 0..video.len() {
            let (m, d) = det.step(&gray_frame(video, t)?)?;
            masks.push(m);
            all.push(d);
        }
        Ok((masks, all))
    }
}

pub(crate) fn gray_frame(video: &Clip, t: usize) -> Result<Gray> {
    to_gray(video.frame(t), video.channels(), video.height(), video.width())
}
