use crate::error::{Error, Result};
use crate::motion::to_gray;
use crate::tensor::Tensor;
use crate::video::Clip;

pub const DEFAULT_TAU: usize = 16;
pub const DEFAULT_MHI_THRESHOLD: f32 = 0.05;

/// Motion history image: recency of motion per pixel, 1 for motion in the
/// last frame, fading linearly to 0 over `tau` frames.
#[derive(Clone, Debug, PartialEq)]
pub struct MhiImage {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
    pub tau: usize,
}

impl MhiImage {
    /// `1 x 1 x H x W`: a one-frame, one-channel clip.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::new(&[1, 1, self.height, self.width], self.values.clone()).expect("extents match")
    }
}

/// Runs `H_t = 1` where `|g_t - g_{t-1}| > threshold`, else
/// `max(0, H_{t-1} - 1/tau)`, from `H_0 = 0`, over the luma of `clip`.
pub fn compute_mhi(clip: &Clip, tau: usize, threshold: f32) -> Result<MhiImage> {
    if tau == 0 {
        return Err(Error::Config("MHI tau must be at least 1".into()));
    }
    if clip.len() < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: clip.len() });
    }
    let (c, h, w) = (clip.channels(), clip.height(), clip.width());
    // Frames since the last motion; evaluating the decay from the age keeps
    // full decay exactly zero.
    let mut age: Vec<Option<usize>> = vec![None; h * w];
    let mut prev = to_gray(clip.frame(0), c, h, w)?;
    for t in 1..clip.len() {
        let cur = to_gray(clip.frame(t), c, h, w)?;
        for ((g, a), b) in age.iter_mut().zip(&cur.data).zip(&prev.data) {
            *g = if (a - b).abs() > threshold { Some(0) } else { g.map(|v| v + 1) };
        }
        prev = cur;
    }
    let values = age
        .iter()
        .map(|g| match g {
            Some(a) if *a < tau => 1.0 - *a as f32 / tau as f32,
            _ => 0.0,
        })
        .collect();
    Ok(MhiImage { height: h, width: w, values, tau })
}
