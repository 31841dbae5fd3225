use crate::error::{Error, Result};

/// Single-channel image of values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gray {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Gray {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!("{height}x{width} image with {} values", data.len())));
        }
        Ok(Gray { height, width, data })
    }

    pub fn filled(height: usize, width: usize, v: f32) -> Self {
        Gray { height, width, data: vec![v; height * width] }
    }

    fn check_extents(&self, other_h: usize, other_w: usize) -> Result<()> {
        if (self.height, self.width) != (other_h, other_w) {
            return Err(Error::Dimension(format!(
                "image is {other_h}x{other_w} but the model is {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

/// Binary image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn empty(height: usize, width: usize) -> Self {
        Mask { height, width, data: vec![false; height * width] }
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// 0/255 bytes, for PGM dumps.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| if v { 255 } else { 0 }).collect()
    }
}

/// Luma of a planar `C x H x W` frame: a copy for one channel, otherwise
/// `0.299 R + 0.587 G + 0.114 B`.
pub fn to_gray(planar: &[f32], channels: usize, height: usize, width: usize) -> Result<Gray> {
    let hw = height * width;
    if planar.len() != channels * hw {
        return Err(Error::Dimension(format!("{} values for a {channels}x{height}x{width} frame", planar.len())));
    }
    let data = match channels {
        1 => planar.to_vec(),
        3 => (0..hw).map(|i| 0.299 * planar[i] + 0.587 * planar[hw + i] + 0.114 * planar[2 * hw + i]).collect(),
        c => return Err(Error::Dimension(format!("cannot convert {c} channels to gray"))),
    };
    Gray::new(height, width, data)
}

/// Per-pixel exponential running mean of the background.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    pub mean: Gray,
    pub alpha: f32,
    pub threshold: f32,
}

impl BackgroundModel {
    /// `alpha` must lie in `(0, 1)` and `threshold` in `(0, 1]`.
    pub fn new(initial: Gray, alpha: f32, threshold: f32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("background alpha must be in (0, 1), got {alpha}")));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Config(format!("foreground threshold must be in (0, 1], got {threshold}")));
        }
        Ok(BackgroundModel { mean: initial, alpha, threshold })
    }

    /// Starts from the per-pixel median of `frames` (upper median for even counts).
    pub fn from_median(frames: &[Gray], alpha: f32, threshold: f32) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Empty("no frames to initialize the background".into()))?;
        for f in frames {
            first.check_extents(f.height, f.width)?;
        }
        let mut column = vec![0.0f32; frames.len()];
        let data = (0..first.data.len())
            .map(|i| {
                for (c, f) in column.iter_mut().zip(frames) {
                    *c = f.data[i];
                }
                column.sort_by(f32::total_cmp);
                column[frames.len() / 2]
            })
            .collect();
        BackgroundModel::new(Gray::new(first.height, first.width, data)?, alpha, threshold)
    }

    /// `mean <- (1 - alpha) mean + alpha frame` at every pixel.
    pub fn update(&mut self, frame: &Gray) -> Result<()> {
        self.mean.check_extents(frame.height, frame.width)?;
        let a = self.alpha;
        for (m, &f) in self.mean.data.iter_mut().zip(&frame.data) {
            *m = (1.0 - a) * *m + a * f;
        }
        Ok(())
    }

    /// Like [`BackgroundModel::update`] but leaves pixels under `foreground`
    /// untouched, so people who stop moving are not absorbed.
    pub fn update_masked(&mut self, frame: &Gray, foreground: &Mask) -> Result<()> {
        self.mean.check_extents(frame.height, frame.width)?;
        self.mean.check_extents(foreground.height, foreground.width)?;
        let a = self.alpha;
        for ((m, &f), &fg) in self.mean.data.iter_mut().zip(&frame.data).zip(&foreground.data) {
            if !fg {
                *m = (1.0 - a) * *m + a * f;
            }
        }
        Ok(())
    }

    /// Pixels with `|frame - mean| > threshold`.
    pub fn fg_mask(&self, frame: &Gray) -> Result<Mask> {
        self.mean.check_extents(frame.height, frame.width)?;
        let data = self.mean.data.iter().zip(&frame.data).map(|(&m, &f)| (f - m).abs() > self.threshold).collect();
        Ok(Mask { height: frame.height, width: frame.width, data })
    }
}
