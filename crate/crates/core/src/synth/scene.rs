use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sprite::{sample, Motion, SpriteSpec, SpriteTexture};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::Mask;
use crate::tensor::Tensor;
use crate::video::{write_frame_dir, Clip};

/// Smooth tinted texture around a mean level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub seed: u64,
    pub level: f64,
    /// Amplitude of each of the three sinusoidal ripples.
    pub ripple: f64,
}

impl BackgroundSpec {
    pub fn new(seed: u64, level: f64) -> Self {
        BackgroundSpec { seed, level, ripple: 0.03 }
    }

    /// Planar `3 x H x W` image.
    pub fn render(&self, height: usize, width: usize) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![0.0f32; 3 * height * width];
        for ch in 0..3 {
            let tint: f64 = rng.gen_range(-0.04..0.04);
            let waves: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.3), rng.gen_range(0.0..2.0 * PI)))
                .collect();
            for y in 0..height {
                for x in 0..width {
                    let r: f64 = waves.iter().map(|&(fx, fy, p)| (fx * x as f64 + fy * y as f64 + p).sin()).sum();
                    out[(ch * height + y) * width + x] = (self.level + tint + self.ripple * r).clamp(0.0, 1.0) as f32;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSprite {
    pub sprite: SpriteSpec,
    /// First frame on screen; the sprite's own clock starts here.
    pub appear: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub frames: usize,
    pub background: BackgroundSpec,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// Drawn in order, later ones in front.
    pub sprites: Vec<SceneSprite>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("scene fps must be positive, got {}", self.fps)));
        }
        if (self.frames as f64) < 2.0 * self.fps {
            return Err(Error::Config(format!("scene lasts {} frames, under 2 s at {} fps", self.frames, self.fps)));
        }
        self.validate_layout()
    }

    /// Everything but the minimum duration, which short action clips skip.
    fn validate_layout(&self) -> Result<()> {
        if self.height < 4 || self.width < 4 {
            return Err(Error::Config(format!("scene of {}x{} pixels is too small", self.height, self.width)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        for (i, s) in self.sprites.iter().enumerate() {
            s.sprite.validate()?;
            // Some part of the body must stay on screen throughout.
            for t in 0..self.frames.saturating_sub(s.appear) {
                let (cx, cy) = s.sprite.pose(t).center;
                if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
                    return Err(Error::Config(format!("sprite {i} leaves the frame at frame {}", s.appear + t)));
                }
            }
        }
        Ok(())
    }
}

/// One object in one frame of ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: usize,
    pub bbox: BBox,
    pub action: String,
}

#[derive(Clone, Debug)]
pub struct SceneOutput {
    pub video: Clip,
    /// Per frame, the visible sprites with tight boxes.
    pub truth: Vec<Vec<GtObject>>,
    /// Per frame, the union of visible sprite pixels.
    pub masks: Vec<Mask>,
    /// Per frame and sprite, that sprite's visible pixels.
    pub sprite_masks: Vec<Vec<Mask>>,
}

/// Renders the scene: background, sprites sampled at pixel centers, then
/// clamped Gaussian noise. A pure function of the spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneOutput> {
    spec.validate()?;
    render_scene(spec)
}

pub(crate) fn render_scene(spec: &SceneSpec) -> Result<SceneOutput> {
    spec.validate_layout()?;
    let (h, w) = (spec.height, spec.width);
    let hw = h * w;
    let bg = spec.background.render(h, w);
    let textures: Vec<SpriteTexture> = spec.sprites.iter().map(|s| SpriteTexture::new(&s.sprite)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).map_err(|e| Error::Config(e.to_string()))?;

    let mut data = Vec::with_capacity(spec.frames * 3 * hw);
    let mut truth = Vec::with_capacity(spec.frames);
    let mut masks = Vec::with_capacity(spec.frames);
    let mut sprite_masks = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut frame = bg.clone();
        // Topmost sprite per pixel, to keep boxes tight on visible pixels.
        let mut owner: Vec<Option<usize>> = vec![None; hw];
        for (i, (s, tex)) in spec.sprites.iter().zip(&textures).enumerate() {
            if t < s.appear {
                continue;
            }
            let pose = s.sprite.pose(t - s.appear);
            let r = s.sprite.reach();
            let x0 = (pose.center.0 - r).floor().max(0.0) as usize;
            let y0 = (pose.center.1 - r).floor().max(0.0) as usize;
            let x1 = ((pose.center.0 + r).ceil().max(0.0) as usize).min(w);
            let y1 = ((pose.center.1 + r).ceil().max(0.0) as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    if let Some(rgb) = sample(&s.sprite, tex, &pose, x as f64 + 0.5, y as f64 + 0.5) {
                        for (ch, v) in rgb.iter().enumerate() {
                            frame[ch * hw + y * w + x] = *v;
                        }
                        owner[y * w + x] = Some(i);
                    }
                }
            }
        }
        if spec.noise_sigma > 0.0 {
            for v in frame.iter_mut() {
                *v = (*v as f64 + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }
        data.extend_from_slice(&frame);

        let mut objects = Vec::new();
        let mut per_sprite = Vec::with_capacity(spec.sprites.len());
        for (i, s) in spec.sprites.iter().enumerate() {
            let mut m = Mask::empty(h, w);
            let (mut bx0, mut by0, mut bx1, mut by1) = (usize::MAX, usize::MAX, 0, 0);
            for (p, o) in owner.iter().enumerate() {
                if *o == Some(i) {
                    m.data[p] = true;
                    let (y, x) = (p / w, p % w);
                    bx0 = bx0.min(x);
                    by0 = by0.min(y);
                    bx1 = bx1.max(x);
                    by1 = by1.max(y);
                }
            }
            if bx0 != usize::MAX {
                objects.push(GtObject {
                    id: i,
                    bbox: BBox::new(bx0 as f64, by0 as f64, (bx1 - bx0 + 1) as f64, (by1 - by0 + 1) as f64),
                    action: s.sprite.motion.name().to_string(),
                });
            }
            per_sprite.push(m);
        }
        truth.push(objects);
        masks.push(Mask { height: h, width: w, data: owner.iter().map(Option::is_some).collect() });
        sprite_masks.push(per_sprite);
    }
    let video = Clip::new(Tensor::new(&[spec.frames, 3, h, w], data)?, spec.fps, "synthetic", 0)?;
    Ok(SceneOutput { video, truth, masks, sprite_masks })
}

/// A sprite clip and everything known about it.
#[derive(Clone, Debug)]
pub struct ActionClip {
    pub clip: Clip,
    pub label: usize,
    pub boxes: Vec<BBox>,
    pub masks: Vec<Mask>,
}

/// Frame extents, timing and look shared by generated clips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSetup {
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub background: BackgroundSpec,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

/// `frames` frames of one sprite on its own, on screen from the start.
pub fn generate_action_clip(sprite: &SpriteSpec, frames: usize, setup: &ClipSetup) -> Result<ActionClip> {
    if frames == 0 {
        return Err(Error::Config("an action clip needs at least one frame".into()));
    }
    let spec = SceneSpec {
        height: setup.height,
        width: setup.width,
        fps: setup.fps,
        frames,
        background: setup.background.clone(),
        noise_sigma: setup.noise_sigma,
        noise_seed: setup.noise_seed,
        sprites: vec![SceneSprite { sprite: sprite.clone(), appear: 0 }],
    };
    let out = render_scene(&spec)?;
    let boxes = out
        .truth
        .iter()
        .enumerate()
        .map(|(t, f)| f.first().map(|o| o.bbox).ok_or_else(|| Error::Config(format!("sprite invisible at frame {t}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ActionClip { clip: out.video, label: sprite.motion.index(), boxes, masks: out.masks })
}

/// One shot: a sprite over its own background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotSpec {
    pub sprite: SpriteSpec,
    pub frames: usize,
    pub background: BackgroundSpec,
}

#[derive(Clone, Debug)]
pub struct ShotVideo {
    pub video: Clip,
    /// First frame of every shot after the first.
    pub boundaries: Vec<usize>,
    pub labels: Vec<Motion>,
}

/// Concatenates shots; each cut switches background and sprite at once.
pub fn generate_shot_video(shots: &[ShotSpec], setup: &ClipSetup) -> Result<ShotVideo> {
    if shots.is_empty() {
        return Err(Error::Config("a shot video needs at least one shot".into()));
    }
    let mut data = Vec::new();
    let mut boundaries = Vec::new();
    let mut total = 0;
    for (i, s) in shots.iter().enumerate() {
        let shot_setup = ClipSetup {
            background: s.background.clone(),
            noise_seed: setup.noise_seed.wrapping_add(i as u64),
            ..setup.clone()
        };
        let c = generate_action_clip(&s.sprite, s.frames, &shot_setup)?;
        if i > 0 {
            boundaries.push(total);
        }
        total += s.frames;
        data.extend_from_slice(c.clip.frames().data());
    }
    let video = Clip::new(Tensor::new(&[total, 3, setup.height, setup.width], data)?, setup.fps, "shots", 0)?;
    Ok(ShotVideo { video, boundaries, labels: shots.iter().map(|s| s.sprite.motion).collect() })
}

#[derive(Serialize)]
struct SceneTruthFile<'a> {
    fps: f64,
    frames: usize,
    labels: Vec<String>,
    objects: &'a [Vec<GtObject>],
}

/// Frames as PPM files plus `truth.json` with per-frame boxes.
pub fn write_scene_dir(out: &SceneOutput, dir: &Path) -> Result<()> {
    write_frame_dir(&out.video, dir)?;
    let truth = SceneTruthFile { fps: out.video.fps, frames: out.video.len(), labels: Motion::labels(), objects: &out.truth };
    let text = serde_json::to_string(&truth)?;
    let path = dir.join("truth.json");
    fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
