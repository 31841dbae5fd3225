use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{generate_action_clip, BackgroundSpec, ClipSetup, SceneSpec, SceneSprite, ShotSpec};
use super::sprite::{Motion, SpriteSpec};
use crate::error::{Error, Result};
use crate::sequence::{compute_mhi, extract_person_sequence, CropConfig};
use crate::track::TrackState;
use crate::video::{resize_bilinear, ClipArchive};

/// Background levels drawn for generated clips.
pub const BACKGROUND_LEVELS: (f64, f64) = (0.25, 0.7);

/// Independent per-item stream derived from a run seed.
pub fn item_rng(seed: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item);
    rng
}

/// Random body, texture and timing for `motion`, placed so the sprite stays
/// inside a `height x width` frame whose horizontal room is `x_range`.
pub fn random_sprite<R: Rng>(rng: &mut R, motion: Motion, height: usize, x_range: (f64, f64)) -> SpriteSpec {
    let w = rng.gen_range(7..=11) as f64;
    let h = rng.gen_range(14..=20) as f64;
    let mut s = SpriteSpec {
        width: w,
        height: h,
        texture_seed: rng.gen(),
        motion,
        speed: if motion == Motion::Translate { rng.gen_range(1.0..2.0) } else { 0.0 },
        direction: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        period: rng.gen_range(8.0..14.0),
        phase: rng.gen_range(0.0..2.0 * PI),
        start: (0.0, 0.0),
        bounds: None,
        arm_rest: rng.gen_range(-1.0..-0.5),
    };
    let (lo, hi) = (x_range.0 + w / 2.0 + 1.0, x_range.1 - w / 2.0 - 1.0);
    let mid = (lo + hi) / 2.0;
    let x = if motion == Motion::Translate {
        s.bounds = Some((lo, hi));
        rng.gen_range(lo..hi)
    } else {
        mid + rng.gen_range(-2.0..2.0)
    };
    let y = height as f64 / 2.0 + s.lift() / 2.0 + rng.gen_range(-1.5..1.5);
    s.start = (x, y);
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSetConfig {
    pub clips_per_class: usize,
    pub frames: usize,
    /// Side of the square frames clips are rendered at.
    pub frame_size: usize,
    /// Side of the stored crops and frames.
    pub crop_size: usize,
    pub fps: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    pub margin: f64,
    pub mhi_tau: usize,
    pub mhi_threshold: f32,
}

impl Default for ActionSetConfig {
    fn default() -> Self {
        ActionSetConfig {
            clips_per_class: 300,
            frames: 16,
            frame_size: 32,
            crop_size: 16,
            fps: 25.0,
            seed: 0,
            noise_sigma: 0.01,
            margin: 0.15,
            mhi_tau: 16,
            mhi_threshold: 0.05,
        }
    }
}

/// The same labelled clips in the four input forms.
#[derive(Clone, Debug, Default)]
pub struct ActionSet {
    /// Person crops, `T x 3 x S x S`.
    pub rgb: ClipArchive,
    /// Crops with the background zeroed.
    pub bs: ClipArchive,
    /// Motion history of `bs`, `1 x 1 x S x S`.
    pub mhi: ClipArchive,
    /// Whole frames resized to `S x S`.
    pub frames: ClipArchive,
}

impl ActionSet {
    pub fn variant(&self, name: &str) -> Result<&ClipArchive> {
        match name {
            "rgb" => Ok(&self.rgb),
            "bs" => Ok(&self.bs),
            "mhi" => Ok(&self.mhi),
            "frames" => Ok(&self.frames),
            other => Err(Error::Config(format!("unknown input variant '{other}'; expected rgb, bs, mhi or frames"))),
        }
    }
}

pub fn random_setup<R: Rng>(rng: &mut R, size: usize, fps: f64, noise_sigma: f64) -> ClipSetup {
    ClipSetup {
        height: size,
        width: size,
        fps,
        background: BackgroundSpec::new(rng.gen(), rng.gen_range(BACKGROUND_LEVELS.0..BACKGROUND_LEVELS.1)),
        noise_sigma,
        noise_seed: rng.gen(),
    }
}

/// Renders `clips_per_class` clips of every class, classes interleaved,
/// each from its own seeded stream.
pub fn generate_action_set(config: &ActionSetConfig) -> Result<ActionSet> {
    if config.clips_per_class == 0 || config.frames < 2 || config.crop_size == 0 {
        return Err(Error::Config("action sets need clips, at least 2 frames and a positive crop size".into()));
    }
    let labels = Motion::labels();
    let mut set = ActionSet {
        rgb: ClipArchive::new(labels.clone()),
        bs: ClipArchive::new(labels.clone()),
        mhi: ClipArchive::new(labels.clone()),
        frames: ClipArchive::new(labels),
    };
    let crop = CropConfig { size: config.crop_size, margin: config.margin, union: true, min_frames: 2 };
    let n = config.clips_per_class * Motion::ALL.len();
    for i in 0..n {
        let motion = Motion::ALL[i % Motion::ALL.len()];
        let mut rng = item_rng(config.seed, i as u64);
        let setup = random_setup(&mut rng, config.frame_size, config.fps, config.noise_sigma);
        let sprite = random_sprite(&mut rng, motion, config.frame_size, (0.0, config.frame_size as f64));
        let clip = generate_action_clip(&sprite, config.frames, &setup)?;
        let states: Vec<TrackState> =
            clip.boxes.iter().enumerate().map(|(t, &bbox)| TrackState { frame: t, bbox }).collect();
        let seq = extract_person_sequence(&clip.clip, i, &states, &clip.masks, &crop)?;
        let mhi = compute_mhi(&seq.bs, config.mhi_tau, config.mhi_threshold)?;
        let label = motion.index();
        set.frames.push(label, resize_bilinear(clip.clip.frames(), config.crop_size, config.crop_size)?, config.fps)?;
        set.rgb.push(label, seq.rgb.into_frames(), config.fps)?;
        set.bs.push(label, seq.bs.into_frames(), config.fps)?;
        set.mhi.push(label, mhi.to_tensor(), config.fps)?;
    }
    Ok(set)
}

/// Surveillance-style scene: a clean warm-up, then one sprite per motion in
/// its own column, all on screen until the end.
pub fn surveillance_scene(seed: u64, motions: &[Motion], warmup: usize, frames: usize) -> SceneSpec {
    let (height, width) = (96, 128);
    let mut rng = item_rng(seed, u64::MAX);
    let column = width as f64 / motions.len().max(1) as f64;
    let sprites = motions
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let mid = (i as f64 + 0.5) * column;
            // Same horizontal room as a generated training clip.
            let sprite = random_sprite(&mut rng, m, height, (mid - 16.0, mid + 16.0));
            SceneSprite { sprite, appear: warmup }
        })
        .collect();
    SceneSpec {
        height,
        width,
        fps: 25.0,
        frames: warmup + frames,
        background: BackgroundSpec::new(rng.gen(), 0.45),
        noise_sigma: 0.01,
        noise_seed: rng.gen(),
        sprites,
    }
}

/// Shots of the given motions on backgrounds alternating between the
/// darkest and lightest training levels.
pub fn shot_specs(seed: u64, motions: &[Motion], frames_per_shot: usize, size: usize) -> Vec<ShotSpec> {
    let mut rng = item_rng(seed, u64::MAX - 1);
    motions
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let level = if i % 2 == 0 { BACKGROUND_LEVELS.0 + 0.02 } else { BACKGROUND_LEVELS.1 - 0.02 };
            ShotSpec {
                sprite: random_sprite(&mut rng, m, size, (0.0, size as f64)),
                frames: frames_per_shot,
                background: BackgroundSpec::new(rng.gen(), level),
            }
        })
        .collect()
}

pub fn shot_setup(seed: u64, size: usize) -> ClipSetup {
    ClipSetup {
        height: size,
        width: size,
        fps: 25.0,
        background: BackgroundSpec::new(seed, 0.45),
        noise_sigma: 0.01,
        noise_seed: seed,
    }
}
