use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::motion::DetectorConfig;
use crate::sequence::CropConfig;
use crate::synth::{ActionSetConfig, Motion};
use crate::track::{KcfConfig, TrackerConfig};
use crate::video::SplitRatios;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Surveillance,
    Classify,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Surveillance => "surveillance",
            RunMode::Classify => "classify",
        })
    }
}

impl FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surveillance" => Ok(RunMode::Surveillance),
            "classify" => Ok(RunMode::Classify),
            other => Err(Error::Config(format!("unknown mode '{other}'; expected surveillance or classify"))),
        }
    }
}

/// Network input a model is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Rgb,
    Bs,
    Mhi,
    Frames,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rgb, Variant::Bs, Variant::Mhi, Variant::Frames];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rgb => "rgb",
            Variant::Bs => "bs",
            Variant::Mhi => "mhi",
            Variant::Frames => "frames",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown input variant '{s}'; expected rgb, bs, mhi or frames")))
    }
}

/// Network size preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Full-size network, 16 x 64 x 64 input.
    Default,
    /// Narrow network on 8 x 16 x 16 input.
    Compact,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Default => "default",
            Preset::Compact => "compact",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Preset::Default),
            "compact" => Ok(Preset::Compact),
            other => Err(Error::Config(format!("unknown preset '{other}'; expected default or compact"))),
        }
    }
}

/// What `gen-data` renders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    /// Labelled clip archives in every input variant.
    Actions,
    /// A surveillance scene as a frame directory with ground truth.
    Scene,
    /// A multi-shot video as a frame directory with its cut list.
    Shots,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataKind::Actions => "actions",
            DataKind::Scene => "scene",
            DataKind::Shots => "shots",
        })
    }
}

impl FromStr for DataKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "actions" => Ok(DataKind::Actions),
            "scene" => Ok(DataKind::Scene),
            "shots" => Ok(DataKind::Shots),
            other => Err(Error::Config(format!("unknown data kind '{other}'; expected actions, scene or shots"))),
        }
    }
}

/// Every setting of every command, as flat `key = value` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub mode: RunMode,
    pub input: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Frame rate assumed for frame directories.
    pub fps: f64,

    pub detector: DetectorConfig,
    pub tracker: TrackerConfig,
    pub crop_margin: f64,
    /// Shortest track, in frames, that gets a timeline.
    pub min_track_frames: usize,
    pub clip_seconds: f64,
    pub stride_seconds: f64,
    pub mhi_tau: usize,
    pub mhi_threshold: f32,
    pub smooth_window: usize,
    pub shot_threshold: f64,
    pub debug_masks: bool,

    pub variant: Variant,
    pub preset: Preset,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub split: SplitRatios,
    pub target_accuracy: Option<f64>,
    pub augment: bool,
    pub keep_best: bool,

    pub data_kind: DataKind,
    pub clips_per_class: usize,
    pub clip_frames: usize,
    pub frame_size: usize,
    pub crop_size: usize,
    pub noise_sigma: f64,
    pub motions: Vec<Motion>,
    pub warmup_frames: usize,
    pub scene_frames: usize,
    pub shot_frames: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let action = ActionSetConfig::default();
        PipelineConfig {
            mode: RunMode::Surveillance,
            input: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            fps: 25.0,
            detector: DetectorConfig::default(),
            tracker: TrackerConfig::default(),
            crop_margin: CropConfig::default().margin,
            min_track_frames: 8,
            clip_seconds: 0.64,
            stride_seconds: 0.32,
            mhi_tau: action.mhi_tau,
            mhi_threshold: action.mhi_threshold,
            smooth_window: 3,
            shot_threshold: crate::summary::DEFAULT_SHOT_THRESHOLD,
            debug_masks: false,
            variant: Variant::Rgb,
            preset: Preset::Compact,
            epochs: 100,
            batch_size: 64,
            lr: 0.001,
            split: SplitRatios::P80,
            target_accuracy: None,
            augment: false,
            keep_best: true,
            data_kind: DataKind::Actions,
            clips_per_class: action.clips_per_class,
            clip_frames: action.frames,
            frame_size: action.frame_size,
            crop_size: action.crop_size,
            noise_sigma: action.noise_sigma,
            motions: vec![Motion::Translate, Motion::OscillateArms, Motion::Spin],
            warmup_frames: 25,
            scene_frames: 100,
            shot_frames: 50,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value '{value}' for '{key}'; expected true or false"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Sets one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "input" => self.input = opt_path(v),
            "checkpoint" => self.checkpoint = opt_path(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "fps" => self.fps = parse(key, v)?,
            "bg_alpha" => self.detector.alpha = parse(key, v)?,
            "fg_threshold" => self.detector.threshold = parse(key, v)?,
            "open_radius" => self.detector.open_radius = parse(key, v)?,
            "close_radius" => self.detector.close_radius = parse(key, v)?,
            "min_blob_area" => self.detector.min_area = parse(key, v)?,
            "bg_warmup" => self.detector.warmup = parse(key, v)?,
            "kcf_patch" => self.tracker.kcf.patch = parse(key, v)?,
            "kcf_padding" => self.tracker.kcf.padding = parse(key, v)?,
            "kcf_sigma" => self.tracker.kcf.sigma = parse(key, v)?,
            "kcf_lambda" => self.tracker.kcf.lambda = parse(key, v)?,
            "kcf_interp" => self.tracker.kcf.interp = parse(key, v)?,
            "iou_threshold" => self.tracker.iou_threshold = parse(key, v)?,
            "max_miss" => self.tracker.max_miss = parse(key, v)?,
            "track_min_area" => self.tracker.min_area = parse(key, v)?,
            "peak_threshold" => self.tracker.peak_threshold = parse(key, v)?,
            "crop_margin" => self.crop_margin = parse(key, v)?,
            "min_track_frames" => self.min_track_frames = parse(key, v)?,
            "clip_seconds" => self.clip_seconds = parse(key, v)?,
            "stride_seconds" => self.stride_seconds = parse(key, v)?,
            "mhi_tau" => self.mhi_tau = parse(key, v)?,
            "mhi_threshold" => self.mhi_threshold = parse(key, v)?,
            "smooth_window" => self.smooth_window = parse(key, v)?,
            "shot_threshold" => self.shot_threshold = parse(key, v)?,
            "debug_masks" => self.debug_masks = parse_bool(key, v)?,
            "variant" => self.variant = v.parse()?,
            "preset" => self.preset = v.parse()?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "split" => self.split = v.parse()?,
            "target_accuracy" => {
                self.target_accuracy = if v == "none" || v.is_empty() { None } else { Some(parse(key, v)?) }
            }
            "augment" => self.augment = parse_bool(key, v)?,
            "keep_best" => self.keep_best = parse_bool(key, v)?,
            "data_kind" => self.data_kind = v.parse()?,
            "clips_per_class" => self.clips_per_class = parse(key, v)?,
            "clip_frames" => self.clip_frames = parse(key, v)?,
            "frame_size" => self.frame_size = parse(key, v)?,
            "crop_size" => self.crop_size = parse(key, v)?,
            "noise_sigma" => self.noise_sigma = parse(key, v)?,
            "motions" => {
                self.motions = v.split(',').map(|m| m.trim().parse()).collect::<Result<_>>()?;
            }
            "warmup_frames" => self.warmup_frames = parse(key, v)?,
            "scene_frames" => self.scene_frames = parse(key, v)?,
            "shot_frames" => self.shot_frames = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(origin, format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::format(origin, format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut c = PipelineConfig::default();
        c.apply_text(&text, path)?;
        Ok(c)
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = match file {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.split.validate()?;
        let positive = [
            ("fps", self.fps),
            ("clip_seconds", self.clip_seconds),
            ("stride_seconds", self.stride_seconds),
            ("lr", self.lr + 1.0),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("'{k}' must be positive")));
        }
        if self.smooth_window % 2 == 0 {
            return Err(Error::Config(format!("smooth_window must be odd, got {}", self.smooth_window)));
        }
        if self.batch_size == 0 || self.crop_size == 0 || self.frame_size == 0 || self.clip_frames < 2 {
            return Err(Error::Config("batch_size, crop_size and frame_size must be positive and clip_frames at least 2".into()));
        }
        if self.motions.is_empty() {
            return Err(Error::Config("motions must name at least one pattern".into()));
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order; feeding the
    /// result back through [`PipelineConfig::apply_text`] gives the same config.
    pub fn to_text(&self) -> String {
        let d = &self.detector;
        let t = &self.tracker;
        let k: &KcfConfig = &t.kcf;
        let motions: Vec<&str> = self.motions.iter().map(|m| m.name()).collect();
        let split = format!("{}/{}/{}", self.split.train, self.split.val, self.split.test);
        let target = self.target_accuracy.map(|a| a.to_string()).unwrap_or_else(|| "none".into());
        let pairs: Vec<(&str, String)> = vec![
            ("mode", self.mode.to_string()),
            ("input", show_path(&self.input)),
            ("checkpoint", show_path(&self.checkpoint)),
            ("out_dir", self.out_dir.display().to_string()),
            ("seed", self.seed.to_string()),
            ("fps", self.fps.to_string()),
            ("bg_alpha", d.alpha.to_string()),
            ("fg_threshold", d.threshold.to_string()),
            ("open_radius", d.open_radius.to_string()),
            ("close_radius", d.close_radius.to_string()),
            ("min_blob_area", d.min_area.to_string()),
            ("bg_warmup", d.warmup.to_string()),
            ("kcf_patch", k.patch.to_string()),
            ("kcf_padding", k.padding.to_string()),
            ("kcf_sigma", k.sigma.to_string()),
            ("kcf_lambda", k.lambda.to_string()),
            ("kcf_interp", k.interp.to_string()),
            ("iou_threshold", t.iou_threshold.to_string()),
            ("max_miss", t.max_miss.to_string()),
            ("track_min_area", t.min_area.to_string()),
            ("peak_threshold", t.peak_threshold.to_string()),
            ("crop_margin", self.crop_margin.to_string()),
            ("min_track_frames", self.min_track_frames.to_string()),
            ("clip_seconds", self.clip_seconds.to_string()),
            ("stride_seconds", self.stride_seconds.to_string()),
            ("mhi_tau", self.mhi_tau.to_string()),
            ("mhi_threshold", self.mhi_threshold.to_string()),
            ("smooth_window", self.smooth_window.to_string()),
            ("shot_threshold", self.shot_threshold.to_string()),
            ("debug_masks", self.debug_masks.to_string()),
            ("variant", self.variant.to_string()),
            ("preset", self.preset.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("split", split),
            ("target_accuracy", target),
            ("augment", self.augment.to_string()),
            ("keep_best", self.keep_best.to_string()),
            ("data_kind", self.data_kind.to_string()),
            ("clips_per_class", self.clips_per_class.to_string()),
            ("clip_frames", self.clip_frames.to_string()),
            ("frame_size", self.frame_size.to_string()),
            ("crop_size", self.crop_size.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("motions", motions.join(",")),
            ("warmup_frames", self.warmup_frames.to_string()),
            ("scene_frames", self.scene_frames.to_string()),
            ("shot_frames", self.shot_frames.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn action_set_config(&self) -> ActionSetConfig {
        ActionSetConfig {
            clips_per_class: self.clips_per_class,
            frames: self.clip_frames,
            frame_size: self.frame_size,
            crop_size: self.crop_size,
            fps: self.fps,
            seed: self.seed,
            noise_sigma: self.noise_sigma,
            margin: self.crop_margin,
            mhi_tau: self.mhi_tau,
            mhi_threshold: self.mhi_threshold,
        }
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::Config("no input given (set 'input' or pass --input)".into()))
    }

    pub fn require_checkpoint(&self) -> Result<&Path> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| Error::Config("no checkpoint given (set 'checkpoint' or pass --checkpoint)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut c = PipelineConfig::default();
        c.set("kcf_sigma", "0.3").unwrap();
        c.set("motions", "spin, still").unwrap();
        c.set("target_accuracy", "0.95").unwrap();
        c.set("input", "a b/c").unwrap();
        let mut back = PipelineConfig::default();
        back.apply_text(&c.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut c = PipelineConfig::default();
        assert!(c.set("kcf_sigmaa", "1").is_err());
        assert!(c.set("epochs", "ten").is_err());
        assert!(c.apply_text("epochs 10\n", Path::new("x")).is_err());
        assert!(c.apply_text("# only a comment\n\nepochs = 10 # trailing\n", Path::new("x")).is_ok());
        assert_eq!(c.epochs, 10);
    }
}
