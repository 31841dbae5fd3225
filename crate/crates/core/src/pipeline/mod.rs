//! End-to-end commands: data generation and packing, training and
//! evaluation, surveillance recognition, whole-video classification and
//! summary export. Every command writes its files under `out_dir`.
mod config;

pub use config::{DataKind, PipelineConfig, Preset, RunMode, Variant};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    evaluate, metrics_csv, network_sample, predict, train, Checkpoint, Dataset, Evaluation, Mode, Network,
    NetworkSpec, TrainConfig, TrainReport,
};
use crate::motion::{to_gray, Gray, MotionDetector};
use crate::sequence::{compute_mhi, extract_person_sequence, states_in, track_windows, CropConfig};
use crate::summary::{
    build_person_timeline, build_shot_timeline, detect_shots, smooth_predictions, ClipPrediction, Subject,
    SubjectKind, Summary,
};
use crate::synth::{
    generate_action_set, generate_scene, generate_shot_video, shot_setup, shot_specs, surveillance_scene,
    write_scene_dir,
};
use crate::tensor::{AdamConfig, Tensor};
use crate::track::{write_track_dump, MultiTracker, Track};
use crate::video::{
    list_frames, load_frame_dir, segment_into_clips, split_dataset, write_frame_dir, ClipArchive, Frame, Split,
};

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_SVG: &str = "summary.svg";
pub const TRACK_DUMP: &str = "tracks.jsonl";
pub const CHECKPOINT_FILE: &str = "model.a3dw";
pub const METRICS_CSV: &str = "metrics.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const PACKED_ARCHIVE: &str = "clips.a3dc";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_summary(summary: &Summary, dir: &Path) -> Result<()> {
    summary.write_json(&dir.join(SUMMARY_JSON))?;
    summary.write_svg(&dir.join(SUMMARY_SVG))
}

fn video_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Frames per window for the configured clip length.
fn window_frames(config: &PipelineConfig, fps: f64) -> (usize, usize) {
    let n = (fps * config.clip_seconds).round().max(1.0) as usize;
    let s = (fps * config.stride_seconds).round().max(1.0) as usize;
    (n, s)
}

/// Network shape for training `variant` on records of `channels` channels.
pub fn network_spec(preset: Preset, variant: Variant, channels: usize, num_classes: usize) -> NetworkSpec {
    let mode = if variant == Variant::Mhi { Mode::TwoD } else { Mode::ThreeD };
    let base = match (preset, mode) {
        (Preset::Compact, m) => NetworkSpec::compact(m, num_classes),
        (Preset::Default, Mode::ThreeD) => NetworkSpec::default(),
        (Preset::Default, Mode::TwoD) => NetworkSpec::default_2d(),
    };
    NetworkSpec { in_channels: channels, num_classes, ..base }
}

/// Loads the configured checkpoint; a missing file is a user error.
pub fn load_checkpoint(config: &PipelineConfig) -> Result<(Checkpoint, Network)> {
    let path = config.require_checkpoint()?;
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
    }
    let ck = Checkpoint::load(path)?;
    let net = ck.network()?;
    Ok((ck, net))
}

/// Class probabilities for a list of `T x C x H x W` inputs.
fn classify_inputs(net: &Network, inputs: &[Tensor<f32>]) -> Result<Vec<(usize, f64)>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let spec = net.spec();
    let mut data = Vec::new();
    for x in inputs {
        data.extend(network_sample(x, spec)?);
    }
    let ds = Dataset::new(&spec.sample_shape(), data, vec![0; inputs.len()])?;
    Ok(predict(net, &ds)?
        .iter()
        .map(|p| {
            let (label, conf) = p.iter().enumerate().fold((0, f32::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            (label, conf as f64)
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct SurveillanceOutput {
    pub summary: Summary,
    pub tracks: Vec<Track>,
}

/// Motion detection, tracking, per-window recognition of every track and
/// per-person timelines.
pub fn run_surveillance(config: &PipelineConfig) -> Result<SurveillanceOutput> {
    let (ck, net) = load_checkpoint(config)?;
    let input = config.require_input()?;
    let video = load_frame_dir(input, config.fps)?;
    create_dir(&config.out_dir)?;

    let (masks, detections) = MotionDetector::run(config.detector.clone(), &video)?;
    if config.debug_masks {
        let dir = config.out_dir.join("masks");
        create_dir(&dir)?;
        for (t, m) in masks.iter().enumerate() {
            Frame::new(m.height, m.width, 1, m.to_bytes())?.write_pnm(&dir.join(format!("mask_{t:05}.pgm")))?;
        }
    }
    let grays: Vec<Gray> = (0..video.len())
        .map(|t| to_gray(video.frame(t), video.channels(), video.height(), video.width()))
        .collect::<Result<_>>()?;
    let tracks = MultiTracker::run(config.tracker.clone(), &grays, &detections)?;
    let mut dump = Vec::new();
    write_track_dump(&tracks, &mut dump)?;
    write_file(&config.out_dir.join(TRACK_DUMP), dump)?;

    let (frames, stride) = window_frames(config, video.fps);
    let crop = CropConfig { size: net.spec().height, margin: config.crop_margin, union: true, min_frames: 1 };
    let mut summary = Summary::new(video_name(input), video.fps, ck.labels.clone());
    for track in &tracks {
        let windows = track_windows(&track.states, frames, stride, config.min_track_frames);
        if windows.is_empty() {
            log::debug!("track {} is too short for a timeline", track.id);
            continue;
        }
        let mut inputs = Vec::with_capacity(windows.len());
        for &(s, e) in &windows {
            let seq = extract_person_sequence(&video, track.id, &states_in(&track.states, s, e), &masks, &crop)?;
            inputs.push(match ck.input.as_str() {
                "rgb" => seq.rgb.into_frames(),
                "bs" => seq.bs.into_frames(),
                "mhi" => compute_mhi(&seq.bs, config.mhi_tau, config.mhi_threshold)?.to_tensor(),
                other => {
                    return Err(Error::Config(format!(
                        "checkpoint was trained on '{other}' input; surveillance needs rgb, bs or mhi"
                    )))
                }
            });
        }
        let preds = classify_inputs(&net, &inputs)?;
        let clips: Vec<ClipPrediction> = windows
            .iter()
            .zip(&preds)
            .map(|(&(start, end), &(label, confidence))| ClipPrediction { label, confidence, start, end })
            .collect();
        let raw: Vec<usize> = clips.iter().map(|c| c.label).collect();
        let smoothed = smooth_predictions(&raw, config.smooth_window)?;
        let events = build_person_timeline(&clips, &smoothed, &ck.labels)?;
        summary.subjects.push(Subject { id: track.id, kind: SubjectKind::Person, events });
    }
    if summary.subjects.is_empty() {
        log::warn!("no person was tracked long enough; the summary is empty");
    }
    write_summary(&summary, &config.out_dir)?;
    Ok(SurveillanceOutput { summary, tracks })
}

/// Whole-frame recognition: cut the video into shots, classify the clips of
/// each shot and label every shot by majority.
pub fn run_classify(config: &PipelineConfig) -> Result<Summary> {
    let (ck, net) = load_checkpoint(config)?;
    let input = config.require_input()?;
    let video = load_frame_dir(input, config.fps)?;
    create_dir(&config.out_dir)?;

    let boundaries = detect_shots(&video, config.shot_threshold);
    let mut edges = vec![0];
    edges.extend(&boundaries);
    edges.push(video.len());
    let mut windows = Vec::new();
    for w in edges.windows(2) {
        let shot = video.slice(w[0], w[1])?;
        for c in segment_into_clips(&shot, config.clip_seconds, config.stride_seconds)? {
            windows.push(c);
        }
    }
    let mut summary = Summary::new(video_name(input), video.fps, ck.labels.clone());
    if windows.is_empty() {
        log::warn!("the video is shorter than one {} s clip; the summary is empty", config.clip_seconds);
    } else {
        let inputs: Vec<Tensor<f32>> = windows.iter().map(|c| c.frames().clone()).collect();
        let preds = classify_inputs(&net, &inputs)?;
        let clips: Vec<ClipPrediction> = windows
            .iter()
            .zip(&preds)
            .map(|(c, &(label, confidence))| ClipPrediction { label, confidence, start: c.start, end: c.start + c.len() })
            .collect();
        let events = build_shot_timeline(video.len(), &boundaries, &clips, &ck.labels)?;
        for e in events {
            let id = edges.iter().position(|&s| s == e.start).unwrap_or(0);
            summary.subjects.push(Subject { id, kind: SubjectKind::Shot, events: vec![e] });
        }
    }
    write_summary(&summary, &config.out_dir)?;
    Ok(summary)
}

/// Confusion matrix as CSV, rows are true classes.
pub fn confusion_csv(confusion: &[Vec<usize>], labels: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for l in labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(confusion) {
        out.push_str(l);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub split: Split,
    pub report: TrainReport,
    pub test: Option<Evaluation>,
    pub checkpoint: PathBuf,
}

/// Trains on the training part of the input archive, stops on the
/// validation part and scores the held-out test part.
pub fn run_train(config: &PipelineConfig) -> Result<TrainOutcome> {
    let archive = ClipArchive::read(config.require_input()?)?;
    let first = archive.records.first().ok_or_else(|| Error::Empty("the archive holds no clips".into()))?;
    let spec = network_spec(config.preset, config.variant, first.frames.shape()[1], archive.labels.len());
    let data = Dataset::from_archive(&archive, &spec)?;
    let split = split_dataset(data.labels(), &archive.labels, config.split, config.seed)?;
    let (train_set, val_set, test_set) = (data.subset(&split.train), data.subset(&split.val), data.subset(&split.test));
    create_dir(&config.out_dir)?;

    let mut net = Network::new(&spec, config.seed)?;
    let tc = TrainConfig {
        adam: AdamConfig { lr: config.lr, ..AdamConfig::default() },
        batch_size: config.batch_size,
        epochs: config.epochs,
        seed: config.seed,
        split: config.split,
        target_accuracy: config.target_accuracy,
        augment: config.augment,
        keep_best: config.keep_best,
    };
    let report = train(&mut net, &train_set, (!val_set.is_empty()).then_some(&val_set), &tc, |_| {})?;
    let test = if test_set.is_empty() { None } else { Some(evaluate(&net, &test_set)?) };

    let mut ck = Checkpoint::from_network(&net, report.final_epoch, archive.labels.clone(), config.variant.name());
    ck.optimizer = Some(report.optimizer.clone());
    ck.history = report.history.clone();
    let path = config.out_dir.join(CHECKPOINT_FILE);
    ck.save(&path)?;
    write_file(&config.out_dir.join(METRICS_CSV), metrics_csv(&report.history))?;
    if let Some(e) = &test {
        write_file(&config.out_dir.join(CONFUSION_CSV), confusion_csv(&e.confusion, &archive.labels))?;
    }
    Ok(TrainOutcome { split, report, test, checkpoint: path })
}

/// Scores a checkpoint on the test part of the input archive, using the
/// same split as training.
pub fn run_eval(config: &PipelineConfig) -> Result<Evaluation> {
    let (ck, net) = load_checkpoint(config)?;
    let archive = ClipArchive::read(config.require_input()?)?;
    if archive.labels != ck.labels {
        return Err(Error::Incompatible(format!(
            "archive labels {:?} differ from the checkpoint's {:?}",
            archive.labels, ck.labels
        )));
    }
    let data = Dataset::from_archive(&archive, net.spec())?;
    let split = split_dataset(data.labels(), &archive.labels, config.split, config.seed)?;
    let e = evaluate(&net, &data.subset(&split.test))?;
    create_dir(&config.out_dir)?;
    write_file(&config.out_dir.join(CONFUSION_CSV), confusion_csv(&e.confusion, &archive.labels))?;
    Ok(e)
}

#[derive(Serialize)]
struct ShotFile {
    fps: f64,
    frames: usize,
    boundaries: Vec<usize>,
    labels: Vec<String>,
}

/// Renders synthetic data of the configured kind; returns the written paths.
pub fn gen_data(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    create_dir(&config.out_dir)?;
    let dir = &config.out_dir;
    match config.data_kind {
        DataKind::Actions => {
            let set = generate_action_set(&config.action_set_config())?;
            let mut paths = Vec::new();
            for v in Variant::ALL {
                let p = dir.join(format!("{v}.a3dc"));
                set.variant(v.name())?.write(&p)?;
                paths.push(p);
            }
            Ok(paths)
        }
        DataKind::Scene => {
            let spec = surveillance_scene(config.seed, &config.motions, config.warmup_frames, config.scene_frames);
            let out = generate_scene(&spec)?;
            let frames = dir.join("frames");
            write_scene_dir(&out, &frames)?;
            Ok(vec![frames])
        }
        DataKind::Shots => {
            let shots = shot_specs(config.seed, &config.motions, config.shot_frames, config.frame_size);
            let v = generate_shot_video(&shots, &shot_setup(config.seed, config.frame_size))?;
            let frames = dir.join("frames");
            write_frame_dir(&v.video, &frames)?;
            let file = ShotFile {
                fps: v.video.fps,
                frames: v.video.len(),
                boundaries: v.boundaries,
                labels: v.labels.iter().map(|m| m.name().to_string()).collect(),
            };
            let p = dir.join("shots.json");
            write_file(&p, serde_json::to_string_pretty(&file)? + "\n")?;
            Ok(vec![frames, p])
        }
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut out = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Packs `input/<label>/<clip>/<frames>` into one archive. Labels are the
/// class directory names in sorted order.
pub fn pack(config: &PipelineConfig) -> Result<PathBuf> {
    let root = config.require_input()?;
    let classes = sorted_subdirs(root)?;
    if classes.is_empty() {
        return Err(Error::Empty(format!("{} has no class directories", root.display())));
    }
    let labels: Vec<String> = classes.iter().map(|p| video_name(p)).collect();
    let mut archive = ClipArchive::new(labels);
    for (label, class) in classes.iter().enumerate() {
        for clip_dir in sorted_subdirs(class)? {
            if list_frames(&clip_dir)?.is_empty() {
                continue;
            }
            let clip = load_frame_dir(&clip_dir, config.fps)?;
            archive.push(label, clip.into_frames(), config.fps)?;
        }
    }
    if archive.is_empty() {
        return Err(Error::Empty(format!("no frame directories under {}", root.display())));
    }
    create_dir(&config.out_dir)?;
    let path = config.out_dir.join(PACKED_ARCHIVE);
    archive.write(&path)?;
    Ok(path)
}

/// Re-exports a summary JSON file as canonical JSON and SVG.
pub fn summarize(config: &PipelineConfig) -> Result<Summary> {
    let summary = Summary::read_json(config.require_input()?)?;
    create_dir(&config.out_dir)?;
    write_summary(&summary, &config.out_dir)?;
    Ok(summary)
}
