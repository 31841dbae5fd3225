//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any gating criterion fails.
//!
//! The ablation trains four compact networks on 1800 synthetic clips, so a
//! full run takes on the order of fifteen minutes on one core.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use actsum_core::geometry::BBox;
use actsum_core::model::{network_grad_check, tiny_spec, Checkpoint, Network};
use actsum_core::motion::{DetectorConfig, Gray, MotionDetector};
use actsum_core::pipeline::{
    gen_data, network_spec, run_classify, run_surveillance, run_train, PipelineConfig, Preset, Variant,
};
use actsum_core::summary::SubjectKind;
use actsum_core::tensor::gradcheck::{grad_check, GradCheckOp};
use actsum_core::tensor::{conv_forward, prelu_forward, ConvParams, PReluParams};
use actsum_core::track::{KcfConfig, KcfState, MultiTracker, TrackerConfig};
use actsum_core::video::{Clip, ClipArchive};
use actsum_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn config(out: &Path, pairs: &[(&str, String)]) -> PipelineConfig {
    let mut overrides = vec![("out_dir".to_string(), out.display().to_string())];
    overrides.extend(pairs.iter().map(|(k, v)| (k.to_string(), v.clone())));
    PipelineConfig::resolve(None, &overrides).expect("valid acceptance config")
}

// ---------------------------------------------------------------- numeric core

/// Nested-loop convolution over `[n, c, d, h, w]` with zero padding.
fn loop_conv(
    x: &[f64],
    xs: [usize; 5],
    k: &[f64],
    ks: [usize; 5],
    bias: &[f64],
    stride: [usize; 3],
    pad: [usize; 3],
) -> Vec<f64> {
    let [n, c, d, h, w] = xs;
    let [o, _, kd, kh, kw] = ks;
    let out_len = |i: usize, k: usize, s: usize, p: usize| (i + 2 * p - k) / s + 1;
    let (od, oh, ow) = (out_len(d, kd, stride[0], pad[0]), out_len(h, kh, stride[1], pad[1]), out_len(w, kw, stride[2], pad[2]));
    let mut out = Vec::with_capacity(n * o * od * oh * ow);
    for b in 0..n {
        for f in 0..o {
            for z in 0..od {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = bias[f];
                        for ch in 0..c {
                            for a in 0..kd {
                                for r in 0..kh {
                                    for q in 0..kw {
                                        let iz = (z * stride[0] + a) as isize - pad[0] as isize;
                                        let iy = (y * stride[1] + r) as isize - pad[1] as isize;
                                        let ix = (xx * stride[2] + q) as isize - pad[2] as isize;
                                        if iz < 0 || iy < 0 || ix < 0 || iz >= d as isize || iy >= h as isize || ix >= w as isize {
                                            continue;
                                        }
                                        let xi = (((b * c + ch) * d + iz as usize) * h + iy as usize) * w + ix as usize;
                                        let ki = (((f * c + ch) * kd + a) * kh + r) * kw + q;
                                        acc += x[xi] * k[ki];
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
    }
    out
}

/// One random conv case; returns the worst error against the loop, relative
/// to `max(|want|, 1)`.
fn conv_case(seed: u64, three_d: bool) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c, o) = (rng.gen_range(1..=2), rng.gen_range(1..=4), rng.gen_range(1..=4));
    let kd = if three_d { rng.gen_range(1..=3) } else { 1 };
    let (kh, kw) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let stride = [if three_d { rng.gen_range(1..=2) } else { 1 }, rng.gen_range(1..=2), rng.gen_range(1..=2)];
    let pad = [if three_d { rng.gen_range(0..=1) } else { 0 }, rng.gen_range(0..=1), rng.gen_range(0..=1)];
    let d = if three_d { rng.gen_range(kd..kd + 5) } else { 1 };
    let (h, w) = (rng.gen_range(kh..kh + 6), rng.gen_range(kw..kw + 6));
    let x: Vec<f64> = (0..n * c * d * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let k: Vec<f64> = (0..o * c * kd * kh * kw).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bias: Vec<f64> = (0..o).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let want = loop_conv(&x, [n, c, d, h, w], &k, [o, c, kd, kh, kw], &bias, stride, pad);

    let (x_shape, k_shape) =
        if three_d { (vec![n, c, d, h, w], vec![o, c, kd, kh, kw]) } else { (vec![n, c, h, w], vec![o, c, kh, kw]) };
    let params = ConvParams::new(
        Tensor::new(&k_shape, k).map_err(|e| e.to_string())?,
        Tensor::new(&[o], bias).map_err(|e| e.to_string())?,
        stride,
        pad,
    )
    .map_err(|e| e.to_string())?;
    let got = conv_forward(&Tensor::new(&x_shape, x).map_err(|e| e.to_string())?, &params).map_err(|e| e.to_string())?;
    if got.len() != want.len() {
        return Err(format!("seed {seed}: {} outputs, loop gives {}", got.len(), want.len()));
    }
    Ok(got.data().iter().zip(&want).map(|(g, w)| (g - w).abs() / w.abs().max(1.0)).fold(0.0, f64::max))
}

fn numeric_core() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let cases = 120;
    for seed in 0..cases {
        worst = worst.max(conv_case(seed, seed % 2 == 1)?);
    }
    ensure(worst <= 1e-6, format!("conv vs loop oracle: worst rel err {worst:e}"))?;

    let ops = [
        GradCheckOp::Conv { input: vec![2, 2, 4, 5, 5], kernel: vec![3, 2, 3, 3, 3], stride: [1; 3], padding: [1; 3] },
        GradCheckOp::Conv { input: vec![1, 3, 5, 6, 7], kernel: vec![2, 3, 2, 3, 2], stride: [2, 1, 2], padding: [0, 1, 1] },
        GradCheckOp::Conv { input: vec![2, 3, 7, 6], kernel: vec![4, 3, 3, 3], stride: [1, 2, 1], padding: [0, 1, 0] },
        GradCheckOp::MaxPool { input: vec![2, 3, 4, 6, 6], window: [2, 2, 2], stride: [2, 2, 2] },
        GradCheckOp::MaxPool { input: vec![1, 2, 7, 7], window: [1, 3, 3], stride: [1, 2, 2] },
        GradCheckOp::PRelu { input: vec![2, 3, 2, 4, 4] },
        GradCheckOp::Linear { batch: 4, inputs: 9, outputs: 5 },
        GradCheckOp::SoftmaxCrossEntropy { batch: 5, classes: 6 },
    ];
    let mut op_worst: f64 = 0.0;
    for op in &ops {
        for seed in 0..3 {
            let e = grad_check(op, seed);
            ensure(e < 1e-5, format!("{op:?} seed {seed}: rel err {e:e}"))?;
            op_worst = op_worst.max(e);
        }
    }
    let mut net_worst: f64 = 0.0;
    for skip in [true, false] {
        let e = network_grad_check(&tiny_spec(skip), 5, 6).map_err(|e| e.to_string())?;
        ensure(e < 1e-4, format!("tiny network (skips {skip}): rel err {e:e}"))?;
        net_worst = net_worst.max(e);
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(300), format!("numeric checks took {took:?}"))?;
    Ok(format!(
        "{cases} conv cases worst {worst:.1e}; ops worst {op_worst:.1e}; network {net_worst:.1e}; {:.1}s",
        took.as_secs_f64()
    ))
}

fn prelu_limits() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for case in 0..50 {
        let c = rng.gen_range(1..=4);
        let shape = if case % 2 == 0 { vec![2, c, 3, 5, 5] } else { vec![3, c, 7] };
        let x = Tensor::<f64>::randn(&shape, 2.0, &mut rng);
        let relu = prelu_forward(&x, &PReluParams::with_slope(c, 0.0)).map_err(|e| e.to_string())?;
        let ident = prelu_forward(&x, &PReluParams::with_slope(c, 1.0)).map_err(|e| e.to_string())?;
        for ((&v, &r), &i) in x.data().iter().zip(relu.data()).zip(ident.data()) {
            ensure(r == v.max(0.0), format!("a=0 gives {r} at {v}"))?;
            ensure(i == v, format!("a=1 gives {i} at {v}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} points exact"))
}

// ---------------------------------------------------------------- tracker

const H: usize = 96;
const W: usize = 128;

fn backdrop(x: usize, y: usize) -> f32 {
    0.4 + 0.1 * ((x as f32 / 7.0).sin() * (y as f32 / 5.0).cos())
}

fn sprite_value(kind: usize, dx: usize, dy: usize) -> f32 {
    match (kind, (dy / 3) % 2 == 0, (dx / 2 + dy / 4) % 2 == 0) {
        (0, true, _) => 0.9,
        (0, false, _) => 0.7,
        (_, _, true) => 0.05,
        _ => 0.2,
    }
}

/// Sprites are `(kind, left, top, w, h)`.
fn render(sprites: &[(usize, f64, f64, usize, usize)]) -> Gray {
    let mut g = Gray { height: H, width: W, data: (0..H * W).map(|i| backdrop(i % W, i / W)).collect() };
    for &(kind, sx, sy, sw, sh) in sprites {
        let (x0, y0) = (sx.round() as isize, sy.round() as isize);
        for dy in 0..sh {
            for dx in 0..sw {
                let (x, y) = (x0 + dx as isize, y0 + dy as isize);
                if (0..W as isize).contains(&x) && (0..H as isize).contains(&y) {
                    g.data[y as usize * W + x as usize] = sprite_value(kind, dx, dy);
                }
            }
        }
    }
    g
}

fn crossing_switches(a_in_front: bool) -> Result<usize, String> {
    let mut frames = Vec::new();
    let mut truth: Vec<[Option<BBox>; 2]> = Vec::new();
    for _ in 0..25 {
        frames.push(render(&[]));
        truth.push([None, None]);
    }
    for t in 0..70 {
        let a = (0, 10.0 + 1.5 * t as f64, 34.0, 12, 24);
        let b = (1, 104.0 - 1.25 * t as f64, 40.0, 12, 24);
        frames.push(render(&if a_in_front { [b, a] } else { [a, b] }));
        let gt = |s: (usize, f64, f64, usize, usize)| Some(BBox::new(s.1.round(), s.2, s.3 as f64, s.4 as f64));
        truth.push([gt(a), gt(b)]);
    }
    let data: Vec<f32> = frames.iter().flat_map(|g| g.data.iter().copied()).collect();
    let clip = Clip::new(Tensor::new(&[frames.len(), 1, H, W], data).unwrap(), 10.0, "crossing", 0).unwrap();
    let (_, dets) = MotionDetector::run(DetectorConfig::default(), &clip).map_err(|e| e.to_string())?;
    let tracks = MultiTracker::run(TrackerConfig::default(), &frames, &dets).map_err(|e| e.to_string())?;

    // A switch is a track changing person, or a person changing track.
    let mut switches = 0;
    let mut owner: [Option<usize>; 2] = [None, None];
    let mut covered = [0usize; 2];
    for t in &tracks {
        let mut prev = None;
        for s in &t.states {
            let best = truth[s.frame]
                .iter()
                .enumerate()
                .filter_map(|(p, b)| b.map(|b| (p, b.iou(&s.bbox))))
                .filter(|&(_, iou)| iou >= 0.3)
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .map(|(p, _)| p);
            if let Some(p) = best {
                switches += usize::from(prev.is_some_and(|q| q != p));
                switches += usize::from(owner[p].is_some_and(|o| o != t.id));
                prev = Some(p);
                owner[p] = Some(t.id);
                covered[p] += 1;
            }
        }
    }
    ensure(covered.iter().all(|&c| c >= 56), format!("people tracked in only {covered:?} of 70 frames"))?;
    Ok(switches)
}

fn tracker() -> Check {
    let cfg = KcfConfig::default();
    let centre = (cfg.patch / 2, cfg.patch / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..100 {
        let g = Gray { height: 64, width: 64, data: (0..64 * 64).map(|_| rng.gen::<f32>()).collect() };
        let b = BBox::new(rng.gen_range(4.0..40.0), rng.gen_range(4.0..40.0), rng.gen_range(6.0..20.0), rng.gen_range(6.0..20.0));
        let k = KcfState::init(&g, b, &cfg).map_err(|e| e.to_string())?;
        let r = k.response(&g);
        let best = (0..r.len()).max_by(|&i, &j| r[i].total_cmp(&r[j])).unwrap();
        ensure((best / cfg.patch, best % cfg.patch) == centre, format!("patch {case}: peak at cell {best}, not at zero shift"))?;
    }

    let start = (30.0, 36.0);
    let mut k = KcfState::init(&render(&[(0, start.0, start.1, 12, 24)]), BBox::new(start.0, start.1, 12.0, 24.0), &cfg)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in 1..=30 {
        let x = start.0 + t as f64;
        let (b, _) = k.update(&render(&[(0, x, start.1, 12, 24)])).map_err(|e| format!("frame {t}: {e}"))?;
        worst = worst.max((b.x - x).abs().max((b.y - start.1).abs()));
    }
    ensure(worst <= 1.0, format!("translation error up to {worst:.3} px"))?;

    let switches = crossing_switches(true)? + crossing_switches(false)?;
    ensure(switches == 0, format!("{switches} identity switches while crossing"))?;
    Ok(format!("100 patches peak at zero shift; translation error <= {worst:.3} px; 0 switches in both crossing orders"))
}

// ---------------------------------------------------------------- learning

struct Trained {
    data: PathBuf,
    checkpoints: BTreeMap<&'static str, PathBuf>,
    accuracy: BTreeMap<&'static str, f64>,
    ablation_time: Duration,
}

fn train_variant(work: &Path, data: &Path, v: Variant) -> Result<(PathBuf, f64), String> {
    let archive = data.join(format!("{v}.a3dc")).display().to_string();
    let c = config(
        &work.join(format!("train-{v}")),
        &[
            ("input", archive),
            ("variant", v.name().into()),
            ("split", "80".into()),
            ("lr", "0.001".into()),
            ("batch_size", "64".into()),
            ("epochs", "100".into()),
            ("target_accuracy", "0.97".into()),
            ("keep_best", "true".into()),
        ],
    );
    let out = run_train(&c).map_err(|e| format!("{v}: {e}"))?;
    let test = out.test.ok_or_else(|| format!("{v}: empty test split"))?;
    eprintln!("  {v}: {} epochs, test accuracy {:.4}", out.report.history.len(), test.accuracy);
    Ok((out.checkpoint, test.accuracy))
}

fn train_all(work: &Path) -> Result<Trained, String> {
    let data = work.join("actions");
    gen_data(&config(&data, &[("clips_per_class", "300".into())])).map_err(|e| e.to_string())?;
    let mut trained =
        Trained { data, checkpoints: BTreeMap::new(), accuracy: BTreeMap::new(), ablation_time: Duration::ZERO };
    let start = Instant::now();
    for v in [Variant::Rgb, Variant::Bs, Variant::Mhi] {
        let (ck, acc) = train_variant(work, &trained.data, v)?;
        trained.checkpoints.insert(v.name(), ck);
        trained.accuracy.insert(v.name(), acc);
    }
    trained.ablation_time = start.elapsed();
    let (ck, acc) = train_variant(work, &trained.data, Variant::Frames)?;
    trained.checkpoints.insert("frames", ck);
    trained.accuracy.insert("frames", acc);
    Ok(trained)
}

fn ablation(t: &Trained) -> Check {
    let acc = |v: &str| t.accuracy[v];
    let line = format!(
        "rgb {:.4}, bs {:.4}, mhi {:.4}; {:.1} min",
        acc("rgb"),
        acc("bs"),
        acc("mhi"),
        t.ablation_time.as_secs_f64() / 60.0
    );
    for v in ["rgb", "bs", "mhi"] {
        ensure(acc(v) >= 0.90, format!("{line}: {v} below 0.90"))?;
    }
    ensure(t.ablation_time <= Duration::from_secs(3600), format!("{line}: over an hour"))?;
    Ok(line)
}

fn ordering(t: &Trained) -> (bool, String) {
    let (rgb, bs, mhi) = (t.accuracy["rgb"], t.accuracy["bs"], t.accuracy["mhi"]);
    (rgb <= bs && rgb <= mhi, format!("rgb <= bs: {}, rgb <= mhi: {}", rgb <= bs, rgb <= mhi))
}

/// Per frame, `(id, box, action)` from the scene's truth file.
fn read_truth(path: &Path) -> Result<Vec<Vec<(usize, BBox, String)>>, String> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let frames = v["objects"].as_array().ok_or("truth file has no objects")?;
    Ok(frames
        .iter()
        .map(|f| {
            f.as_array()
                .into_iter()
                .flatten()
                .map(|o| {
                    let b = &o["bbox"];
                    let n = |k: &str| b[k].as_f64().unwrap_or(f64::NAN);
                    (o["id"].as_u64().unwrap_or(0) as usize, BBox::new(n("x"), n("y"), n("w"), n("h")), o["action"].as_str().unwrap_or("").to_string())
                })
                .collect()
        })
        .collect())
}

fn surveillance(work: &Path, t: &Trained) -> Check {
    let scene = work.join("scene");
    let motions = "translate,oscillate-arms,spin";
    gen_data(&config(&scene, &[("data_kind", "scene".into()), ("seed", "0".into()), ("motions", motions.into())]))
        .map_err(|e| e.to_string())?;
    let frames = scene.join("frames");
    let out = run_surveillance(&config(
        &work.join("recognize"),
        &[("input", frames.display().to_string()), ("checkpoint", t.checkpoints["mhi"].display().to_string())],
    ))
    .map_err(|e| e.to_string())?;
    let truth = read_truth(&frames.join("truth.json"))?;
    let actors: BTreeMap<usize, String> =
        truth.iter().flatten().map(|(id, _, action)| (*id, action.clone())).collect();

    let people: Vec<_> = out.summary.subjects.iter().filter(|s| s.kind == SubjectKind::Person).collect();
    ensure(people.len() == actors.len(), format!("{} people reported, {} in the scene", people.len(), actors.len()))?;
    let mut matched = BTreeMap::new();
    let mut correct = 0;
    let mut report = Vec::new();
    for s in &people {
        let track = out.tracks.iter().find(|t| t.id == s.id).ok_or(format!("no track for subject {}", s.id))?;
        // The actor this track overlaps most, averaged over its frames.
        let (actor, mean_iou) = actors
            .keys()
            .map(|&a| {
                let total: f64 = track
                    .states
                    .iter()
                    .map(|st| truth[st.frame].iter().find(|o| o.0 == a).map_or(0.0, |o| o.1.iou(&st.bbox)))
                    .sum();
                (a, total / track.states.len() as f64)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .ok_or("scene has no actors")?;
        ensure(mean_iou >= 0.3, format!("subject {} overlaps no actor (mean IoU {mean_iou:.2})", s.id))?;
        if let Some(other) = matched.insert(actor, s.id) {
            return Err(format!("subjects {other} and {} both follow actor {actor}", s.id));
        }
        let got = s.dominant_action().unwrap_or("-");
        correct += usize::from(got == actors[&actor]);
        report.push(format!("{}={got}", actors[&actor]));
    }
    ensure(correct >= 2, format!("dominant action right for {correct} of 3: {}", report.join(" ")))?;
    Ok(format!("{} people; dominant action right for {correct} of 3 ({})", people.len(), report.join(" ")))
}

fn classification(work: &Path, t: &Trained) -> Check {
    let shots = work.join("shots");
    gen_data(&config(&shots, &[("data_kind", "shots".into()), ("seed", "0".into()), ("motions", "spin,bounce,translate".into())]))
        .map_err(|e| e.to_string())?;
    let truth: Value = serde_json::from_str(&fs::read_to_string(shots.join("shots.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let cuts: Vec<usize> = truth["boundaries"].as_array().ok_or("no boundaries")?.iter().filter_map(|b| b.as_u64()).map(|b| b as usize).collect();
    let labels: Vec<&str> = truth["labels"].as_array().ok_or("no labels")?.iter().filter_map(|l| l.as_str()).collect();

    let s = run_classify(&config(
        &work.join("classify"),
        &[
            ("input", shots.join("frames").display().to_string()),
            ("checkpoint", t.checkpoints["frames"].display().to_string()),
        ],
    ))
    .map_err(|e| e.to_string())?;
    let events: Vec<_> = s.subjects.iter().flat_map(|s| s.events.iter()).collect();
    let found: Vec<String> = events.iter().map(|e| format!("{} [{}, {})", e.action, e.start, e.end)).collect();
    ensure(events.len() == 3, format!("{} events: {found:?}", events.len()))?;
    for (k, &cut) in cuts.iter().enumerate() {
        let start = events[k + 1].start;
        ensure(start.abs_diff(cut) <= 2, format!("cut at {cut} reported at {start}"))?;
    }
    for (e, want) in events.iter().zip(&labels) {
        ensure(e.action == *want, format!("shot labelled {} but shows {want}: {found:?}", e.action))?;
    }
    Ok(format!("{}", found.join(", ")))
}

// ---------------------------------------------------------------- determinism

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_actsum")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("actsum {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// Every CLI command once, rooted at `root`.
fn cli_session(root: &Path) -> Result<(), String> {
    let p = |rel: &str| root.join(rel).display().to_string();
    let conf = root.join("run.conf");
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    fs::write(&conf, "seed = 7\nclips_per_class = 8\nscene_frames = 60\n").map_err(|e| e.to_string())?;
    let c = conf.display().to_string();
    cli(&["gen-data", "-c", &c, "--kind", "actions", "--out-dir", &p("actions")])?;
    cli(&["gen-data", "-c", &c, "--kind", "scene", "--out-dir", &p("scene")])?;
    cli(&["gen-data", "-c", &c, "--kind", "shots", "--set", "motions=still,spin", "--out-dir", &p("shots")])?;
    cli(&["train", "-c", &c, "--variant", "mhi", "--epochs", "2", "--input", &p("actions/mhi.a3dc"), "--out-dir", &p("train-mhi")])?;
    cli(&["train", "-c", &c, "--variant", "frames", "--epochs", "1", "--input", &p("actions/frames.a3dc"), "--out-dir", &p("train-frames")])?;
    cli(&["eval", "-c", &c, "--checkpoint", &p("train-mhi/model.a3dw"), "--input", &p("actions/mhi.a3dc"), "--out-dir", &p("eval")])?;
    cli(&["recognize", "-c", &c, "--checkpoint", &p("train-mhi/model.a3dw"), "--input", &p("scene/frames"), "--out-dir", &p("recognize")])?;
    cli(&["classify", "-c", &c, "--checkpoint", &p("train-frames/model.a3dw"), "--input", &p("shots/frames"), "--out-dir", &p("classify")])?;
    cli(&["summarize", "-c", &c, "--input", &p("recognize/summary.json"), "--out-dir", &p("summarize")])
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(work: &Path) -> Check {
    let (a, b) = (work.join("cli-a"), work.join("cli-b"));
    cli_session(&a)?;
    cli_session(&b)?;
    let files = files_under(&a);
    ensure(files == files_under(&b), "the two runs wrote different file sets")?;
    let mut text = 0;
    for f in &files {
        ensure(fs::read(a.join(f)).ok() == fs::read(b.join(f)).ok(), format!("{} differs between runs", f.display()))?;
        let ext = f.extension().and_then(|e| e.to_str()).unwrap_or("");
        text += usize::from(matches!(ext, "json" | "jsonl" | "csv" | "svg"));
    }
    ensure(text >= 10, format!("only {text} JSON/CSV/SVG outputs compared"))?;
    Ok(format!("{} files identical across two runs, {text} of them JSON/CSV/SVG", files.len()))
}

// ---------------------------------------------------------------- formats

fn roundtrips(work: &Path, t: &Trained) -> Check {
    let mut clips = 0;
    for v in Variant::ALL {
        let src = t.data.join(format!("{v}.a3dc"));
        let a = ClipArchive::read(&src).map_err(|e| e.to_string())?;
        let copy = work.join(format!("copy-{v}.a3dc"));
        a.write(&copy).map_err(|e| e.to_string())?;
        ensure(fs::read(&src).ok() == fs::read(&copy).ok(), format!("{v}: rewritten archive bytes differ"))?;
        let b = ClipArchive::read(&copy).map_err(|e| e.to_string())?;
        ensure(a.labels == b.labels && a.records.len() == b.records.len(), format!("{v}: header changed"))?;
        for (x, y) in a.records.iter().zip(&b.records) {
            let same = x.label == y.label
                && x.fps.to_bits() == y.fps.to_bits()
                && x.frames.shape() == y.frames.shape()
                && x.frames.data().iter().zip(y.frames.data()).all(|(p, q)| p.to_bits() == q.to_bits());
            ensure(same, format!("{v}: a record changed"))?;
        }
        clips += a.len();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut nets = 0;
    for (variant, path) in &t.checkpoints {
        let ck = Checkpoint::load(path).map_err(|e| e.to_string())?;
        let copy = work.join(format!("copy-{variant}.a3dw"));
        ck.save(&copy).map_err(|e| e.to_string())?;
        ensure(fs::read(path).ok() == fs::read(&copy).ok(), format!("{variant}: rewritten checkpoint bytes differ"))?;
        let back = Checkpoint::load(&copy).map_err(|e| e.to_string())?;
        ensure(back == ck, format!("{variant}: checkpoint fields changed"))?;
        let (n1, n2) = (ck.network().map_err(|e| e.to_string())?, back.network().map_err(|e| e.to_string())?);
        let s = n1.spec();
        let shape = if s.frames > 1 { vec![3, s.in_channels, s.frames, s.height, s.width] } else { vec![3, s.in_channels, s.height, s.width] };
        let x = Tensor::<f32>::uniform(&shape, 0.0, 1.0, &mut rng);
        let (y1, y2) = (n1.forward(&x).map_err(|e| e.to_string())?, n2.forward(&x).map_err(|e| e.to_string())?);
        ensure(y1.data().iter().zip(y2.data()).all(|(p, q)| p.to_bits() == q.to_bits()), format!("{variant}: logits differ"))?;
        nets += 1;
    }

    // A network that never touched disk against its saved copy.
    let spec = network_spec(Preset::Compact, Variant::Rgb, 3, 6);
    let net = Network::new(&spec, 99).map_err(|e| e.to_string())?;
    let path = work.join("fresh.a3dw");
    Checkpoint::from_network(&net, 0, actsum_core::synth::Motion::labels(), "rgb").save(&path).map_err(|e| e.to_string())?;
    let loaded = Checkpoint::load_for(&path, &spec).and_then(|c| c.network()).map_err(|e| e.to_string())?;
    let x = Tensor::<f32>::uniform(&[2, 3, spec.frames, spec.height, spec.width], 0.0, 1.0, &mut rng);
    let same = net.forward(&x).map_err(|e| e.to_string())?.data().iter().zip(loaded.forward(&x).map_err(|e| e.to_string())?.data())
        .all(|(p, q)| p.to_bits() == q.to_bits());
    ensure(same, "fresh network: logits differ after save/load")?;
    Ok(format!("{clips} clips and {} checkpoints bitwise identical", nets + 1))
}

// ---------------------------------------------------------------- driver

fn run<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let work = tmp.path();
    let start = Instant::now();
    let mut results: Vec<(&str, Check)> = Vec::new();

    results.push(("numeric core", run(numeric_core)));
    results.push(("prelu limits", run(prelu_limits)));
    results.push(("tracker", run(tracker)));
    eprintln!("training rgb, bs, mhi and frames networks");
    let trained = run(|| train_all(work)).map_err(|e| format!("training failed: {e}"));
    let with = |f: &dyn Fn(&Trained) -> Check| match &trained {
        Ok(t) => run(|| f(t)),
        Err(e) => Err(e.clone()),
    };
    results.push(("input ablation", with(&ablation)));
    let order = trained.as_ref().ok().map(ordering);
    results.push(("surveillance", with(&|t| surveillance(work, t))));
    results.push(("classification", with(&|t| classification(work, t))));
    results.push(("determinism", run(|| determinism(work))));
    results.push(("format roundtrips", with(&|t| roundtrips(work, t))));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name:<18} {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<18} {detail}");
            }
        }
    }
    match order {
        Some((true, d)) => println!("HOLDS {:<18} {d} (reported, not gating)", "input ordering"),
        Some((false, d)) => println!("MISS  {:<18} {d} (reported, not gating)", "input ordering"),
        None => println!("MISS  {:<18} no trained models (reported, not gating)", "input ordering"),
    }
    println!("{} of {} criteria pass in {:.1} min", results.len() - failed, results.len(), start.elapsed().as_secs_f64() / 60.0);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
