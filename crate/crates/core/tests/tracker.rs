use actsum_core::geometry::BBox;
use actsum_core::motion::{DetectorConfig, Gray, MotionDetector};
use actsum_core::track::{
    associate, gaussian_correlation, greedy_assign, Fft2, KcfConfig, KcfState, MultiTracker, TrackStatus, TrackerConfig,
};
use actsum_core::video::Clip;
use actsum_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: usize = 96;
const W: usize = 128;

fn background(x: usize, y: usize) -> f32 {
    0.4 + 0.1 * ((x as f32 / 7.0).sin() * (y as f32 / 5.0).cos())
}

/// Textured sprite; `kind` picks the appearance.
fn sprite_value(kind: usize, dx: usize, dy: usize) -> f32 {
    match kind {
        0 => {
            if (dy / 3) % 2 == 0 {
                0.9
            } else {
                0.7
            }
        }
        _ => {
            if (dx / 2 + dy / 4) % 2 == 0 {
                0.05
            } else {
                0.2
            }
        }
    }
}

/// Renders sprites given as `(kind, top-left x, top-left y, w, h)`.
fn render(sprites: &[(usize, f64, f64, usize, usize)]) -> Gray {
    let mut g = Gray::filled(H, W, 0.0);
    for y in 0..H {
        for x in 0..W {
            g.data[y * W + x] = background(x, y);
        }
    }
    for &(kind, sx, sy, sw, sh) in sprites {
        let (x0, y0) = (sx.round() as isize, sy.round() as isize);
        for dy in 0..sh {
            for dx in 0..sw {
                let (x, y) = (x0 + dx as isize, y0 + dy as isize);
                if x >= 0 && y >= 0 && (x as usize) < W && (y as usize) < H {
                    g.data[y as usize * W + x as usize] = sprite_value(kind, dx, dy);
                }
            }
        }
    }
    g
}

fn noise_frame(rng: &mut ChaCha8Rng) -> Gray {
    Gray { height: 64, width: 64, data: (0..64 * 64).map(|_| rng.gen::<f32>()).collect() }
}

#[test]
fn cyclic_shift_peaks_at_the_shift() {
    let p = 16;
    let fft = Fft2::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z: Vec<f64> = (0..p * p).map(|_| rng.gen::<f64>() - 0.5).collect();
    let (sy, sx) = (2, 3);
    let x: Vec<f64> = (0..p * p)
        .map(|i| {
            let (y, xx) = (i / p, i % p);
            z[((y + p - sy) % p) * p + (xx + p - sx) % p]
        })
        .collect();
    let k = gaussian_correlation(&x, &z, 0.2, &fft).unwrap();
    let best = (0..p * p).max_by(|&a, &b| k[a].total_cmp(&k[b])).unwrap();
    assert_eq!((best / p, best % p), (sy, sx));
    assert!((k[best] - 1.0).abs() < 1e-9);

    // Direct shifted-distance oracle for every offset.
    let n = (p * p) as f64;
    for s in 0..p * p {
        let (dy, dx) = (s / p, s % p);
        let d2: f64 = (0..p * p)
            .map(|i| {
                let (y, xx) = (i / p, i % p);
                let v = x[((y + dy) % p) * p + (xx + dx) % p] - z[i];
                v * v
            })
            .sum();
        assert!((k[s] - (-d2 / (0.04 * n)).exp()).abs() < 1e-9, "offset {s}");
    }
    assert!(gaussian_correlation(&x[1..], &z, 0.2, &fft).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn self_detection_is_centered(seed in any::<u64>(), x in 4.0f64..40.0, y in 4.0f64..40.0, w in 6.0f64..20.0, h in 6.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = noise_frame(&mut rng);
        let cfg = KcfConfig::default();
        let k = KcfState::init(&g, BBox::new(x, y, w, h), &cfg).unwrap();
        let (dx, dy, _) = k.detect(&g);
        let cell = (1.0 + cfg.padding) / cfg.patch as f64;
        prop_assert!(dx.abs() <= 0.5 * w * cell && dy.abs() <= 0.5 * h * cell, "moved {dx},{dy}");
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in (0.0f64..50.0, 0.0f64..50.0, 0.5f64..30.0, 0.5f64..30.0),
                                    b in (0.0f64..50.0, 0.0f64..50.0, 0.5f64..30.0, 0.5f64..30.0)) {
        let a = BBox::new(a.0, a.1, a.2, a.3);
        let b = BBox::new(b.0, b.1, b.2, b.3);
        let (ab, ba) = (a.iou(&b), b.iou(&a));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(a.iou(&a), 1.0);
        if a != b {
            prop_assert!(ab < 1.0);
        }
    }

    #[test]
    fn greedy_leaves_no_matchable_pair(boxes in prop::collection::vec((0.0f64..60.0, 0.0f64..60.0, 4.0f64..20.0, 4.0f64..20.0), 0..10), split in 0usize..10) {
        let boxes: Vec<BBox> = boxes.into_iter().map(|b| BBox::new(b.0, b.1, b.2, b.3)).collect();
        let split = split.min(boxes.len());
        let (tracks, dets) = boxes.split_at(split);
        let a = associate(tracks, dets, 0.3);
        let mut used_t = vec![false; tracks.len()];
        let mut used_d = vec![false; dets.len()];
        for &(i, j, iou) in &a.pairs {
            prop_assert!(iou >= 0.3);
            prop_assert!(!used_t[i] && !used_d[j]);
            used_t[i] = true;
            used_d[j] = true;
        }
        for &i in &a.unmatched_tracks {
            for &j in &a.unmatched_detections {
                prop_assert!(tracks[i].iou(&dets[j]) < 0.3);
            }
        }
        prop_assert_eq!(a.pairs.len() + a.unmatched_tracks.len(), tracks.len());
        prop_assert_eq!(a.pairs.len() + a.unmatched_detections.len(), dets.len());
    }
}

#[test]
fn crossed_scores_greedy_equals_brute_force() {
    let scores = vec![vec![0.8, 0.6], vec![0.2, 0.5]];
    let a = greedy_assign(&scores, 2, 0.3);
    let picked: Vec<f64> = a.pairs.iter().map(|p| p.2).collect();
    assert_eq!(picked, vec![0.8, 0.5]);
    let brute = [scores[0][0] + scores[1][1], scores[0][1] + scores[1][0]];
    let best = brute.iter().cloned().fold(f64::MIN, f64::max);
    assert!((picked.iter().sum::<f64>() - best).abs() < 1e-12);
}

#[test]
fn static_target_does_not_move() {
    let g = render(&[(0, 40.0, 30.0, 12, 24)]);
    let mut k = KcfState::init(&g, BBox::new(40.0, 30.0, 12.0, 24.0), &KcfConfig::default()).unwrap();
    for _ in 0..20 {
        let (b, _) = k.update(&g).unwrap();
        assert!((b.x - 40.0).abs() < 0.05 && (b.y - 30.0).abs() < 0.05, "{b:?}");
    }
}

#[test]
fn translating_sprite_is_followed_within_a_pixel() {
    let start = (30.0, 36.0);
    let g0 = render(&[(0, start.0, start.1, 12, 24)]);
    let mut k = KcfState::init(&g0, BBox::new(start.0, start.1, 12.0, 24.0), &KcfConfig::default()).unwrap();
    for t in 1..=30 {
        let truth = start.0 + t as f64;
        let g = render(&[(0, truth, start.1, 12, 24)]);
        let (b, _) = k.update(&g).unwrap();
        assert!((b.x - truth).abs() <= 1.0 && (b.y - start.1).abs() <= 1.0, "frame {t}: {b:?} vs x {truth}");
    }
}

#[test]
fn removed_target_loses_the_peak() {
    let cfg = TrackerConfig::default();
    let g = render(&[(1, 50.0, 30.0, 12, 24)]);
    let mut k = KcfState::init(&g, BBox::new(50.0, 30.0, 12.0, 24.0), &cfg.kcf).unwrap();
    for _ in 0..5 {
        k.update(&g).unwrap();
    }
    let (_, _, with) = k.detect(&g);
    assert!(with >= cfg.peak_threshold, "peak {with} with the target present");
    let empty = render(&[]);
    let dropped = (0..5).any(|_| k.update(&empty).map(|(_, peak)| peak < cfg.peak_threshold).unwrap_or(true));
    assert!(dropped);
}

#[test]
fn target_leaving_frame_is_lost() {
    let g = render(&[(0, 2.0, 30.0, 12, 24)]);
    let mut k = KcfState::init(&g, BBox::new(2.0, 30.0, 12.0, 24.0), &KcfConfig::default()).unwrap();
    k.bbox = BBox::new(-40.0, 30.0, 12.0, 24.0);
    assert!(matches!(k.update(&g), Err(actsum_core::Error::TargetLost)));
}

struct Scene {
    frames: Vec<Gray>,
    /// Ground-truth boxes per frame, one slot per person.
    truth: Vec<Vec<Option<BBox>>>,
}

/// Two people walking toward each other on nearly the same line, after a
/// clean warm-up.
fn crossing_scene(a_in_front: bool) -> Scene {
    let warmup = 25;
    let walk = 70;
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..warmup {
        frames.push(render(&[]));
        truth.push(vec![None, None]);
    }
    for t in 0..walk {
        let a = (0, 10.0 + 1.5 * t as f64, 34.0, 12, 24);
        let b = (1, 104.0 - 1.25 * t as f64, 40.0, 12, 24);
        frames.push(render(&if a_in_front { [b, a] } else { [a, b] }));
        let gt = |s: (usize, f64, f64, usize, usize)| Some(BBox::new(s.1.round(), s.2, s.3 as f64, s.4 as f64));
        truth.push(vec![gt(a), gt(b)]);
    }
    Scene { frames, truth }
}

fn clip_of(frames: &[Gray]) -> Clip {
    let data: Vec<f32> = frames.iter().flat_map(|g| g.data.iter().copied()).collect();
    Clip::new(Tensor::new(&[frames.len(), 1, H, W], data).unwrap(), 10.0, "scene", 0).unwrap()
}

#[test]
fn crossing_people_keep_their_identities() {
    check_crossing(true);
    check_crossing(false);
}

fn check_crossing(a_in_front: bool) {
    let scene = crossing_scene(a_in_front);
    let (_, dets) = MotionDetector::run(DetectorConfig::default(), &clip_of(&scene.frames)).unwrap();
    let tracks = MultiTracker::run(TrackerConfig::default(), &scene.frames, &dets).unwrap();

    let mut ids: Vec<usize> = tracks.iter().map(|t| t.id).collect();
    ids.dedup();
    assert_eq!(ids.len(), tracks.len(), "ids are unique");
    for t in &tracks {
        assert!(t.states.windows(2).all(|w| w[0].frame < w[1].frame));
    }

    // Each state's identity is the best-overlapping person.
    let mut switches = 0;
    let mut covered = [0usize; 2];
    let mut owner: [Option<usize>; 2] = [None, None];
    for t in &tracks {
        let mut prev = None;
        for s in &t.states {
            let best = scene.truth[s.frame]
                .iter()
                .enumerate()
                .filter_map(|(p, b)| b.map(|b| (p, b.iou(&s.bbox))))
                .filter(|&(_, iou)| iou >= 0.3)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(p, _)| p);
            if let Some(p) = best {
                if prev.is_some_and(|q| q != p) {
                    switches += 1;
                }
                prev = Some(p);
                covered[p] += 1;
                if owner[p].is_some_and(|o| o != t.id) {
                    switches += 1;
                }
                owner[p] = Some(t.id);
            }
        }
    }
    assert_eq!(switches, 0, "tracks: {:?}", tracks.iter().map(|t| (t.id, t.span())).collect::<Vec<_>>());
    let visible = scene.truth.iter().filter(|f| f[0].is_some()).count();
    for c in covered {
        assert!(c as f64 >= 0.8 * visible as f64, "covered {covered:?} of {visible}");
    }
    assert!(tracks.iter().all(|t| t.status != TrackStatus::Closed || t.misses > 10));
}
