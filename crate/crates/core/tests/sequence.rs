use actsum_core::geometry::BBox;
use actsum_core::motion::Mask;
use actsum_core::sequence::{compute_mhi, crop_planar, extract_person_sequence, subsample_time, CropConfig, Region};
use actsum_core::track::TrackState;
use actsum_core::video::{subsample_indices, Clip};
use actsum_core::{Error, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_video(t: usize, c: usize, h: usize, w: usize, seed: u64) -> Clip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..t * c * h * w).map(|_| rng.gen::<f32>()).collect();
    Clip::new(Tensor::new(&[t, c, h, w], data).unwrap(), 25.0, "v", 0).unwrap()
}

fn random_masks(t: usize, h: usize, w: usize, seed: u64) -> Vec<Mask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..t).map(|_| Mask { height: h, width: w, data: (0..h * w).map(|_| rng.gen_bool(0.4)).collect() }).collect()
}

fn states(frames: std::ops::Range<usize>, b: BBox) -> Vec<TrackState> {
    frames.map(|f| TrackState { frame: f, bbox: b }).collect()
}

/// Single-channel clip from per-frame closures.
fn gray_clip(t: usize, h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f32) -> Clip {
    let data = (0..t * h * w).map(|i| f(i / (h * w), (i / w) % h, i % w)).collect();
    Clip::new(Tensor::new(&[t, 1, h, w], data).unwrap(), 25.0, "g", 0).unwrap()
}

#[test]
fn inside_crop_copies_source_pixels() {
    let v = random_video(1, 3, 20, 30, 1);
    let r = Region { x: 4, y: 3, side: 10 };
    let crop = crop_planar(v.frame(0), 3, 20, 30, r);
    for ch in 0..3 {
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(crop[(ch * 10 + i) * 10 + j], v.frame(0)[ch * 600 + (3 + i) * 30 + 4 + j]);
            }
        }
    }
}

#[test]
fn outside_part_of_crop_is_zero() {
    let v = random_video(1, 1, 20, 20, 2);
    let r = Region { x: -5, y: 2, side: 10 };
    let crop = crop_planar(v.frame(0), 1, 20, 20, r);
    for i in 0..10 {
        for j in 0..10 {
            let inside = j >= 5;
            assert_eq!(crop[i * 10 + j] != 0.0, inside, "({i},{j})");
        }
    }
}

#[test]
fn shapes_follow_the_contract() {
    let v = random_video(20, 3, 48, 64, 3);
    let masks = random_masks(20, 48, 64, 4);
    let seq = extract_person_sequence(&v, 7, &states(2..14, BBox::new(10.0, 5.0, 12.0, 24.0)), &masks, &CropConfig::default())
        .unwrap();
    assert_eq!(seq.rgb.frames().shape(), &[12, 3, 64, 64]);
    assert_eq!(seq.bs.frames().shape(), &[12, 3, 64, 64]);
    assert_eq!(seq.span, (2, 13));
    assert_eq!(seq.rgb.start, 2);
}

#[test]
fn short_tracks_are_refused() {
    let v = random_video(10, 1, 16, 16, 5);
    let masks = random_masks(10, 16, 16, 6);
    let err = extract_person_sequence(&v, 0, &states(0..3, BBox::new(2.0, 2.0, 6.0, 6.0)), &masks, &CropConfig::default())
        .unwrap_err();
    assert!(matches!(err, Error::InsufficientFrames { needed: 8, got: 3 }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bs_is_rgb_times_mask(seed in any::<u64>(), x in -10.0f64..30.0, y in -10.0f64..20.0, union in any::<bool>()) {
        let v = random_video(9, 3, 24, 32, seed);
        let masks = random_masks(9, 24, 32, seed ^ 1);
        let st: Vec<TrackState> = (0..9).map(|f| TrackState { frame: f, bbox: BBox::new(x + f as f64, y, 9.0, 14.0) }).collect();
        let cfg = CropConfig { size: 16, union, ..CropConfig::default() };
        let seq = extract_person_sequence(&v, 0, &st, &masks, &cfg).unwrap();
        let (rgb, bs) = (seq.rgb.frames().data(), seq.bs.frames().data());
        // Each pixel is either kept in every channel or zeroed in every one.
        for t in 0..9 {
            for k in 0..256 {
                let at = |ch: usize| t * 768 + ch * 256 + k;
                let kept = (0..3).all(|ch| bs[at(ch)] == rgb[at(ch)]);
                let zeroed = (0..3).all(|ch| bs[at(ch)] == 0.0);
                prop_assert!(kept || zeroed);
                prop_assert!((0..3).all(|ch| bs[at(ch)] <= rgb[at(ch)]));
            }
        }
    }

    #[test]
    fn mhi_ignores_brightness_offsets(seed in any::<u64>(), offset in 0.0f32..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f32> = (0..6 * 64).map(|_| rng.gen::<f32>() * 0.7).collect();
        let a = gray_clip(6, 8, 8, |t, y, x| base[t * 64 + y * 8 + x]);
        let b = gray_clip(6, 8, 8, |t, y, x| base[t * 64 + y * 8 + x] + offset);
        let (ma, mb) = (compute_mhi(&a, 4, 0.05).unwrap(), compute_mhi(&b, 4, 0.05).unwrap());
        // Float rounding of the shifted difference can only flip values
        // sitting on the threshold, so compare away from it.
        let near = (0..64).any(|i| (1..6).any(|t| ((base[t * 64 + i] - base[(t - 1) * 64 + i]).abs() - 0.05).abs() < 1e-5));
        prop_assume!(!near);
        prop_assert_eq!(ma.values, mb.values);
        prop_assert!(in_unit(&compute_mhi(&a, 3, 0.05).unwrap().values));
    }
}

fn in_unit(v: &[f32]) -> bool {
    v.iter().all(|x| (0.0..=1.0).contains(x))
}

#[test]
fn mhi_boundary_cases() {
    let moving_last = gray_clip(5, 2, 2, |t, _, x| if t == 4 && x == 0 { 1.0 } else { 0.0 });
    let m = compute_mhi(&moving_last, 3, 0.05).unwrap();
    assert_eq!(m.values, vec![1.0, 0.0, 1.0, 0.0]);

    // Motion only at frame T - tau (indices 0..T), never after.
    let (t_len, tau) = (10, 4);
    let early = gray_clip(t_len + 1, 1, 1, |t, _, _| if t >= t_len - tau { 1.0 } else { 0.0 });
    assert_eq!(compute_mhi(&early, tau, 0.05).unwrap().values, vec![0.0]);

    let still = gray_clip(8, 4, 4, |_, y, x| (y * 4 + x) as f32 / 16.0);
    assert!(compute_mhi(&still, 16, 0.05).unwrap().values.iter().all(|&v| v == 0.0));

    let one = gray_clip(1, 4, 4, |_, _, _| 0.5);
    assert!(matches!(compute_mhi(&one, 16, 0.05), Err(Error::InsufficientFrames { needed: 2, got: 1 })));
}

#[test]
fn translating_square_leaves_an_increasing_trail() {
    let (t_len, w, side) = (12, 32, 4);
    let clip = gray_clip(t_len, 8, w, |t, y, x| if (2..2 + side).contains(&y) && (t..t + side).contains(&x) { 1.0 } else { 0.0 });
    let tau = 16;
    let got = compute_mhi(&clip, tau, 0.05).unwrap();

    // Direct recursion oracle with repeated subtraction.
    let mut h = vec![0.0f64; 8 * w];
    for t in 1..t_len {
        for i in 0..8 * w {
            let d = (clip.frame(t)[i] - clip.frame(t - 1)[i]).abs();
            h[i] = if d > 0.05 { 1.0 } else { (h[i] - 1.0 / tau as f64).max(0.0) };
        }
    }
    for (g, o) in got.values.iter().zip(&h) {
        assert!((*g as f64 - o).abs() < 1e-6);
    }
    // Along the row through the square, the trail brightens toward the
    // direction of motion.
    let row = &got.values[3 * w..4 * w];
    let trail: Vec<f32> = row.iter().copied().take_while(|&v| v < 1.0).collect();
    assert!(trail.len() >= 8, "{row:?}");
    assert!(trail.windows(2).all(|p| p[0] < p[1]), "{trail:?}");
}

#[test]
fn subsampling_examples() {
    assert_eq!(subsample_indices(16, 16), (0..16).collect::<Vec<_>>());
    assert_eq!(subsample_indices(31, 16), (0..16).map(|i| 2 * i).collect::<Vec<_>>());
    let mut padded: Vec<usize> = (0..10).collect();
    padded.extend([9; 6]);
    assert_eq!(subsample_indices(10, 16), padded);

    let v = random_video(37, 3, 4, 4, 9);
    let s = subsample_time(&v, 16).unwrap();
    assert_eq!(s.frame(0), v.frame(0));
    assert_eq!(s.frame(15), v.frame(36));
}
