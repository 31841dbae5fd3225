use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The synthetic action classes, in label order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Motion {
    Translate,
    OscillateArms,
    Bounce,
    Expand,
    Spin,
    Still,
}

impl Motion {
    pub const ALL: [Motion; 6] =
        [Motion::Translate, Motion::OscillateArms, Motion::Bounce, Motion::Expand, Motion::Spin, Motion::Still];

    pub fn index(self) -> usize {
        Motion::ALL.iter().position(|&m| m == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Motion::Translate => "translate",
            Motion::OscillateArms => "oscillate-arms",
            Motion::Bounce => "bounce",
            Motion::Expand => "expand",
            Motion::Spin => "spin",
            Motion::Still => "still",
        }
    }

    pub fn labels() -> Vec<String> {
        Motion::ALL.iter().map(|m| m.name().to_string()).collect()
    }
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Motion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Motion::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown motion '{s}'; expected one of {}", Motion::labels().join(", "))))
    }
}

/// Peak relative growth of an expanding sprite.
pub const EXPAND_AMPLITUDE: f64 = 0.35;
/// Bounce height as a fraction of the body height.
pub const BOUNCE_HEIGHT: f64 = 0.35;
/// Peak arm swing, radians from horizontal.
pub const ARM_SWING: f64 = PI / 3.0;

/// A textured rectangular body with two arms, moving in one pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    pub width: f64,
    pub height: f64,
    pub texture_seed: u64,
    pub motion: Motion,
    /// Pixels per frame for translation.
    pub speed: f64,
    /// +1 or -1: direction of travel or rotation.
    pub direction: f64,
    /// Frames per cycle of periodic patterns.
    pub period: f64,
    pub phase: f64,
    /// Body center at frame 0.
    pub start: (f64, f64),
    /// Horizontal range of the center; translation reflects at its ends.
    pub bounds: Option<(f64, f64)>,
    /// Resting arm angle, radians (negative points down).
    pub arm_rest: f64,
}

/// Where a sprite is and how it is deformed at one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub center: (f64, f64),
    pub angle: f64,
    pub scale: f64,
    pub arm: f64,
}

impl SpriteSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width >= 2.0 && self.height >= 2.0) {
            return Err(Error::Config(format!("sprite body {}x{} is too small", self.width, self.height)));
        }
        if !(self.period > 0.0) || !self.speed.is_finite() || self.speed < 0.0 {
            return Err(Error::Config("sprite period must be positive and speed non-negative".into()));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(hi > lo) {
                return Err(Error::Config(format!("sprite bounds {lo}..{hi} are empty")));
            }
        }
        Ok(())
    }

    fn cycle(&self, t: f64) -> f64 {
        2.0 * PI * t / self.period + self.phase
    }

    pub fn arm_length(&self) -> f64 {
        0.4 * self.width + 1.0
    }

    pub fn pose(&self, t: usize) -> Pose {
        let tf = t as f64;
        let (mut cx, mut cy) = self.start;
        let mut pose = Pose { center: (cx, cy), angle: 0.0, scale: 1.0, arm: self.arm_rest };
        match self.motion {
            Motion::Translate => {
                cx += self.direction * self.speed * tf;
                if let Some((lo, hi)) = self.bounds {
                    let span = hi - lo;
                    let u = (cx - lo).rem_euclid(2.0 * span);
                    cx = lo + if u > span { 2.0 * span - u } else { u };
                }
            }
            Motion::OscillateArms => pose.arm = ARM_SWING * self.cycle(tf).sin(),
            Motion::Bounce => cy -= BOUNCE_HEIGHT * self.height * (self.cycle(tf) / 2.0).sin().abs(),
            Motion::Expand => pose.scale = 1.0 + EXPAND_AMPLITUDE * self.cycle(tf).sin(),
            // One turn every two periods.
            Motion::Spin => pose.angle = self.direction * self.cycle(tf) / 2.0,
            Motion::Still => {}
        }
        pose.center = (cx, cy);
        pose
    }

    /// Radius around the center that contains the sprite in any pose.
    pub fn reach(&self) -> f64 {
        let half_w = self.width / 2.0 + self.arm_length() + 1.0;
        let r = (half_w * half_w + self.height * self.height / 4.0).sqrt();
        let scale = if self.motion == Motion::Expand { 1.0 + EXPAND_AMPLITUDE } else { 1.0 };
        r * scale + 1.0
    }

    /// Vertical travel above the start center.
    pub fn lift(&self) -> f64 {
        if self.motion == Motion::Bounce {
            BOUNCE_HEIGHT * self.height
        } else {
            0.0
        }
    }
}

const CELL: f64 = 3.0;

/// Blocky per-sprite colouring: one base colour, jittered per 3x3 cell.
#[derive(Clone, Debug)]
pub struct SpriteTexture {
    pub base: [f32; 3],
    cols: usize,
    rows: usize,
    cells: Vec<[f32; 3]>,
}

impl SpriteTexture {
    /// Dark or bright base so sprites stand out from mid-grey backgrounds.
    pub fn new(spec: &SpriteSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.texture_seed);
        let bright = rng.gen_bool(0.5);
        let level: f32 = if bright { rng.gen_range(0.86..0.96) } else { rng.gen_range(0.03..0.13) };
        let base = [0, 1, 2].map(|_| (level + rng.gen_range(-0.06f32..0.06)).clamp(0.0, 1.0));
        let cols = (spec.width / CELL).ceil() as usize + 1;
        let rows = (spec.height / CELL).ceil() as usize + 1;
        let cells = (0..cols * rows)
            .map(|_| {
                let j: f32 = rng.gen_range(-0.07..0.07);
                base.map(|b| (b + j).clamp(0.0, 1.0))
            })
            .collect();
        SpriteTexture { base, cols, rows, cells }
    }

    fn at(&self, u: f64, v: f64, w: f64, h: f64) -> [f32; 3] {
        let c = (((u + w / 2.0) / CELL).floor().max(0.0) as usize).min(self.cols - 1);
        let r = (((v + h / 2.0) / CELL).floor().max(0.0) as usize).min(self.rows - 1);
        self.cells[r * self.cols + c]
    }
}

/// Distance from `p` to the segment `a`-`b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Colour of the sprite at frame point `(x, y)` in `pose`, if covered.
pub fn sample(spec: &SpriteSpec, tex: &SpriteTexture, pose: &Pose, x: f64, y: f64) -> Option<[f32; 3]> {
    let (dx, dy) = ((x - pose.center.0) / pose.scale, (y - pose.center.1) / pose.scale);
    let (s, c) = pose.angle.sin_cos();
    // Into the body frame: rotate by -angle.
    let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
    let (w, h) = (spec.width, spec.height);
    if u.abs() <= w / 2.0 && v.abs() <= h / 2.0 {
        return Some(tex.at(u, v, w, h));
    }
    let shoulder_y = -h / 2.0 + 0.2 * h;
    let len = spec.arm_length();
    let (reach_x, reach_y) = (len * pose.arm.cos(), -len * pose.arm.sin());
    for side in [-1.0, 1.0] {
        let a = (side * w / 2.0, shoulder_y);
        let b = (a.0 + side * reach_x, a.1 + reach_y);
        if segment_distance((u, v), a, b) <= 1.0 {
            return Some(tex.base);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(motion: Motion) -> SpriteSpec {
        SpriteSpec {
            width: 10.0,
            height: 18.0,
            texture_seed: 1,
            motion,
            speed: 2.0,
            direction: 1.0,
            period: 12.0,
            phase: 0.0,
            start: (20.0, 20.0),
            bounds: None,
            arm_rest: -0.5,
        }
    }

    #[test]
    fn names_roundtrip() {
        for m in Motion::ALL {
            assert_eq!(m.name().parse::<Motion>().unwrap(), m);
        }
        assert!("walk".parse::<Motion>().is_err());
    }

    #[test]
    fn translation_reflects_at_bounds() {
        let s = SpriteSpec { bounds: Some((10.0, 20.0)), start: (18.0, 5.0), ..spec(Motion::Translate) };
        let xs: Vec<f64> = (0..4).map(|t| s.pose(t).center.0).collect();
        assert_eq!(xs, vec![18.0, 20.0, 18.0, 16.0]);
    }

    #[test]
    fn body_center_is_covered() {
        let s = spec(Motion::Spin);
        let tex = SpriteTexture::new(&s);
        for t in 0..12 {
            assert!(sample(&s, &tex, &s.pose(t), 20.0, 20.0).is_some());
            assert!(sample(&s, &tex, &s.pose(t), 20.0 + s.reach(), 20.0).is_none());
        }
    }
}
