use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the network convolves over time (clips) or only space (MHIs).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "3d")]
    ThreeD,
    #[serde(rename = "2d")]
    TwoD,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::ThreeD => "3d",
            Mode::TwoD => "2d",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3d" => Ok(Mode::ThreeD),
            "2d" => Ok(Mode::TwoD),
            other => Err(Error::Spec(format!("unknown network mode '{other}' (expected 3d or 2d)"))),
        }
    }
}

/// Number of 2x poolings the input passes through before flattening:
/// the encoder pools twice (undone by the decoder), the head pools three times.
pub const HEAD_POOLS: u32 = 3;
pub const ENCODER_POOLS: u32 = 2;

/// Declarative description of the encoder-decoder + classifier network.
///
/// Layer counts are fixed: two encoder stages of two conv+PReLU each, two
/// decoder stages (upsample, concatenate the matching encoder output, conv),
/// one mixing conv, then three head units of two convs and a max pool each,
/// a flatten and two fully connected layers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub mode: Mode,
    pub in_channels: usize,
    /// Temporal extent; always 1 in 2-D mode.
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub encoder_channels: [usize; 2],
    pub head_channels: [usize; 3],
    pub fc_hidden: usize,
    pub num_classes: usize,
    pub kernel: usize,
    /// When false the decoder receives zeros in place of the encoder skips.
    pub skip_connections: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            mode: Mode::ThreeD,
            in_channels: 3,
            frames: 16,
            height: 64,
            width: 64,
            encoder_channels: [16, 32],
            head_channels: [32, 64, 128],
            fc_hidden: 256,
            num_classes: 10,
            kernel: 3,
            skip_connections: true,
        }
    }
}

impl NetworkSpec {
    /// Default 2-D variant for single-channel motion history images.
    pub fn default_2d() -> Self {
        NetworkSpec { mode: Mode::TwoD, in_channels: 1, frames: 1, ..Self::default() }
    }

    /// Narrow, low-resolution variant (8 x 16 x 16 input) that trains in
    /// minutes on one CPU core.
    pub fn compact(mode: Mode, num_classes: usize) -> Self {
        let (in_channels, frames) = match mode {
            Mode::ThreeD => (3, 8),
            Mode::TwoD => (1, 1),
        };
        NetworkSpec {
            mode,
            in_channels,
            frames,
            height: 16,
            width: 16,
            encoder_channels: [4, 8],
            head_channels: [8, 16, 16],
            fc_hidden: 32,
            num_classes,
            kernel: 3,
            skip_connections: true,
        }
    }

    /// Shape of one sample, without the batch axis.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self.mode {
            Mode::ThreeD => vec![self.in_channels, self.frames, self.height, self.width],
            Mode::TwoD => vec![self.in_channels, self.height, self.width],
        }
    }

    pub fn batch_shape(&self, batch: usize) -> Vec<usize> {
        let mut s = vec![batch];
        s.extend(self.sample_shape());
        s
    }

    /// Pooling window / upsampling factor per `[depth, height, width]`.
    pub fn pool_factor(&self) -> [usize; 3] {
        match self.mode {
            Mode::ThreeD => [2, 2, 2],
            Mode::TwoD => [1, 2, 2],
        }
    }

    /// Extents after the head's three poolings.
    pub fn flat_extents(&self) -> [usize; 3] {
        let div = 1 << HEAD_POOLS;
        let d = match self.mode {
            Mode::ThreeD => self.frames / div,
            Mode::TwoD => 1,
        };
        [d, self.height / div, self.width / div]
    }

    pub fn flat_features(&self) -> usize {
        self.head_channels[2] * self.flat_extents().iter().product::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        let spec_err = |m: String| Err(Error::Spec(m));
        if self.mode == Mode::TwoD && self.frames != 1 {
            return spec_err(format!("2d networks take a single frame, got frames={}", self.frames));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return spec_err(format!("kernel size must be odd, got {}", self.kernel));
        }
        let widths = [self.in_channels, self.fc_hidden, self.num_classes]
            .into_iter()
            .chain(self.encoder_channels)
            .chain(self.head_channels);
        if widths.into_iter().any(|w| w == 0) {
            return spec_err("channel widths, fc_hidden and num_classes must be positive".into());
        }
        let div = 1usize << HEAD_POOLS.max(ENCODER_POOLS);
        let mut axes = vec![("height", self.height), ("width", self.width)];
        if self.mode == Mode::ThreeD {
            axes.insert(0, ("frames", self.frames));
        }
        for (name, extent) in axes {
            if extent == 0 || extent % div != 0 {
                return spec_err(format!(
                    "input axis '{name}' = {extent} is not divisible by the pooling factor {div}"
                ));
            }
        }
        Ok(())
    }

    /// Canonical `key=value` text; stable across runs and platforms.
    pub fn canonical(&self) -> String {
        format!(
            "mode={}\nin_channels={}\nframes={}\nheight={}\nwidth={}\nencoder_channels={},{}\nhead_channels={},{},{}\nfc_hidden={}\nnum_classes={}\nkernel={}\nskip_connections={}\n",
            self.mode,
            self.in_channels,
            self.frames,
            self.height,
            self.width,
            self.encoder_channels[0],
            self.encoder_channels[1],
            self.head_channels[0],
            self.head_channels[1],
            self.head_channels[2],
            self.fc_hidden,
            self.num_classes,
            self.kernel,
            self.skip_connections
        )
    }

    pub fn parse_canonical(text: &str) -> Result<Self> {
        let mut spec = NetworkSpec::default();
        let bad = |k: &str, v: &str| Error::Spec(format!("bad value '{v}' for '{k}'"));
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("malformed spec line '{line}'")))?;
            let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(k, v));
            let list = |n: usize| -> Result<Vec<usize>> {
                let parts = v.split(',').map(num).collect::<Result<Vec<_>>>()?;
                if parts.len() == n {
                    Ok(parts)
                } else {
                    Err(bad(k, v))
                }
            };
            match k {
                "mode" => spec.mode = v.parse()?,
                "in_channels" => spec.in_channels = num(v)?,
                "frames" => spec.frames = num(v)?,
                "height" => spec.height = num(v)?,
                "width" => spec.width = num(v)?,
                "encoder_channels" => {
                    let l = list(2)?;
                    spec.encoder_channels = [l[0], l[1]];
                }
                "head_channels" => {
                    let l = list(3)?;
                    spec.head_channels = [l[0], l[1], l[2]];
                }
                "fc_hidden" => spec.fc_hidden = num(v)?,
                "num_classes" => spec.num_classes = num(v)?,
                "kernel" => spec.kernel = num(v)?,
                "skip_connections" => spec.skip_connections = v.parse().map_err(|_| bad(k, v))?,
                other => return Err(Error::Spec(format!("unknown spec key '{other}'"))),
            }
        }
        Ok(spec)
    }

    /// 64-bit FNV-1a hash of the canonical text.
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        NetworkSpec::default().validate().unwrap();
        NetworkSpec::default_2d().validate().unwrap();
        NetworkSpec::compact(Mode::ThreeD, 6).validate().unwrap();
        NetworkSpec::compact(Mode::TwoD, 6).validate().unwrap();
    }

    #[test]
    fn indivisible_axis_is_named() {
        let spec = NetworkSpec { width: 60, ..NetworkSpec::default() };
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("width"), "{err}");
        let spec = NetworkSpec { frames: 12, ..NetworkSpec::default() };
        assert!(spec.validate().unwrap_err().to_string().contains("frames"));
    }

    #[test]
    fn canonical_text_roundtrips() {
        let spec = NetworkSpec { skip_connections: false, ..NetworkSpec::compact(Mode::TwoD, 4) };
        let back = NetworkSpec::parse_canonical(&spec.canonical()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.hash(), spec.hash());
        assert_ne!(NetworkSpec::default().hash(), NetworkSpec::default_2d().hash());
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
