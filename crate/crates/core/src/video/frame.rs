use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::Clip;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An 8-bit image, row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!("frames have 1 or 3 channels, got {channels}")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "{height}x{width}x{channels} frame needs {} bytes, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        Ok(Frame { height, width, channels, pixels })
    }

    /// Planar `C x H x W` floats, `p / 255`.
    pub fn to_planar(&self) -> Vec<f32> {
        let hw = self.height * self.width;
        let mut out = vec![0.0; hw * self.channels];
        for (i, px) in self.pixels.chunks(self.channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                out[c * hw + i] = v as f32 / 255.0;
            }
        }
        out
    }

    /// Quantizes planar `C x H x W` values in `[0, 1]` (clamped) to 8 bits.
    pub fn from_planar(channels: usize, height: usize, width: usize, data: &[f32]) -> Result<Self> {
        let hw = height * width;
        if data.len() != channels * hw {
            return Err(Error::Dimension(format!(
                "planar buffer of {} values for {channels}x{height}x{width}",
                data.len()
            )));
        }
        let mut pixels = vec![0u8; data.len()];
        for i in 0..hw {
            for c in 0..channels {
                pixels[i * channels + c] = (data[c * hw + i].clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
        Frame::new(height, width, channels, pixels)
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pnm(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        f.write_all(&self.encode_pnm())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read_pnm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Frame::decode_pnm(&bytes).map_err(|msg| Error::format(path, msg))
    }

    /// Parses a binary PGM (P5) or PPM (P6) image with maxval 255.
    pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // Skip whitespace and comments.
            while pos < bytes.len() {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else if bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err("missing whitespace after maxval".into());
        }
        pos += 1;
        let channels = match fields[0].as_str() {
            "P5" => 1,
            "P6" => 3,
            m => return Err(format!("unsupported magic '{m}' (expected P5 or P6)")),
        };
        let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} '{s}'"));
        let width = num(&fields[1], "width")?;
        let height = num(&fields[2], "height")?;
        let maxval = num(&fields[3], "maxval")?;
        if width == 0 || height == 0 {
            return Err(format!("empty image {width}x{height}"));
        }
        if maxval != 255 {
            return Err(format!("only 8-bit images with maxval 255 are supported, got {maxval}"));
        }
        let need = width * height * channels;
        if bytes.len() - pos < need {
            return Err(format!("raster has {} bytes, expected {need}", bytes.len() - pos));
        }
        Frame::new(height, width, channels, bytes[pos..pos + need].to_vec()).map_err(|e| e.to_string())
    }
}

fn is_pnm(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

/// Frame files of a directory in lexicographic (byte-wise) name order, so
/// `f10.pgm` sorts before `f2.pgm`.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?.path();
        if path.is_file() && is_pnm(&path) {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Loads every PGM/PPM frame of `dir` into one clip with values `p / 255`.
pub fn load_frame_dir(dir: &Path, fps: f64) -> Result<Clip> {
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(Error::Empty(format!("no PGM/PPM frames in {}", dir.display())));
    }
    let first = Frame::read_pnm(&paths[0])?;
    let (h, w, c) = (first.height, first.width, first.channels);
    let mut data = Vec::with_capacity(paths.len() * h * w * c);
    data.extend(first.to_planar());
    for p in &paths[1..] {
        let f = Frame::read_pnm(p)?;
        if (f.height, f.width, f.channels) != (h, w, c) {
            return Err(Error::format(
                p,
                format!("frame is {}x{}x{} but the sequence is {h}x{w}x{c}", f.height, f.width, f.channels),
            ));
        }
        data.extend(f.to_planar());
    }
    let frames = Tensor::new(&[paths.len(), c, h, w], data)?;
    Clip::new(frames, fps, dir.display().to_string(), 0)
}

/// Writes each frame of `clip` as `frame_00000.ppm` (or `.pgm`) under `dir`.
pub fn write_frame_dir(clip: &Clip, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let ext = if clip.channels() == 1 { "pgm" } else { "ppm" };
    for t in 0..clip.len() {
        let f = Frame::from_planar(clip.channels(), clip.height(), clip.width(), clip.frame(t))?;
        f.write_pnm(&dir.join(format!("frame_{t:05}.{ext}")))?;
    }
    Ok(())
}
