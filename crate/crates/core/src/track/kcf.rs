use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::Fft2;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::Gray;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KcfConfig {
    /// Side of the square feature patch.
    pub patch: usize,
    /// Context around the target: the sampled window is `(1 + padding)` times the box.
    pub padding: f64,
    /// Gaussian kernel bandwidth, in units of normalized intensity.
    pub sigma: f64,
    pub lambda: f64,
    /// Model blending rate per update.
    pub interp: f64,
    /// Label bandwidth as a fraction of the target's size in patch pixels.
    pub label_sigma_factor: f64,
    /// Smallest box side accepted at init.
    pub min_size: f64,
}

impl Default for KcfConfig {
    fn default() -> Self {
        KcfConfig { patch: 32, padding: 1.5, sigma: 0.2, lambda: 1e-4, interp: 0.075, label_sigma_factor: 0.1, min_size: 4.0 }
    }
}

impl KcfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.patch < 4 {
            return bad(format!("KCF patch must be at least 4, got {}", self.patch));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("KCF lambda must be positive, got {}", self.lambda));
        }
        if !(self.sigma > 0.0) {
            return bad(format!("KCF sigma must be positive, got {}", self.sigma));
        }
        if !(self.interp > 0.0 && self.interp <= 1.0) {
            return bad(format!("KCF interp must be in (0, 1], got {}", self.interp));
        }
        if !(self.padding >= 0.0) || !(self.label_sigma_factor > 0.0) {
            return bad("KCF padding must be non-negative and the label bandwidth positive".into());
        }
        Ok(())
    }
}

/// Separable raised-cosine window of side `p`.
pub fn hann_window(p: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..p).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (p - 1) as f64).cos()).collect();
    (0..p * p).map(|i| w[i / p] * w[i % p]).collect()
}

/// Gaussian of bandwidth `sigma` with its unit peak at `(p / 2, p / 2)`.
pub fn gaussian_label(p: usize, sigma: f64) -> Vec<f64> {
    let c = (p / 2) as f64;
    (0..p * p)
        .map(|i| {
            let (y, x) = ((i / p) as f64 - c, (i % p) as f64 - c);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn kernel_from_spectra(
    xf: &[Complex64],
    xx: f64,
    zf: &[Complex64],
    zz: f64,
    sigma: f64,
    fft: &Fft2,
) -> Vec<f64> {
    let prod: Vec<Complex64> = xf.iter().zip(zf).map(|(a, b)| a * b.conj()).collect();
    let c = fft.inverse_real(&prod);
    let n = c.len() as f64;
    c.iter().map(|&cv| (-((xx + zz - 2.0 * cv).max(0.0)) / (sigma * sigma * n)).exp()).collect()
}

/// Gaussian kernel between `x` shifted cyclically by every offset and `z`:
/// entry `s` is `exp(-max(0, |x|^2 + |z|^2 - 2 c_s) / (sigma^2 n))` with
/// `c = F^-1(F(x) . conj(F(z)))`, so a copy of `z` shifted by `d` peaks at `d`.
pub fn gaussian_correlation(x: &[f64], z: &[f64], sigma: f64, fft: &Fft2) -> Result<Vec<f64>> {
    let n = fft.size() * fft.size();
    if x.len() != n || z.len() != n {
        return Err(Error::Dimension(format!(
            "kernel correlation of {} and {} values with a {n}-point transform",
            x.len(),
            z.len()
        )));
    }
    Ok(kernel_from_spectra(&fft.forward_real(x), sq_norm(x), &fft.forward_real(z), sq_norm(z), sigma, fft))
}

/// Bilinear `p x p` resampling of a `window`-sized region centered at
/// `center`; samples beyond the frame repeat the nearest edge pixel.
pub fn extract_patch(gray: &Gray, center: (f64, f64), window: (f64, f64), p: usize) -> Vec<f64> {
    let (w, h) = (gray.width, gray.height);
    let sample = |x: f64, y: f64| -> f64 {
        let x = x.clamp(0.0, (w - 1) as f64);
        let y = y.clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |yy: usize, xx: usize| gray.data[yy * w + xx] as f64;
        let top = at(y0, x0) + fx * (at(y0, x1) - at(y0, x0));
        let bot = at(y1, x0) + fx * (at(y1, x1) - at(y1, x0));
        top + fy * (bot - top)
    };
    let (sx, sy) = (window.0 / p as f64, window.1 / p as f64);
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        // Pixel (x, y) covers [x, x + 1), so its center is at x + 0.5.
        let y = center.1 + (i as f64 + 0.5 - p as f64 / 2.0) * sy - 0.5;
        for j in 0..p {
            let x = center.0 + (j as f64 + 0.5 - p as f64 / 2.0) * sx - 0.5;
            out.push(sample(x, y));
        }
    }
    out
}

/// Sub-cell offset of a peak from its neighbours via a parabola fit.
fn parabolic(left: f64, center: f64, right: f64) -> f64 {
    let den = left - 2.0 * center + right;
    if den < 0.0 {
        (0.5 * (left - right) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Single-target kernelized correlation filter on grayscale features.
#[derive(Clone, Debug)]
pub struct KcfState {
    config: KcfConfig,
    fft: Fft2,
    hann: Vec<f64>,
    label_f: Vec<Complex64>,
    template: Vec<f64>,
    template_f: Vec<Complex64>,
    template_sq: f64,
    alpha_f: Vec<Complex64>,
    pub bbox: BBox,
}

impl KcfState {
    pub fn init(gray: &Gray, bbox: BBox, config: &KcfConfig) -> Result<Self> {
        config.validate()?;
        if bbox.w < config.min_size || bbox.h < config.min_size {
            return Err(Error::Config(format!(
                "box {}x{} is below the {} px minimum side",
                bbox.w, bbox.h, config.min_size
            )));
        }
        if bbox.outside(gray.width, gray.height) {
            return Err(Error::TargetLost);
        }
        let p = config.patch;
        let fft = Fft2::new(p);
        let target_in_patch = p as f64 / (1.0 + config.padding);
        let label = gaussian_label(p, config.label_sigma_factor * target_in_patch);
        let mut s = KcfState {
            config: config.clone(),
            label_f: fft.forward_real(&label),
            hann: hann_window(p),
            fft,
            template: Vec::new(),
            template_f: Vec::new(),
            template_sq: 0.0,
            alpha_f: Vec::new(),
            bbox,
        };
        let x = s.features(gray, &bbox);
        let (xf, alpha_f) = s.train(&x);
        s.template_sq = sq_norm(&x);
        s.template = x;
        s.template_f = xf;
        s.alpha_f = alpha_f;
        Ok(s)
    }

    pub fn config(&self) -> &KcfConfig {
        &self.config
    }

    fn window(&self, b: &BBox) -> (f64, f64) {
        (b.w * (1.0 + self.config.padding), b.h * (1.0 + self.config.padding))
    }

    /// Mean-subtracted, Hann-windowed patch around `b`.
    fn features(&self, gray: &Gray, b: &BBox) -> Vec<f64> {
        let raw = extract_patch(gray, b.center(), self.window(b), self.config.patch);
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        raw.iter().zip(&self.hann).map(|(v, h)| (v - mean) * h).collect()
    }

    fn train(&self, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let xf = self.fft.forward_real(x);
        let xx = sq_norm(x);
        let k = kernel_from_spectra(&xf, xx, &xf, xx, self.config.sigma, &self.fft);
        let kf = self.fft.forward_real(&k);
        let lambda = self.config.lambda;
        let alpha_f = self.label_f.iter().zip(&kf).map(|(y, k)| y / (k + lambda)).collect();
        (xf, alpha_f)
    }

    /// Dense response over all cyclic shifts of the patch at the current box.
    pub fn response(&self, gray: &Gray) -> Vec<f64> {
        let z = self.features(gray, &self.bbox);
        let zf = self.fft.forward_real(&z);
        let k = kernel_from_spectra(&zf, sq_norm(&z), &self.template_f, self.template_sq, self.config.sigma, &self.fft);
        let kf = self.fft.forward_real(&k);
        let rf: Vec<Complex64> = kf.iter().zip(&self.alpha_f).map(|(k, a)| k * a).collect();
        self.fft.inverse_real(&rf)
    }

    /// Target displacement in frame pixels and the response peak, without
    /// changing the state.
    pub fn detect(&self, gray: &Gray) -> (f64, f64, f64) {
        let p = self.config.patch;
        let r = self.response(gray);
        let (best, peak) = r
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let (py, px) = (best / p, best % p);
        let at = |y: usize, x: usize| r[(y % p) * p + (x % p)];
        let sub_x = parabolic(at(py, px + p - 1), peak, at(py, px + 1));
        let sub_y = parabolic(at(py + p - 1, px), peak, at(py + 1, px));
        let c = (p / 2) as f64;
        let (win_w, win_h) = self.window(&self.bbox);
        let dx = (px as f64 + sub_x - c) * win_w / p as f64;
        let dy = (py as f64 + sub_y - c) * win_h / p as f64;
        (dx, dy, peak)
    }

    /// Moves the box to the detected peak and blends in a model trained
    /// there. Returns the new box and the response peak.
    pub fn update(&mut self, gray: &Gray) -> Result<(BBox, f64)> {
        let (dx, dy, peak) = self.detect(gray);
        let moved = self.bbox.translate(dx, dy);
        if moved.outside(gray.width, gray.height) {
            return Err(Error::TargetLost);
        }
        self.bbox = moved;
        self.retrain(gray, moved, self.config.interp);
        Ok((moved, peak))
    }

    /// Trains at `bbox` and blends the result in at `rate` (1 replaces the
    /// model). The box size must be unchanged for a partial blend to be
    /// meaningful; callers re-init on size changes.
    pub fn retrain(&mut self, gray: &Gray, bbox: BBox, rate: f64) {
        self.bbox = bbox;
        let x = self.features(gray, &bbox);
        let (xf, alpha_f) = self.train(&x);
        let keep = 1.0 - rate;
        for (t, v) in self.template.iter_mut().zip(&x) {
            *t = keep * *t + rate * v;
        }
        for (t, v) in self.alpha_f.iter_mut().zip(&alpha_f) {
            *t = *t * keep + v * rate;
        }
        // The template spectrum follows the blended template exactly.
        for (t, v) in self.template_f.iter_mut().zip(&xf) {
            *t = *t * keep + v * rate;
        }
        self.template_sq = sq_norm(&self.template);
    }
}
