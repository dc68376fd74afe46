//! Full-reference image quality: PSNR and windowed SSIM over 8-bit-range
//! sample grids.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::par;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 255.0;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions differ: {0}x{1}x{2} vs {3}x{4}x{5}")]
    DimensionMismatch(usize, usize, usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall { width: usize, height: usize, window: usize },
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("cannot decode image: {0}")]
    Decode(#[from] ::image::ImageError),
}

/// Row-major samples, interleaved by channel, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("{channels} channels; expected 1 or 3")));
        }
        if samples.len() != width * height * channels {
            return Err(ImageError::Invalid(format!(
                "{} samples for a {width}x{height}x{channels} image",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(ImageError::Invalid("non-finite sample".into()));
        }
        Ok(Self { width, height, channels, samples })
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, data: &[u8]) -> Result<Self, ImageError> {
        Self::new(width, height, channels, data.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Single-channel luminance, `0.299 R + 0.587 G + 0.114 B` for colour input.
    pub fn luminance(&self) -> Vec<f64> {
        match self.channels {
            1 => self.samples.clone(),
            _ => self
                .samples
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect(),
        }
    }

    fn check_same_shape(&self, other: &ImageGrid) -> Result<(), ImageError> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(ImageError::DimensionMismatch(
                self.width, self.height, self.channels, other.width, other.height, other.channels,
            ));
        }
        Ok(())
    }
}

/// Load an 8-bit PNG or PGM/PPM. Grey images give one channel, anything
/// else is converted to RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid, ImageError> {
    let img = ::image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ::image::ColorType::L8 | ::image::ColorType::La8 | ::image::ColorType::L16 | ::image::ColorType::La16 => {
            ImageGrid::from_u8(w, h, 1, img.to_luma8().as_raw())
        }
        _ => ImageGrid::from_u8(w, h, 3, img.to_rgb8().as_raw()),
    }
}

/// Peak signal-to-noise ratio in decibels; identical inputs give `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn value(&self) -> f64 {
        match self {
            Psnr::Finite(v) => *v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.3}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Psnr::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Psnr::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid PSNR value '{t}'"))),
        }
    }
}

/// PSNR with peak 255 over every sample of every channel.
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<Psnr, ImageError> {
    a.check_same_shape(b)?;
    if a.samples.is_empty() {
        return Err(ImageError::Invalid("empty image".into()));
    }
    let sse: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y) * (x - y)).sum();
    if sse == 0.0 {
        return Ok(Psnr::Infinite);
    }
    let mse = sse / a.samples.len() as f64;
    Ok(Psnr::Finite(10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()))
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            w[y * SSIM_WINDOW + x] = g[y] * g[x];
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean SSIM of the luminance planes over every fully-contained 11x11
/// Gaussian window (σ = 1.5, K1 = 0.01, K2 = 0.03, L = 255).
pub fn ssim(a: &ImageGrid, b: &ImageGrid) -> Result<f64, ImageError> {
    a.check_same_shape(b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(ImageError::TooSmall { width: a.width, height: a.height, window: SSIM_WINDOW });
    }
    let la = a.luminance();
    let lb = b.luminance();
    let w = gaussian_window();
    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
    let width = a.width;
    let nx = a.width - SSIM_WINDOW + 1;
    let ny = a.height - SSIM_WINDOW + 1;

    let window_ssim = |x0: usize, y0: usize| -> f64 {
        let (mut mu_a, mut mu_b) = (0.0, 0.0);
        for dy in 0..SSIM_WINDOW {
            let row = (y0 + dy) * width + x0;
            for dx in 0..SSIM_WINDOW {
                let wk = w[dy * SSIM_WINDOW + dx];
                mu_a += wk * la[row + dx];
                mu_b += wk * lb[row + dx];
            }
        }
        let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
        for dy in 0..SSIM_WINDOW {
            let row = (y0 + dy) * width + x0;
            for dx in 0..SSIM_WINDOW {
                let wk = w[dy * SSIM_WINDOW + dx];
                let da = la[row + dx] - mu_a;
                let db = lb[row + dx] - mu_b;
                var_a += wk * da * da;
                var_b += wk * db * db;
                cov += wk * (da * db);
            }
        }
        ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
    };

    // Row sums are reduced in row order so the result does not depend on threading.
    let row_sums = par::map_range(0..ny, |y| (0..nx).map(|x| window_ssim(x, y)).sum::<f64>());
    let mean = row_sums.iter().sum::<f64>() / (nx * ny) as f64;
    Ok(mean.clamp(-1.0, 1.0))
}

/// PSNR and SSIM for one rendered/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderQualityReport {
    pub psnr: Psnr,
    pub ssim: f64,
}

impl RenderQualityReport {
    pub fn compute(reference: &ImageGrid, test: &ImageGrid) -> Result<Self, ImageError> {
        Ok(Self { psnr: psnr(reference, test)?, ssim: ssim(reference, test)? })
    }
}

impl fmt::Display for RenderQualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PSNR {} dB, SSIM {:.4}", self.psnr, self.ssim)
    }
}
