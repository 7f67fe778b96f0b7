//! Image data model: real and complex multi-channel grids, domain
//! transforms, patch extraction/stitching, and map thresholding.
//!
//! Pixels are stored row-major, channel-last. Values live in one of three
//! tagged domains so that operations can refuse inputs from the wrong stage
//! of the chain.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use crate::error::{Error, Result};

/// Value domain of a [`SarImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Nonnegative intensities (squared amplitudes).
    LinearIntensity,
    /// Natural log of intensity.
    LogIntensity,
    /// Log intensity affinely mapped to [0, 1].
    NormalizedLog,
}

/// Default guard added inside [`log_transform`] so exact-zero intensities
/// from the simulator stay finite. Far below any signal level in use.
pub const DEFAULT_LOG_EPSILON: f64 = 1e-10;

/// Multi-channel real-valued image with an explicit value domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SarImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    domain: Domain,
}

impl SarImage {
    /// Builds an image and checks the domain invariants.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        domain: Domain,
    ) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "{}x{}x{} image needs {} values, got {}",
                    height,
                    width,
                    channels,
                    height * width * channels,
                    data.len()
                ),
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            match domain {
                Domain::LinearIntensity if v < 0.0 => {
                    return Err(Error::NegativeIntensity { index: i, value: v })
                }
                Domain::NormalizedLog if !(0.0..=1.0).contains(&v) => {
                    return Err(Error::ShapeMismatch {
                        context: format!("normalized value {v} at index {i} outside [0, 1]"),
                    })
                }
                _ => {}
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
            domain,
        })
    }

    /// Constant-valued image.
    pub fn constant(
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
        domain: Domain,
    ) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels], domain)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[self.index(row, col, channel)]
    }

    /// Applies `f` to every value, producing an image in `domain`.
    pub fn map(&self, domain: Domain, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::new(self.height, self.width, self.channels, data, domain)
    }

    /// Single-channel view of one polarization.
    pub fn channel(&self, channel: usize) -> Result<Self> {
        if channel >= self.channels {
            return Err(Error::ChannelCount {
                expected: self.channels,
                got: channel,
            });
        }
        let mut data = Vec::with_capacity(self.pixel_count());
        for px in 0..self.pixel_count() {
            data.push(self.data[px * self.channels + channel]);
        }
        Self::new(self.height, self.width, 1, data, self.domain)
    }

    /// Interleaves single-channel images into one multi-channel image.
    pub fn from_channels(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyImage)?;
        let (h, w) = (first.height, first.width);
        let domain = first.domain;
        for p in parts {
            if p.height != h || p.width != w || p.channels != 1 || p.domain != domain {
                return Err(Error::ShapeMismatch {
                    context: "channel parts must be single-channel, same shape and domain".into(),
                });
            }
        }
        let c = parts.len();
        let mut data = vec![0.0; h * w * c];
        for (ch, p) in parts.iter().enumerate() {
            for px in 0..h * w {
                data[px * c + ch] = p.data[px];
            }
        }
        Self::new(h, w, c, data, domain)
    }
}

/// Multi-channel complex single-look image; intensity is the squared
/// magnitude per pixel and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSlcImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl ComplexSlcImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "{height}x{width}x{channels} complex image needs {} values, got {}",
                    height * width * channels,
                    data.len()
                ),
            });
        }
        for (i, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> Complex64 {
        self.data[self.index(row, col, channel)]
    }

    /// Squared magnitude per value, as a linear-intensity image.
    pub fn intensity(&self) -> SarImage {
        let data: Vec<f64> = self.data.iter().map(|z| z.norm_sqr()).collect();
        SarImage::new(
            self.height,
            self.width,
            self.channels,
            data,
            Domain::LinearIntensity,
        )
        .expect("squared magnitudes are nonnegative and finite")
    }

    /// Coherent cross-polarization merge: [HH, (HV+VH)/2, VV].
    pub fn merge_cross_pol(&self) -> Result<Self> {
        if self.channels != 4 {
            return Err(Error::ChannelCount {
                expected: 4,
                got: self.channels,
            });
        }
        let mut data = Vec::with_capacity(self.height * self.width * 3);
        for px in 0..self.height * self.width {
            let base = px * 4;
            data.push(self.data[base]);
            data.push((self.data[base + 1] + self.data[base + 2]) * 0.5);
            data.push(self.data[base + 3]);
        }
        Self::new(self.height, self.width, 3, data)
    }
}

/// Rectangular crop of a [`SarImage`] plus its origin in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: (usize, usize),
    pub image: SarImage,
}

/// Merges the four polarimetric channels into three by averaging the
/// reciprocal cross channels: [HH, (HV+VH)/2, VV].
pub fn merge_cross_pol(img: &SarImage) -> Result<SarImage> {
    if img.channels != 4 {
        return Err(Error::ChannelCount {
            expected: 4,
            got: img.channels,
        });
    }
    expect_domain(img, Domain::LinearIntensity)?;
    let mut data = Vec::with_capacity(img.pixel_count() * 3);
    for px in 0..img.pixel_count() {
        let base = px * 4;
        data.push(img.data[base]);
        data.push(0.5 * (img.data[base + 1] + img.data[base + 2]));
        data.push(img.data[base + 3]);
    }
    SarImage::new(img.height, img.width, 3, data, Domain::LinearIntensity)
}

/// Maps each intensity v to log(v + epsilon).
pub fn log_transform(img: &SarImage, epsilon: f64) -> Result<SarImage> {
    expect_domain(img, Domain::LinearIntensity)?;
    img.map(Domain::LogIntensity, |v| (v + epsilon).ln())
}

/// Inverse of [`log_transform`]: v maps to exp(v) - epsilon.
pub fn exp_transform(img: &SarImage, epsilon: f64) -> Result<SarImage> {
    expect_domain(img, Domain::LogIntensity)?;
    let data: Vec<f64> = img.data.iter().map(|&v| (v.exp() - epsilon).max(0.0)).collect();
    SarImage::new(
        img.height,
        img.width,
        img.channels,
        data,
        Domain::LinearIntensity,
    )
}

/// Affinely rescales a log image to [0, 1]; the returned (min, max) invert
/// the map exactly.
pub fn minmax_normalize(img: &SarImage) -> Result<(SarImage, f64, f64)> {
    expect_domain(img, Domain::LogIntensity)?;
    if img.data.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &img.data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        return Err(Error::ConstantImage);
    }
    let scale = 1.0 / (hi - lo);
    let data: Vec<f64> = img
        .data
        .iter()
        .map(|&v| ((v - lo) * scale).clamp(0.0, 1.0))
        .collect();
    let out = SarImage::new(img.height, img.width, img.channels, data, Domain::NormalizedLog)?;
    Ok((out, lo, hi))
}

/// Rescales with a previously computed (min, max) instead of the image's
/// own range, clamping to [0, 1]. Keeps training and inference in the same
/// normalization frame.
pub fn normalize_with(img: &SarImage, lo: f64, hi: f64) -> Result<SarImage> {
    expect_domain(img, Domain::LogIntensity)?;
    if hi <= lo {
        return Err(Error::ConstantImage);
    }
    let scale = 1.0 / (hi - lo);
    let data: Vec<f64> = img
        .data
        .iter()
        .map(|&v| ((v - lo) * scale).clamp(0.0, 1.0))
        .collect();
    SarImage::new(img.height, img.width, img.channels, data, Domain::NormalizedLog)
}

/// Inverse of [`minmax_normalize`].
pub fn denormalize(img: &SarImage, lo: f64, hi: f64) -> Result<SarImage> {
    expect_domain(img, Domain::NormalizedLog)?;
    let data: Vec<f64> = img.data.iter().map(|&v| lo + v * (hi - lo)).collect();
    SarImage::new(img.height, img.width, img.channels, data, Domain::LogIntensity)
}

/// Visualization threshold: mean + 3 standard deviations over all pixels
/// and channels jointly, population convention.
pub fn visualization_threshold(img: &SarImage) -> Result<f64> {
    if img.data.is_empty() {
        return Err(Error::EmptyImage);
    }
    let n = img.data.len() as f64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for &v in &img.data {
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok(mean + 3.0 * var.sqrt())
}

/// Clips the top p% of values: the threshold t sits at sorted index
/// ceil(N (100 - p) / 100) - 1 (ascending, clamped to 0), and exactly the
/// floor(N p / 100) highest-ranked values are reduced to t.
pub fn clip_top_percent(values: &[f64], p: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyImage);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidPercent(p));
    }
    let n = values.len();
    let idx = ((n as f64 * (100.0 - p) / 100.0).ceil() as isize - 1).max(0) as usize;
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let t = sorted[idx];
    Ok(values.iter().map(|&v| v.min(t)).collect())
}

/// Patch origins along one dimension: multiples of `stride`, plus a final
/// origin flush with the edge when the last regular step falls short.
pub(crate) fn patch_origins(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut origins = Vec::new();
    let last = dim - size;
    let mut o = 0;
    loop {
        origins.push(o);
        if o == last {
            break;
        }
        o += stride;
        if o > last {
            origins.push(last);
            break;
        }
    }
    origins
}

/// Extracts sliding-window patches covering the whole image.
pub fn extract_patches(img: &SarImage, size: usize, stride: usize) -> Result<Vec<Patch>> {
    if stride == 0 {
        return Err(Error::ZeroStride);
    }
    let dim = img.height.min(img.width);
    if size > dim || size == 0 {
        return Err(Error::PatchTooLarge { size, dim });
    }
    let rows = patch_origins(img.height, size, stride);
    let cols = patch_origins(img.width, size, stride);
    let mut patches = Vec::with_capacity(rows.len() * cols.len());
    for &r0 in &rows {
        for &c0 in &cols {
            let mut data = Vec::with_capacity(size * size * img.channels);
            for r in r0..r0 + size {
                let start = img.index(r, c0, 0);
                data.extend_from_slice(&img.data[start..start + size * img.channels]);
            }
            patches.push(Patch {
                origin: (r0, c0),
                image: SarImage::new(size, size, img.channels, data, img.domain)?,
            });
        }
    }
    Ok(patches)
}

/// Copies one size x size crop with its top-left corner at (row0, col0).
pub fn crop(img: &SarImage, row0: usize, col0: usize, size: usize) -> Result<Patch> {
    if row0 + size > img.height || col0 + size > img.width || size == 0 {
        return Err(Error::PatchOutOfBounds {
            row: row0,
            col: col0,
            height: img.height,
            width: img.width,
        });
    }
    let mut data = Vec::with_capacity(size * size * img.channels);
    for r in row0..row0 + size {
        let start = img.index(r, col0, 0);
        data.extend_from_slice(&img.data[start..start + size * img.channels]);
    }
    Ok(Patch {
        origin: (row0, col0),
        image: SarImage::new(size, size, img.channels, data, img.domain)?,
    })
}

/// Reassembles patches onto an h x w canvas; overlapping values are
/// averaged. Accumulation order follows the patch list, so the result is
/// independent of any parallel extraction schedule.
pub fn stitch_patches(patches: &[Patch], height: usize, width: usize) -> Result<SarImage> {
    let first = patches.first().ok_or(Error::EmptyImage)?;
    let channels = first.image.channels;
    let domain = first.image.domain;
    let mut sum = vec![0.0f64; height * width * channels];
    let mut count = vec![0u32; height * width];
    for p in patches {
        let (r0, c0) = p.origin;
        let (ph, pw) = (p.image.height, p.image.width);
        if r0 + ph > height || c0 + pw > width || p.image.channels != channels {
            return Err(Error::PatchOutOfBounds {
                row: r0,
                col: c0,
                height,
                width,
            });
        }
        for r in 0..ph {
            for c in 0..pw {
                let px = (r0 + r) * width + (c0 + c);
                count[px] += 1;
                for ch in 0..channels {
                    sum[px * channels + ch] += p.image.get(r, c, ch);
                }
            }
        }
    }
    for (px, &n) in count.iter().enumerate() {
        if n == 0 {
            return Err(Error::UncoveredPixel {
                row: px / width,
                col: px % width,
            });
        }
        let inv = 1.0 / n as f64;
        for ch in 0..channels {
            sum[px * channels + ch] *= inv;
        }
    }
    SarImage::new(height, width, channels, sum, domain)
}

pub(crate) fn expect_domain(img: &SarImage, expected: Domain) -> Result<()> {
    if img.domain != expected {
        return Err(Error::DomainMismatch {
            expected,
            got: img.domain,
        });
    }
    Ok(())
}
