//! Goodman-model speckle synthesis with known clean reflectivity, plus
//! ratio-image validation against the Exponential(1) law.
//!
//! Scenes are piecewise-constant reflectivity maps with optional
//! multiplicative texture and embedded point scatterers. Single-look
//! speckle is drawn as a circular complex Gaussian per pixel, so the
//! intensity is exponential with mean equal to the reflectivity.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use crate::error::{Error, Result};
use crate::image::{expect_domain, ComplexSlcImage, Domain, SarImage};
use crate::rng::CounterRng;

/// Rectangular reflectivity segment, rows/cols half-open.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
    /// Per-channel reflectivity, length equal to the scene channel count.
    pub levels: Vec<f64>,
    /// Log-normal texture spread; 0 disables texture.
    pub texture_sigma: f64,
}

/// Bright point scatterer painted after segments and texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub row: usize,
    pub col: usize,
    pub amplitude: f64,
}

/// Deterministic description of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Background reflectivity per channel.
    pub base_levels: Vec<f64>,
    /// Log-normal texture spread for the background; 0 disables texture.
    pub base_texture_sigma: f64,
    /// Later segments win where rectangles overlap.
    pub segments: Vec<Segment>,
    pub scatterers: Vec<Scatterer>,
    pub seed: u64,
}

impl SceneSpec {
    /// Uniform scene with one background level for every channel.
    pub fn uniform(height: usize, width: usize, channels: usize, level: f64, seed: u64) -> Self {
        Self {
            height,
            width,
            channels,
            base_levels: vec![level; channels],
            base_texture_sigma: 0.0,
            segments: Vec::new(),
            scatterers: Vec::new(),
            seed,
        }
    }

    /// Per-channel levels for a reciprocity-consistent quad-pol scene:
    /// HV and VH share a reflectivity.
    pub fn quad_levels(hh: f64, hv: f64, vv: f64) -> Vec<f64> {
        vec![hh, hv, hv, vv]
    }

    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::ZeroAreaScene);
        }
        if self.base_levels.len() != self.channels {
            return Err(Error::ShapeMismatch {
                context: "base level count must equal channel count".into(),
            });
        }
        for &l in &self.base_levels {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::NonPositiveReflectivity(l));
            }
        }
        for s in &self.segments {
            if s.levels.len() != self.channels {
                return Err(Error::ShapeMismatch {
                    context: "segment level count must equal channel count".into(),
                });
            }
            if s.row1 > self.height || s.col1 > self.width || s.row0 >= s.row1 || s.col0 >= s.col1 {
                return Err(Error::ShapeMismatch {
                    context: "segment rectangle out of bounds".into(),
                });
            }
            for &l in &s.levels {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::NonPositiveReflectivity(l));
                }
            }
        }
        for sc in &self.scatterers {
            if sc.row >= self.height || sc.col >= self.width {
                return Err(Error::ShapeMismatch {
                    context: "scatterer out of bounds".into(),
                });
            }
            if !(sc.amplitude > 0.0) || !sc.amplitude.is_finite() {
                return Err(Error::NonPositiveReflectivity(sc.amplitude));
            }
        }
        Ok(())
    }
}

/// Grid of strictly positive ratios between a speckled intensity image and
/// a despeckled estimate of it.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RatioImage {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

// Substream ids within a scene seed.
const STREAM_TEXTURE: u64 = 0;

/// Renders the noise-free reflectivity image of a scene. Deterministic in
/// the spec's seed: the texture field is drawn pixel-indexed from its own
/// substream.
pub fn render_clean(spec: &SceneSpec) -> Result<SarImage> {
    spec.validate()?;
    let (h, w, c) = (spec.height, spec.width, spec.channels);
    let texture_rng = CounterRng::substream(spec.seed, STREAM_TEXTURE);
    let mut data = vec![0.0; h * w * c];
    for row in 0..h {
        for col in 0..w {
            let px = row * w + col;
            // Last segment covering the pixel wins; base otherwise.
            let mut levels = &spec.base_levels;
            let mut sigma = spec.base_texture_sigma;
            for s in &spec.segments {
                if row >= s.row0 && row < s.row1 && col >= s.col0 && col < s.col1 {
                    levels = &s.levels;
                    sigma = s.texture_sigma;
                }
            }
            // Mean-one log-normal texture shared across channels.
            let t = if sigma > 0.0 {
                let z = texture_rng.normal_pair_at(px as u64).0;
                (sigma * z - 0.5 * sigma * sigma).exp()
            } else {
                1.0
            };
            for ch in 0..c {
                data[px * c + ch] = levels[ch] * t;
            }
        }
    }
    for sc in &spec.scatterers {
        let px = sc.row * w + sc.col;
        for ch in 0..c {
            data[px * c + ch] = sc.amplitude;
        }
    }
    SarImage::new(h, w, c, data, Domain::LinearIntensity)
}

/// Draws a single-look complex image: each value is circular complex
/// Gaussian with zero mean and total variance equal to the reflectivity,
/// so the intensity is Exponential with mean R.
pub fn sample_slc(clean: &SarImage, rng: &CounterRng) -> Result<ComplexSlcImage> {
    expect_domain(clean, Domain::LinearIntensity)?;
    let mut data = Vec::with_capacity(clean.data().len());
    for (k, &r) in clean.data().iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::NonPositiveReflectivity(r));
        }
        let (n1, n2) = rng.normal_pair_at(k as u64);
        let scale = (0.5 * r).sqrt();
        data.push(Complex64::new(scale * n1, scale * n2));
    }
    ComplexSlcImage::new(clean.height(), clean.width(), clean.channels(), data)
}

/// Adds log-domain speckle: y = x + log(E) with E ~ Exponential(1) i.i.d.
/// per value. Equivalent in distribution to the log intensity of
/// [`sample_slc`].
pub fn apply_speckle_log(clean_log: &SarImage, rng: &CounterRng) -> Result<SarImage> {
    expect_domain(clean_log, Domain::LogIntensity)?;
    let data: Vec<f64> = clean_log
        .data()
        .iter()
        .enumerate()
        .map(|(k, &x)| x + rng.exp1_at(k as u64).ln())
        .collect();
    SarImage::new(
        clean_log.height(),
        clean_log.width(),
        clean_log.channels(),
        data,
        Domain::LogIntensity,
    )
}

/// Pixel-wise quotient of a speckled intensity image by a despeckled one.
pub fn ratio_image(noisy: &SarImage, despeckled: &SarImage) -> Result<RatioImage> {
    expect_domain(noisy, Domain::LinearIntensity)?;
    expect_domain(despeckled, Domain::LinearIntensity)?;
    if noisy.height() != despeckled.height()
        || noisy.width() != despeckled.width()
        || noisy.channels() != despeckled.channels()
        || noisy.channels() != 1
    {
        return Err(Error::ShapeMismatch {
            context: "ratio image needs two single-channel images of the same shape".into(),
        });
    }
    let mut data = Vec::with_capacity(noisy.data().len());
    for (k, (&n, &d)) in noisy.data().iter().zip(despeckled.data()).enumerate() {
        if !(d > 0.0) {
            return Err(Error::ZeroDenominator { index: k });
        }
        data.push(n / d);
    }
    Ok(RatioImage {
        height: noisy.height(),
        width: noisy.width(),
        data,
    })
}

/// Kolmogorov-Smirnov critical coefficient at significance 0.01.
pub const KS_CRITICAL_001: f64 = 1.628;

/// Minimum sample count accepted by [`exp1_goodness`].
pub const KS_MIN_SAMPLES: usize = 100;

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// One-sample KS test against the Exponential(1) CDF 1 - exp(-x) at
/// significance 0.01.
pub fn exp1_goodness(samples: &[f64]) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::SampleTooSmall {
            min: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut statistic: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-x).exp();
        let lo = cdf - i as f64 / n;
        let hi = (i + 1) as f64 / n - cdf;
        statistic = statistic.max(lo).max(hi);
    }
    let critical = KS_CRITICAL_001 / n.sqrt();
    Ok(KsResult {
        statistic,
        critical,
        pass: statistic < critical,
    })
}

/// Two-sample KS statistic between empirical distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value for the two-sample KS statistic at significance 0.01.
pub fn ks_two_sample_critical_001(na: usize, nb: usize) -> f64 {
    KS_CRITICAL_001 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}
