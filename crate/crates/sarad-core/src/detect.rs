//! Change detection between an image and its reconstruction.
//!
//! Local first and second moments over a boxcar window turn each pixel
//! into a covariance matrix; the anomaly score is the squared Frobenius
//! distance between the covariance fields of the input and of its
//! anomaly-free reconstruction. A complex RX detector with guard cells
//! serves as the classical baseline.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math without std
use num_complex::Complex64;

use crate::aae::{reconstruct_image, AaeBundle};
use crate::despeckler::despeckle;
use crate::error::{Error, Result};
use crate::image::{normalize_with, ComplexSlcImage, Domain, SarImage};
use crate::linalg::solve_complex;
use crate::nn::ModelBundle;

/// Boundary policy of a covariance field. Only mirrored boundaries are
/// implemented: the window reflects about the edge pixel without
/// repeating it, so no fabricated zero borders leak into the moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Reflect,
}

/// Default boxcar semi-kernel: a 7x7 window.
pub const DEFAULT_SEMI_KERNEL: usize = 3;

/// Default RX estimation window side.
pub const RX_OUTER: usize = 15;

/// Default RX guard window side.
pub const RX_GUARD: usize = 7;

/// Relative weight of the identity added to the RX covariance before
/// inversion.
pub const RX_REGULARIZATION: f64 = 1e-6;

/// Per-pixel c x c covariance matrices over a (2k+1)-sided boxcar.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceField {
    height: usize,
    width: usize,
    channels: usize,
    k: usize,
    boundary: Boundary,
    data: Vec<f64>,
}

impl CovarianceField {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn semi_kernel(&self) -> usize {
        self.k
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Row-major c x c matrix at one pixel.
    pub fn matrix(&self, row: usize, col: usize) -> &[f64] {
        let c2 = self.channels * self.channels;
        let base = (row * self.width + col) * c2;
        &self.data[base..base + c2]
    }
}

/// Grid of anomaly scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    height: usize,
    width: usize,
    normalized: bool,
    scores: Vec<f64>,
}

impl AnomalyMap {
    pub fn new_raw(height: usize, width: usize, scores: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || scores.len() != height * width {
            return Err(Error::ShapeMismatch {
                context: "anomaly map needs height * width scores".into(),
            });
        }
        Ok(Self {
            height,
            width,
            normalized: false,
            scores,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }
}

/// Mirror an out-of-range index about the nearest edge pixel.
fn reflect(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Biased mean and covariance of `count` stacked c-vectors.
fn window_moments(samples: &[f64], channels: usize, mean: &mut [f64], cov: &mut [f64]) {
    let count = samples.len() / channels;
    let inv = 1.0 / count as f64;
    mean.fill(0.0);
    for s in samples.chunks_exact(channels) {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv;
    }
    cov.fill(0.0);
    for s in samples.chunks_exact(channels) {
        for a in 0..channels {
            let da = s[a] - mean[a];
            for b in a..channels {
                cov[a * channels + b] += da * (s[b] - mean[b]);
            }
        }
    }
    for a in 0..channels {
        for b in a..channels {
            let v = cov[a * channels + b] * inv;
            cov[a * channels + b] = v;
            cov[b * channels + a] = v;
        }
    }
}

/// Per-pixel sample mean vector and sample covariance matrix over a
/// (2k+1)-sided boxcar with mirrored boundaries. Both use the biased
/// 1/|B| normalization.
pub fn local_moments(img: &SarImage, k: usize) -> Result<(SarImage, CovarianceField)> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let side = 2 * k + 1;
    if side > h || side > w {
        return Err(Error::WindowTooLarge {
            side,
            height: h,
            width: w,
        });
    }
    let mut means = vec![0.0; h * w * c];
    let mut covs = vec![0.0; h * w * c * c];
    let mut samples = Vec::with_capacity(side * side * c);
    let mut mean = vec![0.0; c];
    let mut cov = vec![0.0; c * c];
    for r in 0..h {
        for col in 0..w {
            samples.clear();
            for dr in -(k as isize)..=k as isize {
                let rr = reflect(r as isize + dr, h);
                for dc in -(k as isize)..=k as isize {
                    let cc = reflect(col as isize + dc, w);
                    for ch in 0..c {
                        samples.push(img.get(rr, cc, ch));
                    }
                }
            }
            window_moments(&samples, c, &mut mean, &mut cov);
            let mbase = (r * w + col) * c;
            means[mbase..mbase + c].copy_from_slice(&mean);
            let cbase = (r * w + col) * c * c;
            covs[cbase..cbase + c * c].copy_from_slice(&cov);
        }
    }
    let mean_field = SarImage::new(h, w, c, means, img.domain())?;
    Ok((
        mean_field,
        CovarianceField {
            height: h,
            width: w,
            channels: c,
            k,
            boundary: Boundary::Reflect,
            data: covs,
        },
    ))
}

/// Squared Frobenius distance between the local covariance fields of an
/// image and of its reconstruction, per pixel. Raw (unnormalized) map.
pub fn anomaly_map_frobenius(x: &SarImage, x_hat: &SarImage, k: usize) -> Result<AnomalyMap> {
    crate::image::expect_domain(x, Domain::NormalizedLog)?;
    crate::image::expect_domain(x_hat, Domain::NormalizedLog)?;
    if x.height() != x_hat.height() || x.width() != x_hat.width() || x.channels() != x_hat.channels()
    {
        return Err(Error::ShapeMismatch {
            context: "image and reconstruction must share one shape".into(),
        });
    }
    let (_, cov_x) = local_moments(x, k)?;
    let (_, cov_xh) = local_moments(x_hat, k)?;
    let scores = cov_x
        .data
        .chunks_exact(x.channels() * x.channels())
        .zip(cov_xh.data.chunks_exact(x.channels() * x.channels()))
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum())
        .collect();
    AnomalyMap::new_raw(x.height(), x.width(), scores)
}

/// Per-pixel mean absolute channel difference. Raw (unnormalized) map.
pub fn anomaly_map_l1(x: &SarImage, x_hat: &SarImage) -> Result<AnomalyMap> {
    if x.height() != x_hat.height() || x.width() != x_hat.width() || x.channels() != x_hat.channels()
    {
        return Err(Error::ShapeMismatch {
            context: "image and reconstruction must share one shape".into(),
        });
    }
    let c = x.channels() as f64;
    let scores = x
        .data()
        .chunks_exact(x.channels())
        .zip(x_hat.data().chunks_exact(x.channels()))
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>() / c)
        .collect();
    AnomalyMap::new_raw(x.height(), x.width(), scores)
}

/// Affine min-max rescale of the scores to [0, 1]. A constant raw map
/// carries no detections and maps to all zeros.
pub fn normalize_map(raw: &AnomalyMap) -> AnomalyMap {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &s in &raw.scores {
        min = min.min(s);
        max = max.max(s);
    }
    let scores = if max > min {
        let inv = 1.0 / (max - min);
        raw.scores.iter().map(|&s| (s - min) * inv).collect()
    } else {
        vec![0.0; raw.scores.len()]
    };
    AnomalyMap {
        height: raw.height,
        width: raw.width,
        normalized: true,
        scores,
    }
}

/// Hermitian quadratic form d^H S^{-1} d via one linear solve; the
/// imaginary part vanishes by construction and is dropped.
fn quadform(diff: &[Complex64], cov: &[Complex64], c: usize) -> Result<f64> {
    let y = solve_complex(cov, diff, c)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (d, v) in diff.iter().zip(&y) {
        acc += d.conj() * v;
    }
    Ok(acc.re)
}

/// Complex RX detector: Mahalanobis distance of each pixel from the
/// moments of its surrounding window, with an inner guard window
/// excluded so anomalous pixels do not contaminate the estimates.
/// Raw (unnormalized) map.
pub fn rx_map(img: &ComplexSlcImage, outer: usize, guard: usize) -> Result<AnomalyMap> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if outer % 2 == 0 || guard % 2 == 0 {
        return Err(Error::Config("RX windows must have odd sides".into()));
    }
    if guard >= outer {
        return Err(Error::GuardTooLarge);
    }
    if outer > h || outer > w {
        return Err(Error::WindowTooLarge {
            side: outer,
            height: h,
            width: w,
        });
    }
    let ko = (outer / 2) as isize;
    let kg = (guard / 2) as isize;
    let count = outer * outer - guard * guard;
    let mut scores = Vec::with_capacity(h * w);
    let mut mean = vec![Complex64::new(0.0, 0.0); c];
    let mut cov = vec![Complex64::new(0.0, 0.0); c * c];
    let mut diff = vec![Complex64::new(0.0, 0.0); c];
    for r in 0..h {
        for col in 0..w {
            for m in mean.iter_mut() {
                *m = Complex64::new(0.0, 0.0);
            }
            for v in cov.iter_mut() {
                *v = Complex64::new(0.0, 0.0);
            }
            for dr in -ko..=ko {
                for dc in -ko..=ko {
                    if dr.abs() <= kg && dc.abs() <= kg {
                        continue;
                    }
                    let rr = reflect(r as isize + dr, h);
                    let cc = reflect(col as isize + dc, w);
                    for (ch, m) in mean.iter_mut().enumerate() {
                        *m += img.get(rr, cc, ch);
                    }
                }
            }
            let inv = 1.0 / count as f64;
            for m in mean.iter_mut() {
                *m *= inv;
            }
            for dr in -ko..=ko {
                for dc in -ko..=ko {
                    if dr.abs() <= kg && dc.abs() <= kg {
                        continue;
                    }
                    let rr = reflect(r as isize + dr, h);
                    let cc = reflect(col as isize + dc, w);
                    for a in 0..c {
                        let da = img.get(rr, cc, a) - mean[a];
                        for b in 0..c {
                            cov[a * c + b] += da * (img.get(rr, cc, b) - mean[b]).conj();
                        }
                    }
                }
            }
            let mut trace = 0.0;
            for a in 0..c {
                for b in 0..c {
                    cov[a * c + b] *= inv;
                }
                trace += cov[a * c + a].re;
            }
            let ridge = RX_REGULARIZATION * trace / c as f64;
            for a in 0..c {
                cov[a * c + a] += Complex64::new(ridge, 0.0);
            }
            for (ch, d) in diff.iter_mut().enumerate() {
                *d = img.get(r, col, ch) - mean[ch];
            }
            let score = quadform(&diff, &cov, c).map_err(|e| match e {
                Error::SingularSystem => Error::SingularMatrix { row: r, col },
                other => other,
            })?;
            scores.push(score);
        }
    }
    AnomalyMap::new_raw(h, w, scores)
}

/// Full detection chain: despeckle, normalize with the bounds stored in
/// the autoencoder bundle, reconstruct, compare covariance fields, and
/// rescale the scores to [0, 1].
pub fn detect_pipeline(
    x_noisy: &SarImage,
    despeckler: &ModelBundle,
    aae: &AaeBundle,
    k: usize,
) -> Result<AnomalyMap> {
    let x_log = despeckle(despeckler, x_noisy)?;
    let x = normalize_with(&x_log, aae.norm_min, aae.norm_max)?;
    let x_hat = reconstruct_image(aae, &x)?;
    let raw = anomaly_map_frobenius(&x, &x_hat, k)?;
    Ok(normalize_map(&raw))
}
