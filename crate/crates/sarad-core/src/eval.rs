//! Benchmark scenes with known anomalies and ROC/AUC scoring.
//!
//! Synthetic test patterns of graded intensity are stamped into a clean
//! reflectivity image, the scene is speckled, and every detector is
//! scored by the area under its ROC curve against the pattern mask.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use crate::aae::AaeBundle;
use crate::detect::{
    anomaly_map_frobenius, anomaly_map_l1, detect_pipeline, normalize_map, rx_map, AnomalyMap,
};
use crate::error::{Error, Result};
use crate::image::{
    log_transform, merge_cross_pol, normalize_with, ComplexSlcImage, SarImage,
    DEFAULT_LOG_EPSILON,
};
use crate::nn::ModelBundle;
use crate::rng::CounterRng;
use crate::speckle::{render_clean, sample_slc, SceneSpec, Segment};

/// Shape of one embedded test pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternShape {
    /// Filled square of side 2 * size + 1.
    Square,
    /// One-pixel-wide cross with arms of length `size`.
    Cross,
    /// Filled diamond: |dr| + |dc| <= size.
    Diamond,
}

/// A pattern stamped at a center position with a flat reflectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pattern {
    pub shape: PatternShape,
    pub row: usize,
    pub col: usize,
    pub size: usize,
    pub intensity: f64,
}

impl Pattern {
    fn covers(&self, dr: isize, dc: isize) -> bool {
        let s = self.size as isize;
        match self.shape {
            PatternShape::Square => dr.abs() <= s && dc.abs() <= s,
            PatternShape::Cross => (dr == 0 && dc.abs() <= s) || (dc == 0 && dr.abs() <= s),
            PatternShape::Diamond => dr.abs() + dc.abs() <= s,
        }
    }

    /// Number of pixels the shape covers.
    pub fn area(&self) -> usize {
        let s = self.size;
        match self.shape {
            PatternShape::Square => (2 * s + 1) * (2 * s + 1),
            PatternShape::Cross => 4 * s + 1,
            PatternShape::Diamond => 2 * s * (s + 1) + 1,
        }
    }
}

/// Largest tolerated anomaly fraction of a labeled scene; the method's
/// premise is that anomalies are rare.
pub const MAX_ANOMALY_FRACTION: f64 = 0.05;

/// A speckled scene with the ground-truth anomaly mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    slc: ComplexSlcImage,
    clean: SarImage,
    labels: Vec<bool>,
    patterns: Vec<Pattern>,
}

impl LabeledScene {
    pub fn new(
        slc: ComplexSlcImage,
        clean: SarImage,
        labels: Vec<bool>,
        patterns: Vec<Pattern>,
    ) -> Result<Self> {
        let (h, w) = (clean.height(), clean.width());
        if slc.height() != h || slc.width() != w || labels.len() != h * w {
            return Err(Error::ShapeMismatch {
                context: "scene, mask and clean image must share one spatial shape".into(),
            });
        }
        let positives = labels.iter().filter(|&&l| l).count();
        if positives == 0 {
            return Err(Error::SingleClassLabels);
        }
        let fraction = positives as f64 / labels.len() as f64;
        if fraction >= MAX_ANOMALY_FRACTION {
            return Err(Error::Config(alloc::format!(
                "anomaly fraction {fraction:.4} breaks the rarity premise"
            )));
        }
        Ok(Self {
            slc,
            clean,
            labels,
            patterns,
        })
    }

    pub fn slc(&self) -> &ComplexSlcImage {
        &self.slc
    }

    pub fn clean(&self) -> &SarImage {
        &self.clean
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn height(&self) -> usize {
        self.clean.height()
    }

    pub fn width(&self) -> usize {
        self.clean.width()
    }

    /// Merged three-channel log-intensity view of the speckled scene,
    /// the input expected by the despeckler chain.
    pub fn noisy_log(&self) -> Result<SarImage> {
        log_transform(
            &merge_cross_pol(&self.slc.intensity())?,
            DEFAULT_LOG_EPSILON,
        )
    }
}

/// Overwrites the clean reflectivity with the pattern intensities on all
/// channels and returns the modified image with the label mask. Pixels
/// outside every pattern are left bit-identical.
pub fn embed_anomalies(
    clean: &SarImage,
    patterns: &[Pattern],
) -> Result<(SarImage, Vec<bool>)> {
    let (h, w) = (clean.height(), clean.width());
    let mut labels = vec![false; h * w];
    let mut owner: Vec<usize> = vec![usize::MAX; h * w];
    let mut data = clean.data().to_vec();
    for (p, pattern) in patterns.iter().enumerate() {
        let s = pattern.size as isize;
        for dr in -s..=s {
            for dc in -s..=s {
                if !pattern.covers(dr, dc) {
                    continue;
                }
                let r = pattern.row as isize + dr;
                let c = pattern.col as isize + dc;
                if r < 0 || c < 0 || r as usize >= h || c as usize >= w {
                    return Err(Error::PatternOutOfBounds { index: p });
                }
                let px = r as usize * w + c as usize;
                if owner[px] != usize::MAX {
                    return Err(Error::PatternOverlap {
                        first: owner[px],
                        second: p,
                    });
                }
                owner[px] = p;
                labels[px] = true;
                for ch in 0..clean.channels() {
                    data[px * clean.channels() + ch] = pattern.intensity;
                }
            }
        }
    }
    let embedded = SarImage::new(h, w, clean.channels(), data, clean.domain())?;
    Ok((embedded, labels))
}

/// Receiver operating characteristic with its area under the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
    auc: f64,
}

impl RocCurve {
    /// (false-positive rate, true-positive rate) per distinct threshold,
    /// from (0, 0) to (1, 1).
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn auc(&self) -> f64 {
        self.auc
    }
}

/// ROC curve over all distinct score thresholds and the rank-statistic
/// AUC (ties credited one half), which equals the trapezoidal area under
/// the swept curve.
pub fn roc_auc(map: &AnomalyMap, labels: &[bool]) -> Result<RocCurve> {
    let scores = map.scores();
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "score map and label mask must have one length".into(),
        });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Threshold sweep, descending; one curve point per distinct score.
    let mut points = Vec::new();
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }

    // Mann-Whitney rank statistic on the ascending order with average
    // ranks inside tie groups.
    let mut rank_sum = 0.0;
    let mut j = order.len();
    let mut rank = 1.0;
    while j > 0 {
        let mut k = j;
        let threshold = scores[order[j - 1]];
        while k > 0 && scores[order[k - 1]] == threshold {
            k -= 1;
        }
        let tied = (j - k) as f64;
        let avg_rank = rank + (tied - 1.0) / 2.0;
        for &px in &order[k..j] {
            if labels[px] {
                rank_sum += avg_rank;
            }
        }
        rank += tied;
        j = k;
    }
    let pos_f = pos as f64;
    let auc = (rank_sum - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64);
    Ok(RocCurve { points, auc })
}

/// Trapezoidal area under a ROC curve's points.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Detectors compared on the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Covariance-distance map on the despeckled reconstruction chain.
    Covariance,
    /// Same chain fed the noisy image, skipping the despeckler.
    CovarianceNoisy,
    /// Per-pixel reconstruction error.
    L1,
    /// Complex RX with guard cells.
    Rx,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Covariance => "covariance",
            Method::CovarianceNoisy => "covariance_noisy",
            Method::L1 => "l1",
            Method::Rx => "rx",
        }
    }

    pub fn all() -> [Method; 4] {
        [
            Method::Covariance,
            Method::CovarianceNoisy,
            Method::L1,
            Method::Rx,
        ]
    }
}

/// One benchmark table row: the method, its normalized map, its curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub method: Method,
    pub map: AnomalyMap,
    pub roc: RocCurve,
}

/// Produces one method's normalized anomaly map for the scene, running
/// the method's full chain from the noisy observation.
pub fn run_method(
    scene: &LabeledScene,
    method: Method,
    despeckler: &ModelBundle,
    aae: &AaeBundle,
    k: usize,
    rx_outer: usize,
    rx_guard: usize,
) -> Result<AnomalyMap> {
    let noisy_log = scene.noisy_log()?;
    match method {
        Method::Covariance => detect_pipeline(&noisy_log, despeckler, aae, k),
        Method::CovarianceNoisy => {
            let x = normalize_with(&noisy_log, aae.norm_min, aae.norm_max)?;
            let x_hat = crate::aae::reconstruct_image(aae, &x)?;
            Ok(normalize_map(&anomaly_map_frobenius(&x, &x_hat, k)?))
        }
        Method::L1 => {
            let x_log = crate::despeckler::despeckle(despeckler, &noisy_log)?;
            let x = normalize_with(&x_log, aae.norm_min, aae.norm_max)?;
            let x_hat = crate::aae::reconstruct_image(aae, &x)?;
            Ok(normalize_map(&anomaly_map_l1(&x, &x_hat)?))
        }
        Method::Rx => Ok(normalize_map(&rx_map(
            &scene.slc.merge_cross_pol()?,
            rx_outer,
            rx_guard,
        )?)),
    }
}

/// Runs every method on the scene and scores it against the mask.
pub fn benchmark_compare(
    scene: &LabeledScene,
    despeckler: &ModelBundle,
    aae: &AaeBundle,
    k: usize,
    rx_outer: usize,
    rx_guard: usize,
) -> Result<Vec<BenchmarkResult>> {
    let mut results = Vec::with_capacity(4);
    for method in Method::all() {
        let map = run_method(scene, method, despeckler, aae, k, rx_outer, rx_guard)?;
        let roc = roc_auc(&map, scene.labels())?;
        results.push(BenchmarkResult { method, map, roc });
    }
    Ok(results)
}

/// Side of the default benchmark scene.
pub const BENCHMARK_SIDE: usize = 256;

/// Pattern reflectivity levels, strongest first; the last sits below the
/// background mean.
pub const BENCHMARK_LEVELS: [f64; 3] = [8.0, 3.0, 0.5];

/// Stream id (inside a scene seed) that the observation SLC is drawn
/// from; disjoint from the texture, date and look streams.
pub const STREAM_BENCH_SLC: u64 = 0x0300_0000_0000;

/// Default benchmark: 256x256 quad-pol scene over a two-segment
/// background with nine patterns, three shapes at three graded
/// intensities, significance decreasing from top to bottom.
pub fn benchmark_scene(seed: u64) -> Result<LabeledScene> {
    benchmark_scene_sized(seed, BENCHMARK_SIDE, BENCHMARK_SIDE)
}

/// [`benchmark_scene`] stretched over an arbitrary canvas; the segment
/// split and the pattern grid scale with the dimensions.
pub fn benchmark_scene_sized(seed: u64, height: usize, width: usize) -> Result<LabeledScene> {
    labeled_scene_from_spec(
        &benchmark_background(seed, height, width),
        benchmark_patterns_sized(height, width),
    )
}

/// Background of the benchmark scene: quad-pol levels with a brighter
/// right half, no texture.
pub fn benchmark_background(seed: u64, height: usize, width: usize) -> SceneSpec {
    let mut spec = SceneSpec::uniform(height, width, 4, 1.0, seed);
    spec.base_levels = SceneSpec::quad_levels(1.0, 0.25, 0.7);
    spec.segments.push(Segment {
        row0: 0,
        col0: width / 2,
        row1: height,
        col1: width,
        levels: SceneSpec::quad_levels(2.0, 0.5, 1.4),
        texture_sigma: 0.0,
    });
    spec
}

/// Renders a background spec, embeds the patterns, and draws the
/// observation SLC from the scene's own stream.
pub fn labeled_scene_from_spec(spec: &SceneSpec, patterns: Vec<Pattern>) -> Result<LabeledScene> {
    let clean = render_clean(spec)?;
    let (embedded, labels) = embed_anomalies(&clean, &patterns)?;
    let slc = sample_slc(&embedded, &CounterRng::substream(spec.seed, STREAM_BENCH_SLC))?;
    LabeledScene::new(slc, embedded, labels, patterns)
}

/// The nine-pattern grid of [`benchmark_scene`]: rows carry intensity
/// levels, columns carry shapes.
pub fn benchmark_patterns(side: usize) -> Vec<Pattern> {
    benchmark_patterns_sized(side, side)
}

/// The pattern grid spread over a `height` x `width` canvas.
pub fn benchmark_patterns_sized(height: usize, width: usize) -> Vec<Pattern> {
    let shapes = [PatternShape::Square, PatternShape::Cross, PatternShape::Diamond];
    let mut patterns = Vec::with_capacity(9);
    for (i, &intensity) in BENCHMARK_LEVELS.iter().enumerate() {
        for (j, &shape) in shapes.iter().enumerate() {
            patterns.push(Pattern {
                shape,
                row: (i + 1) * height / 4,
                col: (j + 1) * width / 4,
                size: if shape == PatternShape::Cross { 3 } else { 2 },
                intensity,
            });
        }
    }
    patterns
}
