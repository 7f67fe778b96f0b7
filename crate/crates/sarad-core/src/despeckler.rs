//! Self-supervised despeckling on log-intensity images.
//!
//! Training runs in three phases: A uses synthetic speckle pairs over a
//! clean reference, B and C use pairs of acquisition dates with change
//! compensation (B with 2x sub-sampled inference, C at full size). The
//! loss is the speckle negative log-likelihood of the target given the
//! prediction, whose minimizer is the clean log-reflectivity, so no bias
//! correction of the log-domain noise mean is needed.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use crate::error::{Error, Result};
use crate::image::{
    crop, expect_domain, log_transform, stitch_patches, Domain, Patch, SarImage,
    DEFAULT_LOG_EPSILON,
};
use crate::nn::{LayerSpec, LrSchedule, ModelBundle, Tensor};
use crate::rng::{derive_seed, CounterRng};
use crate::speckle::{apply_speckle_log, render_clean, SceneSpec};

/// Training phase tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
    C,
}

impl core::fmt::Display for Phase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        })
    }
}

/// An input/target pair of log-intensity images.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub y1: SarImage,
    pub y2: SarImage,
    pub phase: Phase,
}

/// Co-registered acquisitions of one scene, optionally with a clean
/// reference for phase A. Everything is single-channel log intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionStack {
    acquisitions: Vec<SarImage>,
    clean: Option<SarImage>,
}

impl AcquisitionStack {
    pub fn new(acquisitions: Vec<SarImage>, clean: Option<SarImage>) -> Result<Self> {
        let first = acquisitions.first().ok_or(Error::EmptyDataset)?;
        let (h, w) = (first.height(), first.width());
        for img in acquisitions.iter().chain(&clean) {
            expect_domain(img, Domain::LogIntensity)?;
            if img.channels() != 1 {
                return Err(Error::ChannelCount {
                    expected: 1,
                    got: img.channels(),
                });
            }
            if img.height() != h || img.width() != w {
                return Err(Error::ShapeMismatch {
                    context: "stack acquisitions must share one shape".into(),
                });
            }
        }
        Ok(Self {
            acquisitions,
            clean,
        })
    }

    pub fn len(&self) -> usize {
        self.acquisitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acquisitions.is_empty()
    }

    pub fn date(&self, index: usize) -> &SarImage {
        &self.acquisitions[index]
    }

    pub fn clean(&self) -> Option<&SarImage> {
        self.clean.as_ref()
    }

    pub fn height(&self) -> usize {
        self.acquisitions[0].height()
    }

    pub fn width(&self) -> usize {
        self.acquisitions[0].width()
    }
}

/// Upper clamp on the exponent inside the loss, so early training cannot
/// overflow; the gradient passes through the clamped value.
pub const LOSS_EXP_CLAMP: f64 = 50.0;

/// Speckle negative log-likelihood of `target` under `prediction`, summed
/// over elements, with its gradient with respect to the prediction.
///
/// Per element with d = target - prediction: loss = -d + exp(d) and
/// gradient = 1 - exp(d). The per-element minimum is 1 at d = 0.
pub fn loss_speck(prediction: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if prediction.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            context: "loss operands must have one shape".into(),
        });
    }
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(prediction.shape().to_vec());
    let gd = grad.data_mut();
    for (k, (&f, &t)) in prediction.data().iter().zip(target.data()).enumerate() {
        if !f.is_finite() || !t.is_finite() {
            return Err(Error::NonFinite { index: k });
        }
        let d = (t - f).min(LOSS_EXP_CLAMP);
        let e = d.exp();
        loss += f - t + e;
        gd[k] = 1.0 - e;
    }
    Ok((loss, grad))
}

/// Layer stack of the despeckler: `depth` convolutions of `width`
/// channels (3x3, stride 1, padded), single channel in and out, leaky
/// activations between, linear output. The net predicts the clean
/// log-image directly.
pub fn despeckler_specs(width: usize, depth: usize) -> Vec<LayerSpec> {
    debug_assert!(depth >= 2 && width >= 1);
    let conv = |ci: usize, co: usize| LayerSpec::Conv2d {
        in_channels: ci,
        out_channels: co,
        kernel: 3,
        stride: 1,
        padding: 1,
    };
    let mut specs = Vec::with_capacity(2 * depth - 1);
    specs.push(conv(1, width));
    for _ in 0..depth - 2 {
        specs.push(LayerSpec::LeakyRelu { slope: 0.1 });
        specs.push(conv(width, width));
    }
    specs.push(LayerSpec::LeakyRelu { slope: 0.1 });
    specs.push(conv(width, 1));
    specs
}

pub fn new_despeckler(width: usize, depth: usize, seed: u64) -> ModelBundle {
    ModelBundle::new(&despeckler_specs(width, depth), seed)
}

fn image_to_batch(img: &SarImage) -> Result<Tensor> {
    Tensor::new(
        vec![1, img.height(), img.width(), 1],
        img.data().to_vec(),
    )
}

/// Runs the despeckler on one single-channel log image.
fn infer_log_image(model: &ModelBundle, img: &SarImage) -> Result<SarImage> {
    let out = model.infer(&image_to_batch(img)?)?;
    SarImage::new(
        img.height(),
        img.width(),
        1,
        out.into_data(),
        Domain::LogIntensity,
    )
}

/// Every other pixel in both directions.
fn decimate2(img: &SarImage) -> SarImage {
    let (h, w) = (img.height().div_ceil(2), img.width().div_ceil(2));
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            data.push(img.get(2 * r, 2 * c, 0));
        }
    }
    SarImage::new(h, w, 1, data, img.domain()).expect("decimated values come from a valid image")
}

/// Nearest-neighbor expansion back to (h, w) after [`decimate2`].
fn expand2_nn(img: &SarImage, h: usize, w: usize) -> SarImage {
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            data.push(img.get(r / 2, c / 2, 0));
        }
    }
    SarImage::new(h, w, 1, data, img.domain()).expect("expanded values come from a valid image")
}

/// Despeckled estimate used by change compensation: inference on the 2x
/// decimated image re-expanded to full size when `subsampled`, plain
/// inference otherwise.
fn compensation_estimate(
    model: &ModelBundle,
    img: &SarImage,
    subsampled: bool,
) -> Result<SarImage> {
    if subsampled {
        let small = infer_log_image(model, &decimate2(img))?;
        Ok(expand2_nn(&small, img.height(), img.width()))
    } else {
        infer_log_image(model, img)
    }
}

/// Phase-A pair: the clean log image under two independent synthetic
/// speckle fields drawn from child streams of `rng`.
pub fn make_pairs_phase_a(clean: &SarImage, rng: &CounterRng) -> Result<TrainingPair> {
    expect_domain(clean, Domain::LogIntensity)?;
    let y1 = apply_speckle_log(clean, &rng.child(0))?;
    let y2 = apply_speckle_log(clean, &rng.child(1))?;
    Ok(TrainingPair {
        y1,
        y2,
        phase: Phase::A,
    })
}

/// Phase-B/C pair from dates n and m of a stack: y1 is the date-n image;
/// y2 is the date-m image with its despeckled content swapped for date
/// n's, so it carries date-m speckle over date-n reflectivity.
pub fn make_pairs_change_compensated(
    stack: &AcquisitionStack,
    n: usize,
    m: usize,
    model: &ModelBundle,
    subsampled: bool,
) -> Result<TrainingPair> {
    if stack.len() < 2 {
        return Err(Error::StackTooSmall {
            min: 2,
            got: stack.len(),
        });
    }
    if n >= stack.len() || m >= stack.len() || n == m {
        return Err(Error::Config(alloc::format!(
            "change compensation needs two distinct dates, got {n} and {m} of {}",
            stack.len()
        )));
    }
    let y_tn = stack.date(n);
    let y_tm = stack.date(m);
    let f_m = compensation_estimate(model, y_tm, subsampled)?;
    let f_n = compensation_estimate(model, y_tn, subsampled)?;
    // Grouped so identical dates (or a zero model) cancel bit-exactly.
    let data: Vec<f64> = y_tm
        .data()
        .iter()
        .zip(f_m.data())
        .zip(f_n.data())
        .map(|((&ym, &fm), &fn_)| ym - (fm - fn_))
        .collect();
    let y2 = SarImage::new(
        y_tm.height(),
        y_tm.width(),
        1,
        data,
        Domain::LogIntensity,
    )?;
    Ok(TrainingPair {
        y1: y_tn.clone(),
        y2,
        phase: if subsampled { Phase::B } else { Phase::C },
    })
}

/// Training configuration with desk-scale defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct DespeckleTrainConfig {
    pub seed: u64,
    pub patch: usize,
    pub batch: usize,
    pub epochs_a: usize,
    pub epochs_b: usize,
    pub epochs_c: usize,
    pub batches_per_epoch: usize,
    pub width: usize,
    pub depth: usize,
    pub lr: LrSchedule,
}

impl DespeckleTrainConfig {
    /// Desk-scale defaults: 64-pixel patches, batch 16, phases 5/3/3, a
    /// 6-layer width-12 net, and a cyclical rate spanning two full
    /// triangles over the run.
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            patch: 64,
            batch: 16,
            epochs_a: 5,
            epochs_b: 3,
            epochs_c: 3,
            batches_per_epoch: 12,
            width: 12,
            depth: 6,
            lr: LrSchedule::new(1e-3, 1e-2, 33).expect("static bounds are valid"),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.patch == 0
            || self.batch == 0
            || self.batches_per_epoch == 0
            || self.width == 0
            || self.depth < 2
        {
            return Err(Error::Config(
                "patch, batch, batches per epoch, width must be positive; depth at least 2"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One optimizer step in the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub batch: usize,
    pub phase: Phase,
    pub lr: f64,
    pub loss: f64,
}

// Purpose tags for seed derivation (shared root seed, disjoint streams).
const SEED_MODEL: u64 = 1;
const SEED_SAMPLER: u64 = 2;
const SEED_FIELDS: u64 = 3;
// Stream bases inside a scene seed; render_clean owns stream 0.
const STREAM_DATE_BASE: u64 = 0x0100_0000_0000;
const STREAM_LOOK_BASE: u64 = 0x0200_0000_0000;

/// Simulates an acquisition stack for one scene: `dates` independent
/// speckle realizations of the given channel, plus a clean reference
/// averaged from `clean_looks` further realizations in linear intensity.
pub fn simulate_stack(
    spec: &SceneSpec,
    dates: usize,
    clean_looks: usize,
    channel: usize,
) -> Result<AcquisitionStack> {
    if dates == 0 || clean_looks == 0 {
        return Err(Error::Config(
            "stack needs at least one date and one clean look".into(),
        ));
    }
    let clean_linear = render_clean(spec)?.channel(channel)?;
    let clean_log = log_transform(&clean_linear, DEFAULT_LOG_EPSILON)?;
    let acquisitions = (0..dates)
        .map(|d| {
            let rng = CounterRng::substream(spec.seed, STREAM_DATE_BASE + d as u64);
            apply_speckle_log(&clean_log, &rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut avg = vec![0.0f64; clean_linear.data().len()];
    for look in 0..clean_looks {
        let rng = CounterRng::substream(spec.seed, STREAM_LOOK_BASE + look as u64);
        for (k, (&r, a)) in clean_linear.data().iter().zip(avg.iter_mut()).enumerate() {
            *a += r * rng.exp1_at(k as u64);
        }
    }
    let inv = 1.0 / clean_looks as f64;
    for a in &mut avg {
        *a *= inv;
    }
    let avg_linear = SarImage::new(
        clean_linear.height(),
        clean_linear.width(),
        1,
        avg,
        Domain::LinearIntensity,
    )?;
    let clean_ref = log_transform(&avg_linear, DEFAULT_LOG_EPSILON)?;
    AcquisitionStack::new(acquisitions, Some(clean_ref))
}

/// Runs phases A, B and C over the stacks and returns the trained model
/// with the per-batch loss log.
pub fn train_despeckler(
    stacks: &[AcquisitionStack],
    config: &DespeckleTrainConfig,
) -> Result<(ModelBundle, Vec<TrainLogRow>)> {
    config.validate()?;
    if stacks.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = new_despeckler(
        config.width,
        config.depth,
        derive_seed(config.seed, SEED_MODEL),
    );
    let mut sampler = CounterRng::new(derive_seed(config.seed, SEED_SAMPLER));
    let fields = CounterRng::new(derive_seed(config.seed, SEED_FIELDS));
    let mut field_count = 0u64;
    let mut log = Vec::new();
    let mut global_batch = 0usize;

    let phases = [
        (Phase::A, config.epochs_a),
        (Phase::B, config.epochs_b),
        (Phase::C, config.epochs_c),
    ];
    for (phase, epochs) in phases {
        for _epoch in 0..epochs {
            for _ in 0..config.batches_per_epoch {
                let mut xs = Vec::new();
                let mut ts = Vec::new();
                let mut patch_side = config.patch;
                for _ in 0..config.batch {
                    let stack = &stacks[sampler.next_index(stacks.len())];
                    let pair = match phase {
                        Phase::A => {
                            let clean = stack.clean().ok_or_else(|| {
                                Error::Config("phase A needs a clean reference".into())
                            })?;
                            let rng = fields.child(field_count);
                            field_count += 1;
                            make_pairs_phase_a(clean, &rng)?
                        }
                        Phase::B | Phase::C => {
                            if stack.len() < 2 {
                                return Err(Error::StackTooSmall {
                                    min: 2,
                                    got: stack.len(),
                                });
                            }
                            let n = sampler.next_index(stack.len());
                            let m = (n + 1 + sampler.next_index(stack.len() - 1)) % stack.len();
                            make_pairs_change_compensated(
                                stack,
                                n,
                                m,
                                &model,
                                phase == Phase::B,
                            )?
                        }
                    };
                    let (h, w) = (pair.y1.height(), pair.y1.width());
                    let side = config.patch.min(h).min(w);
                    patch_side = side;
                    let r0 = sampler.next_index(h - side + 1);
                    let c0 = sampler.next_index(w - side + 1);
                    xs.extend_from_slice(crop(&pair.y1, r0, c0, side)?.image.data());
                    ts.extend_from_slice(crop(&pair.y2, r0, c0, side)?.image.data());
                }
                let shape = vec![config.batch, patch_side, patch_side, 1];
                let x = Tensor::new(shape.clone(), xs)?;
                let t = Tensor::new(shape, ts)?;
                let (pred, cache) = model.forward(&x)?;
                let (loss_sum, grad) = loss_speck(&pred, &t)?;
                let scale = 1.0 / pred.len() as f64;
                let loss = loss_sum * scale;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        batch: global_batch,
                    });
                }
                let grad = grad.map(|v| v * scale);
                let (grads, _) = model.backward(&cache, &grad)?;
                let lr = config.lr.lr_at(global_batch as u64);
                model.adam_step(&grads, lr)?;
                log.push(TrainLogRow {
                    batch: global_batch,
                    phase,
                    lr,
                    loss,
                });
                global_batch += 1;
            }
        }
    }
    Ok((model, log))
}

/// Inference patch side at desk scale.
pub const DESPECKLE_PATCH: usize = 64;

/// Stride between inference patches; overlaps are averaged at stitching.
pub const DESPECKLE_STRIDE: usize = 48;

/// Despeckles a log-intensity image of any channel count; each channel
/// runs through the single-channel model patch-wise and is restitched.
pub fn despeckle(model: &ModelBundle, img: &SarImage) -> Result<SarImage> {
    expect_domain(img, Domain::LogIntensity)?;
    let side = DESPECKLE_PATCH.min(img.height()).min(img.width());
    let stride = (side * DESPECKLE_STRIDE / DESPECKLE_PATCH).max(1);
    let mut channels = Vec::with_capacity(img.channels());
    for ch in 0..img.channels() {
        let chan = img.channel(ch)?;
        let patches = crate::image::extract_patches(&chan, side, stride)?;
        let processed = patches
            .iter()
            .map(|p| {
                Ok(Patch {
                    origin: p.origin,
                    image: infer_log_image(model, &p.image)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        channels.push(stitch_patches(&processed, img.height(), img.width())?);
    }
    SarImage::from_channels(&channels)
}
