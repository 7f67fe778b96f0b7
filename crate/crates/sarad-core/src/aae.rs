//! Adversarial autoencoder for anomaly-free reconstruction.
//!
//! The encoder compresses normalized log patches to a latent vector, the
//! decoder rebuilds the patch, and a discriminator pushes the latent
//! distribution toward a standard normal prior. Trained on a scene where
//! anomalies are rare, the decoder reproduces recurrent structure only,
//! so anomalies come back attenuated.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math without std

use crate::error::{Error, Result};
use crate::image::{expect_domain, extract_patches, normalize_with, stitch_patches, Domain, Patch, SarImage};
use crate::nn::{LayerSpec, LrSchedule, ModelBundle, Tensor};
use crate::rng::{derive_seed, CounterRng};

/// Probability clamp applied before any adversarial logarithm.
pub const PROB_EPSILON: f64 = 1e-7;

/// Latent code of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: k });
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Encoder, decoder and discriminator with the patch geometry and the
/// dataset normalization bounds they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct AaeBundle {
    pub encoder: ModelBundle,
    pub decoder: ModelBundle,
    pub discriminator: ModelBundle,
    pub latent_dim: usize,
    pub patch: usize,
    pub channels: usize,
    pub norm_min: f64,
    pub norm_max: f64,
}

const SLOPE: f64 = 0.2;

fn conv_down(ci: usize, co: usize) -> LayerSpec {
    LayerSpec::Conv2d {
        in_channels: ci,
        out_channels: co,
        kernel: 4,
        stride: 2,
        padding: 1,
    }
}

fn conv_up(ci: usize, co: usize) -> LayerSpec {
    LayerSpec::TransposedConv2d {
        in_channels: ci,
        out_channels: co,
        kernel: 4,
        stride: 2,
        padding: 1,
    }
}

/// Three stride-2 halvings down to an 8x-reduced grid, then a dense
/// projection to the latent space. The closing tanh keeps latent
/// coordinates bounded so the adversarial game cannot diverge on scale
/// alone.
pub fn encoder_specs(patch: usize, channels: usize, latent: usize) -> Vec<LayerSpec> {
    let bottleneck = patch / 8;
    vec![
        conv_down(channels, 16),
        LayerSpec::LeakyRelu { slope: SLOPE },
        conv_down(16, 32),
        LayerSpec::LeakyRelu { slope: SLOPE },
        conv_down(32, 64),
        LayerSpec::LeakyRelu { slope: SLOPE },
        LayerSpec::Flatten,
        LayerSpec::Dense {
            input: bottleneck * bottleneck * 64,
            output: latent,
        },
        LayerSpec::Tanh,
    ]
}

/// Mirror of the encoder; the sigmoid keeps outputs inside the
/// normalized range.
pub fn decoder_specs(patch: usize, channels: usize, latent: usize) -> Vec<LayerSpec> {
    let bottleneck = patch / 8;
    vec![
        LayerSpec::Dense {
            input: latent,
            output: bottleneck * bottleneck * 64,
        },
        LayerSpec::Reshape {
            height: bottleneck,
            width: bottleneck,
            channels: 64,
        },
        LayerSpec::LeakyRelu { slope: SLOPE },
        conv_up(64, 32),
        LayerSpec::LeakyRelu { slope: SLOPE },
        conv_up(32, 16),
        LayerSpec::LeakyRelu { slope: SLOPE },
        conv_up(16, channels),
        LayerSpec::Sigmoid,
    ]
}

pub fn discriminator_specs(latent: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            input: latent,
            output: 64,
        },
        LayerSpec::LeakyRelu { slope: SLOPE },
        LayerSpec::Dense {
            input: 64,
            output: 32,
        },
        LayerSpec::LeakyRelu { slope: SLOPE },
        LayerSpec::Dense {
            input: 32,
            output: 1,
        },
        LayerSpec::Sigmoid,
    ]
}

const SEED_ENCODER: u64 = 11;
const SEED_DECODER: u64 = 12;
const SEED_DISCRIMINATOR: u64 = 13;
const SEED_SAMPLER: u64 = 14;
const SEED_PRIOR: u64 = 15;

/// Fresh bundle with normalization bounds defaulting to the identity
/// [0, 1] range; training replaces them with the dataset's.
pub fn new_aae(patch: usize, channels: usize, latent: usize, seed: u64) -> Result<AaeBundle> {
    if patch == 0 || patch % 8 != 0 {
        return Err(Error::Config(
            "patch side must be a positive multiple of 8".into(),
        ));
    }
    if channels == 0 || latent == 0 {
        return Err(Error::Config(
            "channel count and latent dimension must be positive".into(),
        ));
    }
    Ok(AaeBundle {
        encoder: ModelBundle::new(&encoder_specs(patch, channels, latent), derive_seed(seed, SEED_ENCODER)),
        decoder: ModelBundle::new(&decoder_specs(patch, channels, latent), derive_seed(seed, SEED_DECODER)),
        discriminator: ModelBundle::new(&discriminator_specs(latent), derive_seed(seed, SEED_DISCRIMINATOR)),
        latent_dim: latent,
        patch,
        channels,
        norm_min: 0.0,
        norm_max: 1.0,
    })
}

impl AaeBundle {
    /// Checks the bundle invariants on a zero probe patch: the decoder
    /// inverts the encoder's shape and the discriminator yields one
    /// probability per latent vector.
    pub fn validate(&self) -> Result<()> {
        let probe = Tensor::zeros(vec![1, self.patch, self.patch, self.channels]);
        let z = self.encoder.infer(&probe)?;
        if z.shape() != [1, self.latent_dim] {
            return Err(Error::ShapeMismatch {
                context: "encoder output is not one latent vector".into(),
            });
        }
        let back = self.decoder.infer(&z)?;
        if back.shape() != probe.shape() {
            return Err(Error::ShapeMismatch {
                context: "decoder does not invert the encoder shape".into(),
            });
        }
        let p = self.discriminator.infer(&z)?;
        if p.shape() != [1, 1] || !(0.0..=1.0).contains(&p.data()[0]) {
            return Err(Error::ShapeMismatch {
                context: "discriminator must map latents to one probability".into(),
            });
        }
        Ok(())
    }
}

/// Mean absolute error with its gradient with respect to the
/// reconstruction. The subgradient at zero deviation is zero.
pub fn loss_rec(x: &Tensor, x_hat: &Tensor) -> Result<(f64, Tensor)> {
    if x.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            context: "reconstruction loss operands must have one shape".into(),
        });
    }
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(x.shape().to_vec());
    let gd = grad.data_mut();
    for (k, (&a, &b)) in x.data().iter().zip(x_hat.data()).enumerate() {
        let d = b - a;
        loss += d.abs();
        gd[k] = if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((loss / n, grad))
}

fn clamp_prob(p: f64) -> f64 {
    p.max(PROB_EPSILON).min(1.0 - PROB_EPSILON)
}

/// Floor on the sigmoid derivative compensated for in the adversarial
/// gradients below, so a saturated discriminator still receives a
/// bounded, correctly signed update instead of a dead or exploding one.
const SIGMOID_DERIV_FLOOR: f64 = 1e-12;

/// Gradient of the binary cross-entropy with respect to the reported
/// probability, arranged so that after the discriminator's output
/// sigmoid multiplies by p(1-p) the effective logit gradient is
/// (p - label) / batch.
fn bce_prob_gradient(p: f64, label: f64, inv_b: f64) -> f64 {
    (p - label) * inv_b / (p * (1.0 - p)).max(SIGMOID_DERIV_FLOOR)
}

/// Discriminator and generator losses over one batch of probabilities.
///
/// The discriminator maximizes mean log D(z_real) + mean log(1 - D(z_fake));
/// the returned value is the negation, to be minimized. The generator loss
/// is the non-saturating form -mean log D(z_fake).
pub fn loss_adversarial(disc_real: &[f64], disc_fake: &[f64]) -> Result<(f64, f64)> {
    if disc_real.is_empty() || disc_fake.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mean_log_real = disc_real
        .iter()
        .map(|&p| clamp_prob(p).ln())
        .sum::<f64>()
        / disc_real.len() as f64;
    let mean_log_one_minus_fake = disc_fake
        .iter()
        .map(|&p| (1.0 - clamp_prob(p)).ln())
        .sum::<f64>()
        / disc_fake.len() as f64;
    let mean_log_fake = disc_fake
        .iter()
        .map(|&p| clamp_prob(p).ln())
        .sum::<f64>()
        / disc_fake.len() as f64;
    Ok((-(mean_log_real + mean_log_one_minus_fake), -mean_log_fake))
}

/// Losses reported by one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub rec: f64,
    pub disc: f64,
    pub gen: f64,
}

/// One two-phase update: reconstruction first, then the discriminator,
/// then the encoder as generator. `rng` supplies the prior draws.
pub fn train_step(
    bundle: &mut AaeBundle,
    batch: &Tensor,
    rng: &mut CounterRng,
    lr: f64,
) -> Result<StepLosses> {
    let shape = batch.shape();
    if shape.len() != 4
        || shape[1] != bundle.patch
        || shape[2] != bundle.patch
        || shape[3] != bundle.channels
    {
        return Err(Error::ShapeMismatch {
            context: "batch does not match the bundle patch shape".into(),
        });
    }
    let b = shape[0];

    // Reconstruction phase.
    let (z, enc_cache) = bundle.encoder.forward(batch)?;
    let (x_hat, dec_cache) = bundle.decoder.forward(&z)?;
    let (rec, g_xhat) = loss_rec(batch, &x_hat)?;
    let (dec_grads, g_z) = bundle.decoder.backward(&dec_cache, &g_xhat)?;
    let (enc_grads, _) = bundle.encoder.backward(&enc_cache, &g_z)?;
    bundle.decoder.adam_step(&dec_grads, lr)?;
    bundle.encoder.adam_step(&enc_grads, lr)?;

    // Discriminator phase: real prior draws against encoded patches.
    let z_fake = bundle.encoder.infer(batch)?;
    let mut prior = Vec::with_capacity(b * bundle.latent_dim);
    for _ in 0..b * bundle.latent_dim {
        prior.push(rng.next_normal());
    }
    let z_real = Tensor::new(vec![b, bundle.latent_dim], prior)?;
    let (p_real, real_cache) = bundle.discriminator.forward(&z_real)?;
    let (p_fake, fake_cache) = bundle.discriminator.forward(&z_fake)?;
    let (disc, _) = loss_adversarial(p_real.data(), p_fake.data())?;
    let inv_b = 1.0 / b as f64;
    let g_real = p_real.map(|p| bce_prob_gradient(p, 1.0, inv_b));
    let g_fake = p_fake.map(|p| bce_prob_gradient(p, 0.0, inv_b));
    let (mut disc_grads, _) = bundle.discriminator.backward(&real_cache, &g_real)?;
    let (fake_grads, _) = bundle.discriminator.backward(&fake_cache, &g_fake)?;
    disc_grads.add(&fake_grads)?;
    bundle.discriminator.adam_step(&disc_grads, lr)?;

    // Generator phase: encoder chases the updated discriminator.
    let (z_gen, enc_cache) = bundle.encoder.forward(batch)?;
    let (p_gen, gen_cache) = bundle.discriminator.forward(&z_gen)?;
    let (_, gen) = loss_adversarial(p_gen.data(), p_gen.data())?;
    let g_gen = p_gen.map(|p| bce_prob_gradient(p, 1.0, inv_b));
    let (_, g_z) = bundle.discriminator.backward(&gen_cache, &g_gen)?;
    let (enc_grads, _) = bundle.encoder.backward(&enc_cache, &g_z)?;
    bundle.encoder.adam_step(&enc_grads, lr)?;

    let losses = StepLosses { rec, disc, gen };
    if !(rec.is_finite() && disc.is_finite() && gen.is_finite()) {
        return Err(Error::NonFiniteLoss {
            batch: bundle.encoder.adam.step as usize,
        });
    }
    Ok(losses)
}

/// Training configuration with desk-scale defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct AaeTrainConfig {
    pub seed: u64,
    pub latent: usize,
    pub batch: usize,
    pub epochs: usize,
    pub lr_low: f64,
    pub lr_high: f64,
    /// Batches per full learning-rate triangle, expressed in epochs.
    pub cycle_epochs: usize,
}

impl AaeTrainConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            seed,
            latent: 64,
            batch: 32,
            epochs: 20,
            lr_low: 1e-3,
            lr_high: 1e-2,
            cycle_epochs: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.latent == 0 || self.batch == 0 || self.epochs == 0 || self.cycle_epochs == 0 {
            return Err(Error::Config(
                "latent, batch, epochs and cycle length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch training log entry; losses are means over the epoch and the
/// rate is the one used for its last batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AaeLogRow {
    pub epoch: usize,
    pub rec_loss: f64,
    pub disc_loss: f64,
    pub gen_loss: f64,
    pub lr: f64,
}

/// Global min-max normalization over a set of log images, returning the
/// normalized images with the shared bounds.
pub fn normalize_dataset(images: &[SarImage]) -> Result<(Vec<SarImage>, f64, f64)> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for img in images {
        expect_domain(img, Domain::LogIntensity)?;
        for &v in img.data() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if min >= max {
        return Err(Error::ConstantImage);
    }
    let normalized = images
        .iter()
        .map(|img| normalize_with(img, min, max))
        .collect::<Result<Vec<_>>>()?;
    Ok((normalized, min, max))
}

/// Collects training patches from normalized images.
pub fn patch_dataset(images: &[SarImage], patch: usize, stride: usize) -> Result<Vec<SarImage>> {
    let mut out = Vec::new();
    for img in images {
        expect_domain(img, Domain::NormalizedLog)?;
        out.extend(extract_patches(img, patch, stride)?.into_iter().map(|p| p.image));
    }
    Ok(out)
}

/// Trains an AAE on normalized patches. `norm` carries the dataset
/// min/max the patches were normalized with; it is stored in the bundle
/// so inference can reproduce the same mapping.
pub fn train_aae(
    patches: &[SarImage],
    norm: (f64, f64),
    config: &AaeTrainConfig,
) -> Result<(AaeBundle, Vec<AaeLogRow>)> {
    config.validate()?;
    let first = patches.first().ok_or(Error::EmptyDataset)?;
    let patch_side = first.height();
    if first.width() != patch_side {
        return Err(Error::ShapeMismatch {
            context: "training patches must be square".into(),
        });
    }
    for p in patches {
        expect_domain(p, Domain::NormalizedLog)?;
        if p.height() != patch_side || p.width() != patch_side || p.channels() != first.channels()
        {
            return Err(Error::ShapeMismatch {
                context: "training patches must share one shape".into(),
            });
        }
    }
    let mut bundle = new_aae(patch_side, first.channels(), config.latent, config.seed)?;
    bundle.norm_min = norm.0;
    bundle.norm_max = norm.1;

    let batches_per_epoch = (patches.len() / config.batch).max(1);
    let ramp = ((config.cycle_epochs * batches_per_epoch) / 2).max(1);
    let lr = LrSchedule::new(config.lr_low, config.lr_high, ramp as u64)?;
    let mut sampler = CounterRng::new(derive_seed(config.seed, SEED_SAMPLER));
    let mut prior = CounterRng::new(derive_seed(config.seed, SEED_PRIOR));
    let elems = patch_side * patch_side * first.channels();

    let mut log = Vec::with_capacity(config.epochs);
    let mut global_batch = 0u64;
    for epoch in 0..config.epochs {
        let (mut rec_sum, mut disc_sum, mut gen_sum) = (0.0, 0.0, 0.0);
        let mut last_lr = 0.0;
        for _ in 0..batches_per_epoch {
            let mut data = Vec::with_capacity(config.batch * elems);
            for _ in 0..config.batch {
                let pick = sampler.next_index(patches.len());
                data.extend_from_slice(patches[pick].data());
            }
            let batch = Tensor::new(
                vec![config.batch, patch_side, patch_side, first.channels()],
                data,
            )?;
            last_lr = lr.lr_at(global_batch);
            let losses = train_step(&mut bundle, &batch, &mut prior, last_lr).map_err(|e| {
                match e {
                    Error::NonFiniteLoss { .. } => Error::NonFiniteLoss {
                        batch: global_batch as usize,
                    },
                    other => other,
                }
            })?;
            rec_sum += losses.rec;
            disc_sum += losses.disc;
            gen_sum += losses.gen;
            global_batch += 1;
        }
        let inv = 1.0 / batches_per_epoch as f64;
        log.push(AaeLogRow {
            epoch,
            rec_loss: rec_sum * inv,
            disc_loss: disc_sum * inv,
            gen_loss: gen_sum * inv,
            lr: last_lr,
        });
    }
    Ok((bundle, log))
}

fn patch_to_batch(img: &SarImage) -> Result<Tensor> {
    Tensor::new(
        vec![1, img.height(), img.width(), img.channels()],
        img.data().to_vec(),
    )
}

/// Encodes one patch to its latent vector.
pub fn encode_patch(bundle: &AaeBundle, patch: &SarImage) -> Result<LatentVector> {
    expect_domain(patch, Domain::NormalizedLog)?;
    let z = bundle.encoder.infer(&patch_to_batch(patch)?)?;
    LatentVector::new(z.into_data())
}

/// Patch-wise encode/decode of a whole normalized image; overlapping
/// reconstructions are averaged.
pub fn reconstruct_image(bundle: &AaeBundle, img: &SarImage) -> Result<SarImage> {
    expect_domain(img, Domain::NormalizedLog)?;
    if img.channels() != bundle.channels {
        return Err(Error::ChannelCount {
            expected: bundle.channels,
            got: img.channels(),
        });
    }
    let stride = (bundle.patch / 4).max(1);
    let patches = extract_patches(img, bundle.patch, stride)?;
    let processed = patches
        .iter()
        .map(|p| {
            let z = bundle.encoder.infer(&patch_to_batch(&p.image)?)?;
            let out = bundle.decoder.infer(&z)?;
            Ok(Patch {
                origin: p.origin,
                image: SarImage::new(
                    bundle.patch,
                    bundle.patch,
                    bundle.channels,
                    out.into_data(),
                    Domain::NormalizedLog,
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    stitch_patches(&processed, img.height(), img.width())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_bundle() -> AaeBundle {
        new_aae(8, 1, 4, 3).unwrap()
    }

    fn patch_of(side: usize, rng: &CounterRng, salt: u64) -> SarImage {
        let data: Vec<f64> = (0..side * side)
            .map(|k| rng.f64_at(salt * 10_000 + k as u64))
            .collect();
        SarImage::new(side, side, 1, data, Domain::NormalizedLog).unwrap()
    }

    #[test]
    fn rec_loss_zero_on_equal_inputs() {
        let x = Tensor::new(vec![2, 2], vec![0.1, 0.9, 0.4, 0.2]).unwrap();
        let (loss, grad) = loss_rec(&x, &x).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rec_loss_unit_offset() {
        let x = Tensor::zeros(vec![3, 5]);
        let xh = x.map(|_| 1.0);
        let (loss, _) = loss_rec(&x, &xh).unwrap();
        assert!((loss - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rec_loss_single_deviation() {
        let x = Tensor::zeros(vec![4, 4]);
        let mut xh = x.clone();
        xh.data_mut()[5] = -0.25;
        let (loss, grad) = loss_rec(&x, &xh).unwrap();
        assert!((loss - 0.25 / 16.0).abs() < 1e-15);
        assert_eq!(grad.data()[5], -1.0 / 16.0);
        assert_eq!(grad.data()[0], 0.0);
    }

    #[test]
    fn rec_loss_is_symmetric_and_nonnegative() {
        let rng = CounterRng::substream(8, 1);
        let a = Tensor::new(vec![6], (0..6).map(|k| rng.f64_at(k)).collect::<Vec<_>>()).unwrap();
        let b = Tensor::new(vec![6], (6..12).map(|k| rng.f64_at(k)).collect::<Vec<_>>()).unwrap();
        let (lab, _) = loss_rec(&a, &b).unwrap();
        let (lba, _) = loss_rec(&b, &a).unwrap();
        assert_eq!(lab, lba);
        assert!(lab > 0.0);
    }

    #[test]
    fn rec_loss_gradient_matches_finite_differences() {
        let x = Tensor::new(vec![3], vec![0.2, 0.8, 0.5]).unwrap();
        let xh = Tensor::new(vec![3], vec![0.5, 0.3, 0.9]).unwrap();
        let (_, grad) = loss_rec(&x, &xh).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut plus = xh.clone();
            plus.data_mut()[k] += h;
            let mut minus = xh.clone();
            minus.data_mut()[k] -= h;
            let (lp, _) = loss_rec(&x, &plus).unwrap();
            let (lm, _) = loss_rec(&x, &minus).unwrap();
            assert!((grad.data()[k] - (lp - lm) / (2.0 * h)).abs() < 1e-9);
        }
    }

    #[test]
    fn adversarial_loss_at_half() {
        let (disc, gen) = loss_adversarial(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        // Objective log 0.5 + log 0.5 = -2 log 2; the loss is its negation.
        assert!((disc - 2.0 * core::f64::consts::LN_2).abs() < 1e-12);
        assert!((gen - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn adversarial_loss_perfect_discriminator() {
        let (disc, _) = loss_adversarial(&[1.0 - 1e-9], &[1e-9]).unwrap();
        assert!(disc.abs() < 1e-5);
    }

    #[test]
    fn adversarial_loss_clamps_extremes() {
        let (disc, gen) = loss_adversarial(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!(disc.is_finite() && gen.is_finite());
        assert!(loss_adversarial(&[], &[0.5]).is_err());
    }

    #[test]
    fn bundle_shapes_round_trip() {
        let bundle = tiny_bundle();
        bundle.validate().unwrap();
        let rng = CounterRng::substream(9, 0);
        let x = patch_to_batch(&patch_of(8, &rng, 0)).unwrap();
        let z = bundle.encoder.infer(&x).unwrap();
        assert_eq!(z.shape(), [1, 4]);
        let back = bundle.decoder.infer(&z).unwrap();
        assert_eq!(back.shape(), x.shape());
        assert!(back.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let p = bundle.discriminator.infer(&z).unwrap();
        assert_eq!(p.shape(), [1, 1]);
        assert!((0.0..1.0).contains(&p.data()[0]));
    }

    #[test]
    fn new_aae_rejects_bad_geometry() {
        assert!(new_aae(12, 1, 4, 0).is_err());
        assert!(new_aae(0, 1, 4, 0).is_err());
        assert!(new_aae(8, 0, 4, 0).is_err());
        assert!(new_aae(8, 1, 0, 0).is_err());
    }

    #[test]
    fn zero_rate_step_reports_losses_without_moving_parameters() {
        let mut bundle = tiny_bundle();
        let before = bundle.clone();
        let rng = CounterRng::substream(10, 0);
        let mut data = Vec::new();
        for s in 0..2 {
            data.extend_from_slice(patch_of(8, &rng, s).data());
        }
        let batch = Tensor::new(vec![2, 8, 8, 1], data).unwrap();
        let mut prior = CounterRng::new(5);
        let losses = train_step(&mut bundle, &batch, &mut prior, 0.0).unwrap();
        assert!(losses.rec.is_finite() && losses.disc.is_finite() && losses.gen.is_finite());
        assert!(losses.rec > 0.0);
        for (la, lb) in bundle.encoder.layers.iter().zip(&before.encoder.layers) {
            assert_eq!(la.params, lb.params);
        }
        for (la, lb) in bundle.discriminator.layers.iter().zip(&before.discriminator.layers) {
            assert_eq!(la.params, lb.params);
        }
        assert_eq!(bundle.encoder.adam.step, 2);
    }

    #[test]
    fn train_step_is_reproducible() {
        let rng = CounterRng::substream(11, 0);
        let mut data = Vec::new();
        for s in 0..3 {
            data.extend_from_slice(patch_of(8, &rng, s).data());
        }
        let batch = Tensor::new(vec![3, 8, 8, 1], data).unwrap();
        let run = |steps: usize| {
            let mut bundle = tiny_bundle();
            let mut prior = CounterRng::new(6);
            let mut out = Vec::new();
            for _ in 0..steps {
                out.push(train_step(&mut bundle, &batch, &mut prior, 1e-3).unwrap());
            }
            (bundle, out)
        };
        let (b1, l1) = run(3);
        let (b2, l2) = run(3);
        assert_eq!(b1, b2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn train_step_rejects_wrong_patch_shape() {
        let mut bundle = tiny_bundle();
        let batch = Tensor::zeros(vec![2, 16, 16, 1]);
        let mut prior = CounterRng::new(7);
        assert!(train_step(&mut bundle, &batch, &mut prior, 1e-3).is_err());
    }

    #[test]
    fn normalize_dataset_uses_global_bounds() {
        let a = SarImage::constant(2, 2, 1, -3.0, Domain::LogIntensity).unwrap();
        let b = SarImage::constant(2, 2, 1, 1.0, Domain::LogIntensity).unwrap();
        let (norm, min, max) = normalize_dataset(&[a, b]).unwrap();
        assert_eq!((min, max), (-3.0, 1.0));
        assert!(norm[0].data().iter().all(|&v| v == 0.0));
        assert!(norm[1].data().iter().all(|&v| v == 1.0));
        assert_eq!(norm[0].domain(), Domain::NormalizedLog);
        let c = SarImage::constant(2, 2, 1, 1.0, Domain::LogIntensity).unwrap();
        assert!(normalize_dataset(&[c.clone(), c]).is_err());
        assert!(normalize_dataset(&[]).is_err());
    }

    #[test]
    fn patch_dataset_counts_patches() {
        let rng = CounterRng::substream(12, 0);
        let img = patch_of(16, &rng, 0);
        let patches = patch_dataset(core::slice::from_ref(&img), 8, 4).unwrap();
        assert_eq!(patches.len(), 9);
        assert!(patches.iter().all(|p| p.height() == 8 && p.width() == 8));
    }

    #[test]
    fn tiny_training_is_deterministic() {
        let rng = CounterRng::substream(13, 0);
        let patches: Vec<SarImage> = (0..8).map(|s| patch_of(8, &rng, s)).collect();
        let config = AaeTrainConfig {
            seed: 21,
            latent: 4,
            batch: 4,
            epochs: 2,
            lr_low: 1e-3,
            lr_high: 5e-3,
            cycle_epochs: 2,
        };
        let (b1, log1) = train_aae(&patches, (-2.0, 3.0), &config).unwrap();
        let (b2, log2) = train_aae(&patches, (-2.0, 3.0), &config).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(log1, log2);
        assert_eq!(log1.len(), 2);
        assert_eq!((b1.norm_min, b1.norm_max), (-2.0, 3.0));
        assert!(log1
            .iter()
            .all(|r| r.rec_loss.is_finite() && r.disc_loss.is_finite() && r.gen_loss.is_finite()));
        assert!(log1[0].lr > 0.0);
        assert!(train_aae(&[], (0.0, 1.0), &config).is_err());
    }

    #[test]
    fn encode_patch_dimension() {
        let bundle = tiny_bundle();
        let rng = CounterRng::substream(14, 0);
        let z = encode_patch(&bundle, &patch_of(8, &rng, 0)).unwrap();
        assert_eq!(z.dim(), 4);
        assert!(z.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn reconstruction_matches_shape_and_is_deterministic() {
        let bundle = tiny_bundle();
        let rng = CounterRng::substream(15, 0);
        let img = patch_of(16, &rng, 0);
        let out = reconstruct_image(&bundle, &img).unwrap();
        assert_eq!(
            (out.height(), out.width(), out.channels()),
            (16, 16, 1)
        );
        assert_eq!(out.domain(), Domain::NormalizedLog);
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(reconstruct_image(&bundle, &img).unwrap(), out);
    }

    #[test]
    fn reconstruction_rejects_small_images() {
        let bundle = tiny_bundle();
        let rng = CounterRng::substream(16, 0);
        let img = patch_of(4, &rng, 0);
        assert!(reconstruct_image(&bundle, &img).is_err());
    }
}
