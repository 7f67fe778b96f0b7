//! Scratch diagnostics, not part of the suite.

use std::path::Path;
use std::time::Instant;

use sarad_core::aae::{
    new_aae, normalize_dataset, patch_dataset, train_aae, train_step, AaeTrainConfig,
};
use sarad_core::nn::{LrSchedule, Tensor};
use sarad_core::rng::derive_seed;
use sarad_core::despeckler::{despeckle, simulate_stack, train_despeckler, DespeckleTrainConfig};
use sarad_core::eval::benchmark_scene;
use sarad_core::image::{exp_transform, log_transform, DEFAULT_LOG_EPSILON};
use sarad_core::speckle::{apply_speckle_log, ratio_image, render_clean, SceneSpec};
use sarad_core::{CounterRng, SarImage};

use sarad::checkpoint::{load_model, save_model};
use sarad::pipeline::{
    training_specs, DEFAULT_DATES, DEFAULT_LOOKS, DEFAULT_TRAIN_SCENES, DEFAULT_TRAIN_SIDE,
};

fn despeckler_cached(seed: u64) -> sarad_core::nn::ModelBundle {
    let dir = format!("/tmp/diag-despeckler-{seed}");
    if Path::new(&dir).join("manifest.txt").exists() {
        return load_model(Path::new(&dir)).expect("load");
    }
    let specs = training_specs(seed, DEFAULT_TRAIN_SIDE, DEFAULT_TRAIN_SCENES);
    let stacks: Vec<_> = specs
        .iter()
        .enumerate()
        .map(|(i, sp)| simulate_stack(sp, DEFAULT_DATES, DEFAULT_LOOKS, i % sp.channels).unwrap())
        .collect();
    let t = Instant::now();
    let (model, _) = train_despeckler(&stacks, &DespeckleTrainConfig::desk(seed)).unwrap();
    eprintln!("trained despeckler in {:.0}s", t.elapsed().as_secs_f64());
    save_model(Path::new(&dir), &model).expect("save");
    model
}

fn ks_exp1_stat(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = 1.0 - (-x).exp();
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d * n.sqrt()
}

#[test]
#[ignore]
fn diag_despeckler_bias() {
    let model = despeckler_cached(7);
    for level in [0.5, 1.0, 2.0, 4.0] {
        let spec = SceneSpec::uniform(128, 128, 1, level, 52);
        let clean_log =
            log_transform(&render_clean(&spec).unwrap(), DEFAULT_LOG_EPSILON).unwrap();
        let noisy =
            apply_speckle_log(&clean_log, &CounterRng::substream(spec.seed, 0x0400_0000_0000))
                .unwrap();
        let desp = despeckle(&model, &noisy).unwrap();
        let n = desp.data().len() as f64;
        let bias: f64 = desp
            .data()
            .iter()
            .zip(clean_log.data())
            .map(|(&a, &b)| a - b)
            .sum::<f64>()
            / n;
        // Interior-only bias, excluding a 16 pixel frame.
        let (mut ibias, mut icount) = (0.0, 0);
        let mut frame_bias = 0.0;
        let mut fcount = 0;
        for r in 0..128 {
            for c in 0..128 {
                let d = desp.get(r, c, 0) - clean_log.get(r, c, 0);
                if (16..112).contains(&r) && (16..112).contains(&c) {
                    ibias += d;
                    icount += 1;
                } else {
                    frame_bias += d;
                    fcount += 1;
                }
            }
        }
        ibias /= icount as f64;
        frame_bias /= fcount as f64;
        let ratio = ratio_image(
            &exp_transform(&noisy, DEFAULT_LOG_EPSILON).unwrap(),
            &exp_transform(&desp, DEFAULT_LOG_EPSILON).unwrap(),
        )
        .unwrap();
        let full_ks = ks_exp1_stat(ratio.data());
        let interior: Vec<f64> = (16..112)
            .flat_map(|r| (16..112).map(move |c| (r, c)))
            .map(|(r, c)| ratio.data()[r * 128 + c])
            .collect();
        let int_ks = ks_exp1_stat(&interior);
        let mean_ratio: f64 = ratio.data().iter().sum::<f64>() / n;
        println!(
            "level {level}: bias {bias:+.4} interior {ibias:+.4} frame {frame_bias:+.4} \
             ks full {full_ks:.3} interior {int_ks:.3} mean ratio {mean_ratio:.4}"
        );
    }
}

#[test]
#[ignore]
fn diag_aae_log() {
    let model = despeckler_cached(7);
    let scene = benchmark_scene(7).unwrap();
    let noisy_log = scene.noisy_log().unwrap();
    let despeckled = despeckle(&model, &noisy_log).unwrap();

    for (patch, stride) in [(32usize, 16usize), (64, 16)] {
        let (normed, lo, hi) = normalize_dataset(std::slice::from_ref(&despeckled)).unwrap();
        let patches = patch_dataset(&normed, patch, stride).unwrap();
        let data_mean: f64 = patches
            .iter()
            .flat_map(|p: &SarImage| p.data().iter())
            .sum::<f64>()
            / patches.iter().map(|p| p.data().len()).sum::<usize>() as f64;
        println!(
            "patch {patch} stride {stride}: {} patches, data mean {data_mean:.3}",
            patches.len()
        );
        let t = Instant::now();
        let (_, log) = train_aae(&patches, (lo, hi), &AaeTrainConfig::desk(7)).unwrap();
        println!("  trained in {:.0}s", t.elapsed().as_secs_f64());
        for row in &log {
            println!(
                "  epoch {:2} rec {:.4} disc {:.4} gen {:.4} lr {:.4}",
                row.epoch, row.rec_loss, row.disc_loss, row.gen_loss, row.lr
            );
        }
    }
}

#[test]
#[ignore]
fn diag_aae_probe() {
    let model = despeckler_cached(7);
    let scene = benchmark_scene(7).unwrap();
    let noisy_log = scene.noisy_log().unwrap();
    let despeckled = despeckle(&model, &noisy_log).unwrap();
    let (normed, _lo, _hi) = normalize_dataset(std::slice::from_ref(&despeckled)).unwrap();
    let patch = 64usize;
    let patches = patch_dataset(&normed, patch, 16).unwrap();
    let config = AaeTrainConfig::desk(7);

    let channels = patches[0].channels();
    let mut bundle = new_aae(patch, channels, config.latent, config.seed).unwrap();
    let batches_per_epoch = (patches.len() / config.batch).max(1);
    let ramp = ((config.cycle_epochs * batches_per_epoch) / 2).max(1);
    let lr = LrSchedule::new(config.lr_low, config.lr_high, ramp as u64).unwrap();
    let mut sampler = CounterRng::new(derive_seed(config.seed, 14));
    let mut prior = CounterRng::new(derive_seed(config.seed, 15));
    let elems = patch * patch * channels;

    // Fixed probe batch: first 32 patches, plus a fixed prior draw.
    let mut probe_data = Vec::new();
    for p in patches.iter().take(32) {
        probe_data.extend_from_slice(p.data());
    }
    let probe = Tensor::new(vec![32, patch, patch, channels], probe_data).unwrap();
    let mut prior_rng = CounterRng::new(987);
    let prior_probe: Vec<f64> = (0..32 * config.latent).map(|_| prior_rng.next_normal()).collect();
    let prior_probe = Tensor::new(vec![32, config.latent], prior_probe).unwrap();

    let mut global_batch = 0u64;
    for epoch in 0..config.epochs {
        let (mut rec_sum, mut disc_sum, mut gen_sum) = (0.0, 0.0, 0.0);
        for _ in 0..batches_per_epoch {
            let mut data = Vec::with_capacity(config.batch * elems);
            for _ in 0..config.batch {
                let pick = sampler.next_index(patches.len());
                data.extend_from_slice(patches[pick].data());
            }
            let batch =
                Tensor::new(vec![config.batch, patch, patch, channels], data).unwrap();
            let losses =
                train_step(&mut bundle, &batch, &mut prior, lr.lr_at(global_batch)).unwrap();
            rec_sum += losses.rec;
            disc_sum += losses.disc;
            gen_sum += losses.gen;
            global_batch += 1;
        }
        let inv = 1.0 / batches_per_epoch as f64;
        let z = bundle.encoder.infer(&probe).unwrap();
        let zn = z.data().len() as f64;
        let z_mean: f64 = z.data().iter().sum::<f64>() / zn;
        let z_std: f64 =
            (z.data().iter().map(|v| (v - z_mean).powi(2)).sum::<f64>() / zn).sqrt();
        let z_max = z.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p_fake = bundle.discriminator.infer(&z).unwrap();
        let pf: f64 = p_fake.data().iter().sum::<f64>() / p_fake.data().len() as f64;
        let p_real = bundle.discriminator.infer(&prior_probe).unwrap();
        let pr: f64 = p_real.data().iter().sum::<f64>() / p_real.data().len() as f64;
        println!(
            "epoch {epoch:2} rec {:.4} disc {:.4} gen {:.4} | z mean {z_mean:+.3} std {z_std:.3} max {z_max:.2} | p_fake {pf:.4} p_real {pr:.4}",
            rec_sum * inv, disc_sum * inv, gen_sum * inv
        );
    }
}
