//! Acceptance gate for the whole pipeline: nine criteria, one test and
//! one printed pass/fail line each. Heavy fixtures (trained despeckler
//! and autoencoder per seed) are built once and shared; tests serialize
//! on a global lock so the per-criterion timing stays honest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use sarad_core::aae::{
    loss_rec, normalize_dataset, patch_dataset, reconstruct_image, train_aae, AaeBundle,
    AaeTrainConfig,
};
use sarad_core::despeckler::{
    despeckle, loss_speck, simulate_stack, train_despeckler, DespeckleTrainConfig,
};
use sarad_core::detect::{local_moments, rx_map, AnomalyMap, DEFAULT_SEMI_KERNEL, RX_GUARD, RX_OUTER};
use sarad_core::eval::{
    benchmark_background, benchmark_compare, benchmark_scene, roc_auc, trapezoid_area, Method,
    STREAM_BENCH_SLC,
};
use sarad_core::image::{
    exp_transform, log_transform, merge_cross_pol, normalize_with, DEFAULT_LOG_EPSILON,
};
use sarad_core::linalg::sym_eigenvalues;
use sarad_core::nn::{gradient_check, LayerSpec, ModelBundle, Tensor, FD_STEP};
use sarad_core::speckle::{
    apply_speckle_log, exp1_goodness, ratio_image, render_clean, sample_slc, Scatterer, SceneSpec,
    Segment,
};
use sarad_core::{CounterRng, Domain, SarImage};

use sarad::pipeline::{
    training_specs, DEFAULT_AAE_PATCH, DEFAULT_AAE_STRIDE, DEFAULT_DATES, DEFAULT_LOOKS,
    DEFAULT_TRAIN_SCENES, DEFAULT_TRAIN_SIDE,
};

const SEEDS: [u64; 3] = [7, 8, 9];
const SEED_A: u64 = SEEDS[0];

/// KS critical value at the 1% level, for the statistic scaled by sqrt(n).
const KS_CRIT: f64 = 1.628;

fn gate() -> MutexGuard<'static, ()> {
    static GATE: OnceLock<Mutex<()>> = OnceLock::new();
    GATE.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, ok: bool, detail: &str) {
    println!("{name}: {} ({detail})", if ok { "pass" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

/// Trained fixtures for one seed, with the build cost of each stage so
/// the criteria can charge it against their budgets even when cached.
struct World {
    scene: sarad_core::eval::LabeledScene,
    despeckler: ModelBundle,
    aae: AaeBundle,
    aae_log: Vec<sarad_core::aae::AaeLogRow>,
    scene_secs: f64,
    despeckler_secs: f64,
    aae_secs: f64,
}

fn world(seed: u64) -> Arc<World> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<World>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(w) = map.get(&seed) {
        return w.clone();
    }
    let w = Arc::new(build_world(seed));
    map.insert(seed, w.clone());
    w
}

fn build_world(seed: u64) -> World {
    let t0 = Instant::now();
    let scene = benchmark_scene(seed).expect("benchmark scene");
    let scene_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let specs = training_specs(seed, DEFAULT_TRAIN_SIDE, DEFAULT_TRAIN_SCENES);
    let stacks: Vec<_> = specs
        .iter()
        .enumerate()
        .map(|(i, sp)| {
            simulate_stack(sp, DEFAULT_DATES, DEFAULT_LOOKS, i % sp.channels)
                .expect("training stack")
        })
        .collect();
    let (despeckler, _) =
        train_despeckler(&stacks, &DespeckleTrainConfig::desk(seed)).expect("despeckler training");
    let despeckler_secs = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let noisy_log = scene.noisy_log().expect("noisy log");
    let despeckled = despeckle(&despeckler, &noisy_log).expect("despeckle");
    let (normed, lo, hi) =
        normalize_dataset(std::slice::from_ref(&despeckled)).expect("normalize");
    let patches =
        patch_dataset(&normed, DEFAULT_AAE_PATCH, DEFAULT_AAE_STRIDE).expect("patches");
    let (aae, aae_log) =
        train_aae(&patches, (lo, hi), &AaeTrainConfig::desk(seed)).expect("aae training");
    let aae_secs = t2.elapsed().as_secs_f64();

    World {
        scene,
        despeckler,
        aae,
        aae_log,
        scene_secs,
        despeckler_secs,
        aae_secs,
    }
}

/// Kolmogorov statistic of the samples against Exp(1), scaled by sqrt(n).
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

fn mse(a: &SarImage, b: &SarImage) -> f64 {
    assert_eq!(a.data().len(), b.data().len());
    let n = a.data().len() as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

fn random_tensor(shape: Vec<usize>, seed: u64, limit: f64) -> Tensor {
    let rng = CounterRng::substream(seed, 0x7e57);
    let data: Vec<f64> = (0..shape.iter().product())
        .map(|k| (2.0 * rng.f64_at(k as u64) - 1.0) * limit)
        .collect();
    Tensor::new(shape, data).expect("tensor")
}

/// Like [`random_tensor`] but bounded away from zero, for layers and
/// losses with a kink there.
fn random_tensor_offzero(shape: Vec<usize>, seed: u64) -> Tensor {
    let rng = CounterRng::substream(seed, 0x7e58);
    let data: Vec<f64> = (0..shape.iter().product())
        .map(|k| {
            let mag = 0.25 + 0.75 * rng.f64_at(k as u64);
            if rng.at(1_000_000 + k as u64) & 1 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::new(shape, data).expect("tensor")
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-6)
}

/// Worst relative disagreement between the analytic input gradient and
/// central differences, under the probe loss sum(w * out).
fn fd_input_error(model: &ModelBundle, batch: &Tensor, w: &Tensor) -> f64 {
    let (_, cache) = model.forward(batch).expect("forward");
    let (_, dx) = model.backward(&cache, w).expect("backward");
    let mut probe_batch = batch.clone();
    let mut worst: f64 = 0.0;
    for k in 0..probe_batch.len() {
        let saved = probe_batch.data()[k];
        probe_batch.data_mut()[k] = saved + FD_STEP;
        let plus = model
            .infer(&probe_batch)
            .expect("forward")
            .dot(w)
            .expect("probe shapes");
        probe_batch.data_mut()[k] = saved - FD_STEP;
        let minus = model
            .infer(&probe_batch)
            .expect("forward")
            .dot(w)
            .expect("probe shapes");
        probe_batch.data_mut()[k] = saved;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[k], numeric));
    }
    worst
}

/// Checks one single-layer model against central differences over both
/// parameters and inputs; returns the worst relative error.
fn layer_fd_error(spec: LayerSpec, batch: &Tensor, seed: u64) -> f64 {
    let mut model = ModelBundle::new(std::slice::from_ref(&spec), seed);
    let out_shape = model.output_shape(batch.shape()).expect("output shape");
    let w = random_tensor(out_shape, seed ^ 0x55, 1.0);
    let probe = move |out: &Tensor| {
        let loss = out.dot(&w).expect("probe shapes");
        Ok((loss, w.clone()))
    };
    let param_err = gradient_check(&mut model, batch, &probe).expect("gradient check");
    let w2 = {
        let out_shape = model.output_shape(batch.shape()).expect("output shape");
        random_tensor(out_shape, seed ^ 0x55, 1.0)
    };
    param_err.max(fd_input_error(&model, batch, &w2))
}

#[test]
fn c1_speckle_statistics() {
    let _g = gate();
    let t = Instant::now();
    let level = 2.3;
    let spec = SceneSpec::uniform(320, 320, 1, level, 41);
    let clean = render_clean(&spec).expect("clean scene");
    let slc = sample_slc(&clean, &CounterRng::substream(spec.seed, STREAM_BENCH_SLC))
        .expect("slc");
    let intensity = slc.intensity();
    let ratios: Vec<f64> = intensity.data().iter().map(|&v| v / level).collect();
    assert!(ratios.len() >= 100_000);
    let stat = ks_exp1_stat(&ratios);
    let core = exp1_goodness(&ratios).expect("ks test");
    let secs = t.elapsed().as_secs_f64();
    let ok = stat < KS_CRIT && core.pass && secs < 10.0;
    report(
        "criterion 1 (speckle statistics)",
        ok,
        &format!(
            "{} ratios, ks {stat:.3} < {KS_CRIT}, {secs:.1}s",
            ratios.len()
        ),
    );
}

#[test]
fn c2_gradient_integrity() {
    let _g = gate();
    let mut worst: f64 = 0.0;

    let cases: Vec<(LayerSpec, Tensor)> = vec![
        (
            LayerSpec::Dense { input: 3, output: 2 },
            random_tensor(vec![4, 3], 1, 1.0),
        ),
        (
            LayerSpec::Conv2d {
                in_channels: 2,
                out_channels: 3,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
            random_tensor(vec![2, 5, 5, 2], 2, 1.0),
        ),
        (
            LayerSpec::Conv2d {
                in_channels: 2,
                out_channels: 2,
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            random_tensor(vec![1, 5, 5, 2], 3, 1.0),
        ),
        (
            LayerSpec::TransposedConv2d {
                in_channels: 2,
                out_channels: 2,
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            random_tensor(vec![1, 3, 3, 2], 4, 1.0),
        ),
        (
            LayerSpec::LeakyRelu { slope: 0.2 },
            random_tensor_offzero(vec![3, 7], 5),
        ),
        (LayerSpec::Sigmoid, random_tensor(vec![3, 5], 6, 1.5)),
        (LayerSpec::Tanh, random_tensor(vec![3, 5], 7, 1.5)),
        (LayerSpec::Flatten, random_tensor(vec![2, 3, 4, 2], 8, 1.0)),
        (
            LayerSpec::Reshape {
                height: 3,
                width: 4,
                channels: 2,
            },
            random_tensor(vec![2, 24], 9, 1.0),
        ),
    ];
    let layers = cases.len();
    for (i, (spec, batch)) in cases.into_iter().enumerate() {
        worst = worst.max(layer_fd_error(spec, &batch, 100 + i as u64));
    }

    // Speckle loss gradient against central differences.
    let pred = random_tensor(vec![2, 4, 4, 1], 20, 1.5);
    let target = random_tensor(vec![2, 4, 4, 1], 21, 1.5);
    let (_, grad) = loss_speck(&pred, &target).expect("loss");
    let mut probe = pred.clone();
    for k in 0..probe.len() {
        let saved = probe.data()[k];
        probe.data_mut()[k] = saved + FD_STEP;
        let plus = loss_speck(&probe, &target).expect("loss").0;
        probe.data_mut()[k] = saved - FD_STEP;
        let minus = loss_speck(&probe, &target).expect("loss").0;
        probe.data_mut()[k] = saved;
        worst = worst.max(rel_err(grad.data()[k], (plus - minus) / (2.0 * FD_STEP)));
    }

    // Reconstruction loss gradient, with deviations bounded away from the
    // kink at zero.
    let x = random_tensor(vec![2, 4, 4, 1], 22, 1.0);
    let shift = random_tensor_offzero(vec![2, 4, 4, 1], 23);
    let x_hat = Tensor::new(
        x.shape().to_vec(),
        x.data()
            .iter()
            .zip(shift.data())
            .map(|(&a, &d)| a + d)
            .collect(),
    )
    .expect("tensor");
    let (_, grad) = loss_rec(&x, &x_hat).expect("loss");
    let mut probe = x_hat.clone();
    for k in 0..probe.len() {
        let saved = probe.data()[k];
        probe.data_mut()[k] = saved + FD_STEP;
        let plus = loss_rec(&x, &probe).expect("loss").0;
        probe.data_mut()[k] = saved - FD_STEP;
        let minus = loss_rec(&x, &probe).expect("loss").0;
        probe.data_mut()[k] = saved;
        worst = worst.max(rel_err(grad.data()[k], (plus - minus) / (2.0 * FD_STEP)));
    }

    // The speckle loss attains its minimum, exactly the element count,
    // at prediction == target.
    let (at_min, grad_min) = loss_speck(&target, &target).expect("loss");
    let exact = at_min == target.len() as f64 && grad_min.data().iter().all(|&g| g == 0.0);

    let ok = worst <= 1e-4 && exact;
    report(
        "criterion 2 (gradient integrity)",
        ok,
        &format!("{layers} layers + 2 losses, worst rel err {worst:.2e}, exact minimum {exact}"),
    );
}

/// Brute-force window moments with the same mirror-reflect boundary,
/// recomputed independently of the library.
fn oracle_moments(img: &SarImage, k: usize, row: usize, col: usize) -> (Vec<f64>, Vec<f64>) {
    let reflect = |i: isize, n: usize| -> usize {
        if i < 0 {
            (-i) as usize
        } else if i as usize >= n {
            2 * n - 2 - i as usize
        } else {
            i as usize
        }
    };
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let count = ((2 * k + 1) * (2 * k + 1)) as f64;
    let mut mean = vec![0.0; c];
    for dr in -(k as isize)..=k as isize {
        for dc in -(k as isize)..=k as isize {
            let rr = reflect(row as isize + dr, h);
            let cc = reflect(col as isize + dc, w);
            for (ch, m) in mean.iter_mut().enumerate() {
                *m += img.get(rr, cc, ch);
            }
        }
    }
    for m in mean.iter_mut() {
        *m /= count;
    }
    let mut cov = vec![0.0; c * c];
    for dr in -(k as isize)..=k as isize {
        for dc in -(k as isize)..=k as isize {
            let rr = reflect(row as isize + dr, h);
            let cc = reflect(col as isize + dc, w);
            for a in 0..c {
                let da = img.get(rr, cc, a) - mean[a];
                for b in 0..c {
                    cov[a * c + b] += da * (img.get(rr, cc, b) - mean[b]);
                }
            }
        }
    }
    for v in cov.iter_mut() {
        *v /= count;
    }
    (mean, cov)
}

#[test]
fn c3_scm_oracle_equivalence() {
    let _g = gate();
    let (h, w, c) = (32, 32, 3);
    let mut worst: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for image in 0..20 {
        let rng = CounterRng::substream(200 + image, 5);
        let data: Vec<f64> = (0..h * w * c)
            .map(|k| (2.0 * rng.f64_at(k as u64) - 1.0) * 2.0)
            .collect();
        let img = SarImage::new(h, w, c, data, Domain::LogIntensity).expect("image");
        for k in 1..=3 {
            let (mean, field) = local_moments(&img, k).expect("moments");
            for row in 0..h {
                for col in 0..w {
                    let (omean, ocov) = oracle_moments(&img, k, row, col);
                    for ch in 0..c {
                        worst = worst.max((mean.get(row, col, ch) - omean[ch]).abs());
                    }
                    let m = field.matrix(row, col);
                    for (a, b) in m.iter().zip(&ocov) {
                        worst = worst.max((a - b).abs());
                    }
                    let eigs = sym_eigenvalues(m, c).expect("eigenvalues");
                    for e in eigs {
                        min_eig = min_eig.min(e);
                    }
                }
            }
        }
    }
    let ok = worst <= 1e-12 && min_eig >= -1e-9;
    report(
        "criterion 3 (covariance oracle equivalence)",
        ok,
        &format!("20 images, k in 1..=3, worst abs diff {worst:.2e}, min eigenvalue {min_eig:.2e}"),
    );
}

#[test]
fn c4_rx_calibration() {
    let _g = gate();
    // True-parameter statistic on a homogeneous quad-pol scene: after the
    // cross-pol merge the channels are independent complex Gaussians with
    // variances (hh, hv/2, vv), so the expected Mahalanobis distance is
    // the channel count.
    let (hh, hv, vv) = (2.0, 0.8, 1.2);
    let mut spec = SceneSpec::uniform(320, 320, 4, 1.0, 43);
    spec.base_levels = SceneSpec::quad_levels(hh, hv, vv);
    let clean = render_clean(&spec).expect("clean scene");
    let slc = sample_slc(&clean, &CounterRng::substream(spec.seed, STREAM_BENCH_SLC))
        .expect("slc");
    let merged = slc.merge_cross_pol().expect("merge");
    let vars = [hh, hv / 2.0, vv];
    let px = merged.height() * merged.width();
    assert!(px >= 100_000);
    let mut mean_stat = 0.0;
    for row in 0..merged.height() {
        for col in 0..merged.width() {
            for (ch, &v) in vars.iter().enumerate() {
                mean_stat += merged.get(row, col, ch).norm_sqr() / v;
            }
        }
    }
    mean_stat /= px as f64;
    let ok_mean = (mean_stat - 3.0).abs() <= 0.02 * 3.0;

    // Estimated parameters with guard cells: an injected point scatterer
    // must land above the map's 99.9th percentile.
    let mut spec2 = SceneSpec::uniform(96, 96, 4, 1.0, 44);
    spec2.base_levels = SceneSpec::quad_levels(1.0, 0.3, 0.8);
    spec2.scatterers.push(Scatterer {
        row: 48,
        col: 48,
        amplitude: 40.0,
    });
    let clean2 = render_clean(&spec2).expect("clean scene");
    let slc2 = sample_slc(&clean2, &CounterRng::substream(spec2.seed, STREAM_BENCH_SLC))
        .expect("slc");
    let map = rx_map(&slc2.merge_cross_pol().expect("merge"), RX_OUTER, RX_GUARD)
        .expect("rx map");
    let mut sorted = map.scores().to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((sorted.len() as f64) * 0.999).ceil() as usize - 1;
    let ok_flag = map.get(48, 48) > sorted[idx];

    let ok = ok_mean && ok_flag;
    report(
        "criterion 4 (rx calibration)",
        ok,
        &format!("mean {mean_stat:.4} vs 3 +-2%, scatterer above 99.9th percentile {ok_flag}"),
    );
}

#[test]
fn c5_despeckler_efficacy() {
    let _g = gate();
    let w = world(SEED_A);
    let t = Instant::now();

    // Held-out structured scene, never seen in training.
    let mut spec = SceneSpec::uniform(160, 160, 3, 1.0, 51);
    spec.base_levels = vec![1.5, 0.4, 0.9];
    spec.base_texture_sigma = 0.1;
    spec.segments.push(Segment {
        row0: 40,
        col0: 0,
        row1: 80,
        col1: 160,
        levels: vec![3.0, 0.8, 1.8],
        texture_sigma: 0.05,
    });
    spec.segments.push(Segment {
        row0: 100,
        col0: 40,
        row1: 140,
        col1: 120,
        levels: vec![0.4, 0.12, 0.3],
        texture_sigma: 0.0,
    });
    let clean_log =
        log_transform(&render_clean(&spec).expect("clean scene"), DEFAULT_LOG_EPSILON)
            .expect("log");
    let noisy = apply_speckle_log(&clean_log, &CounterRng::substream(spec.seed, 0x0400_0000_0000))
        .expect("speckle");
    let despeckled = despeckle(&w.despeckler, &noisy).expect("despeckle");
    let mse_noisy = mse(&noisy, &clean_log);
    let mse_desp = mse(&despeckled, &clean_log);
    let ok_mse = mse_desp < 0.5 * mse_noisy;

    // On a homogeneous held-out scene the ratio of noisy to despeckled
    // intensity must still look like unit-mean exponential speckle.
    let uspec = SceneSpec::uniform(128, 128, 1, 2.0, 52);
    let uclean_log =
        log_transform(&render_clean(&uspec).expect("clean scene"), DEFAULT_LOG_EPSILON)
            .expect("log");
    let unoisy = apply_speckle_log(&uclean_log, &CounterRng::substream(uspec.seed, 0x0400_0000_0000))
        .expect("speckle");
    let udespeckled = despeckle(&w.despeckler, &unoisy).expect("despeckle");
    let ratio = ratio_image(
        &exp_transform(&unoisy, DEFAULT_LOG_EPSILON).expect("exp"),
        &exp_transform(&udespeckled, DEFAULT_LOG_EPSILON).expect("exp"),
    )
    .expect("ratio");
    let stat = ks_exp1_stat(ratio.data());
    let ok_ratio = stat < KS_CRIT;

    let secs = t.elapsed().as_secs_f64() + w.scene_secs + w.despeckler_secs;
    let ok = ok_mse && ok_ratio && secs <= 300.0;
    report(
        "criterion 5 (despeckler efficacy)",
        ok,
        &format!(
            "mse {mse_desp:.4} vs noisy {mse_noisy:.4}, ratio ks {stat:.3} < {KS_CRIT}, {secs:.0}s"
        ),
    );
}

#[test]
fn c6_aae_behavior() {
    let _g = gate();
    let w = world(SEED_A);
    let t = Instant::now();

    let first = w.aae_log.first().expect("log").rec_loss;
    let last = w.aae_log.last().expect("log").rec_loss;
    let ok_loss = last < 0.5 * first;

    // A bright point scatterer embedded in a held-out background must
    // come out dimmer in the reconstruction than in its input.
    let mut spec = benchmark_background(61, 128, 128);
    spec.scatterers.push(Scatterer {
        row: 64,
        col: 64,
        amplitude: 40.0,
    });
    let clean = render_clean(&spec).expect("clean scene");
    let slc = sample_slc(&clean, &CounterRng::substream(spec.seed, STREAM_BENCH_SLC))
        .expect("slc");
    let noisy_log = log_transform(
        &merge_cross_pol(&slc.intensity()).expect("merge"),
        DEFAULT_LOG_EPSILON,
    )
    .expect("log");
    let despeckled = despeckle(&w.despeckler, &noisy_log).expect("despeckle");
    let x = normalize_with(&despeckled, w.aae.norm_min, w.aae.norm_max).expect("normalize");
    let x_hat = reconstruct_image(&w.aae, &x).expect("reconstruct");
    let amp = |img: &SarImage| {
        (0..img.channels())
            .map(|ch| img.get(64, 64, ch))
            .fold(f64::MIN, f64::max)
    };
    let (ax, axh) = (amp(&x), amp(&x_hat));
    let ok_scatterer = axh < ax;

    let secs = t.elapsed().as_secs_f64() + w.aae_secs;
    let ok = ok_loss && ok_scatterer && secs <= 600.0;
    report(
        "criterion 6 (autoencoder behavior)",
        ok,
        &format!(
            "rec loss {last:.4} vs first {first:.4}, scatterer {axh:.3} < {ax:.3}, {secs:.0}s"
        ),
    );
}

#[test]
fn c7_detection_ordering() {
    let _g = gate();
    let t = Instant::now();
    let mut build_secs = 0.0;
    let mut sums: HashMap<&'static str, f64> = HashMap::new();
    for &seed in &SEEDS {
        let w = world(seed);
        build_secs += w.scene_secs + w.despeckler_secs + w.aae_secs;
        let results = benchmark_compare(
            &w.scene,
            &w.despeckler,
            &w.aae,
            DEFAULT_SEMI_KERNEL,
            RX_OUTER,
            RX_GUARD,
        )
        .expect("benchmark");
        for r in results {
            *sums.entry(r.method.name()).or_insert(0.0) += r.roc.auc();
        }
    }
    let mean = |m: Method| sums[m.name()] / SEEDS.len() as f64;
    let full = mean(Method::Covariance);
    let margins = [
        ("l1", full - mean(Method::L1)),
        ("rx", full - mean(Method::Rx)),
        ("covariance_noisy", full - mean(Method::CovarianceNoisy)),
    ];
    let ok_order = margins.iter().all(|&(_, m)| m >= 0.02);
    let secs = t.elapsed().as_secs_f64() + build_secs;
    let ok = ok_order && secs <= 900.0;
    report(
        "criterion 7 (detection ordering)",
        ok,
        &format!(
            "covariance > l1, covariance > rx, covariance > covariance_noisy over {} seeds, {secs:.0}s",
            SEEDS.len()
        ),
    );
    let _ = margins;
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).expect("read dir") {
        let path = entry.expect("dir entry").path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push(path.strip_prefix(root).expect("prefix").to_path_buf());
        }
    }
}

#[test]
fn c8_pipeline_determinism() {
    let _g = gate();
    let exe = env!("CARGO_BIN_EXE_sarad");
    let base = tempfile::tempdir().expect("tempdir");
    let args = [
        "pipeline",
        "--seed",
        "5",
        "--height",
        "64",
        "--width",
        "64",
        "--train-side",
        "48",
        "--train-scenes",
        "1",
        "--dates",
        "2",
        "--looks",
        "2",
        "--epochs-a",
        "1",
        "--epochs-b",
        "1",
        "--epochs-c",
        "1",
        "--batches-per-epoch",
        "2",
        "--net-width",
        "4",
        "--net-depth",
        "2",
        "--latent",
        "8",
        "--aae-batch",
        "8",
        "--aae-epochs",
        "1",
        "--aae-patch",
        "16",
        "--aae-stride",
        "16",
    ];
    let dirs = [base.path().join("first"), base.path().join("second")];
    for dir in &dirs {
        let status = Command::new(exe)
            .args(args)
            .arg("--out")
            .arg(dir)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .expect("run pipeline");
        assert!(status.success(), "pipeline run failed");
    }
    let mut lists: Vec<Vec<PathBuf>> = dirs
        .iter()
        .map(|d| {
            let mut files = Vec::new();
            collect_files(d, d, &mut files);
            files.sort();
            files
        })
        .collect();
    let second = lists.pop().expect("listing");
    let first = lists.pop().expect("listing");
    let same_set = first == second;
    let mut same_bytes = true;
    for rel in &first {
        let a = fs::read(dirs[0].join(rel)).expect("read");
        let b = fs::read(dirs[1].join(rel)).expect("read");
        if a != b {
            same_bytes = false;
            break;
        }
    }
    let ok = same_set && same_bytes && !first.is_empty();
    report(
        "criterion 8 (pipeline determinism)",
        ok,
        &format!("{} artifacts byte-identical across two runs", first.len()),
    );
}

#[test]
fn c9_roc_self_consistency() {
    let _g = gate();
    let rng = CounterRng::substream(90, 1);
    let n = 4000usize;
    let mut scores: Vec<f64> = (0..n).map(|k| rng.f64_at(k as u64)).collect();
    // Coarse quantization of a third of the scores injects tie groups.
    for k in (0..n).step_by(3) {
        scores[k] = (scores[k] * 50.0).round() / 50.0;
    }
    let labels: Vec<bool> = (0..n).map(|k| rng.f64_at(10_000 + k as u64) < 0.12).collect();
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = n - pos;
    assert!(pos > 0 && neg > 0);

    let map = AnomalyMap::new_raw(50, 80, scores.clone()).expect("map");
    let curve = roc_auc(&map, &labels).expect("roc");

    // Independent threshold sweep with trapezoidal area.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    let mut sweep = 0.0;
    let mut i = 0;
    while i < n {
        let s = scores[order[i]];
        while i < n && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (fpr, tpr) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        sweep += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    let d_sweep = (sweep - curve.auc()).abs();
    let d_points = (trapezoid_area(curve.points()) - curve.auc()).abs();

    let cubed: Vec<f64> = scores.iter().map(|&s| s * s * s).collect();
    let curve3 = roc_auc(&AnomalyMap::new_raw(50, 80, cubed).expect("map"), &labels)
        .expect("roc");
    let d_mono = (curve3.auc() - curve.auc()).abs();

    let ok = d_sweep <= 1e-10 && d_points <= 1e-10 && d_mono <= 1e-10;
    report(
        "criterion 9 (roc self-consistency)",
        ok,
        &format!("sweep diff {d_sweep:.1e}, curve diff {d_points:.1e}, cube diff {d_mono:.1e}"),
    );
}
