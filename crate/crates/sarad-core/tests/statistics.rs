//! Monte-Carlo checks of the speckle model against its closed forms.

use sarad_core::despeckler::{make_pairs_phase_a, simulate_stack};
use sarad_core::image::log_transform;
use sarad_core::speckle::{
    apply_speckle_log, exp1_goodness, ks_two_sample, ks_two_sample_critical_001, render_clean,
    sample_slc, SceneSpec,
};
use sarad_core::{CounterRng, SarImage};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn big_uniform_scene(level: f64, seed: u64) -> SarImage {
    let spec = SceneSpec::uniform(320, 320, 1, level, seed);
    render_clean(&spec).unwrap()
}

#[test]
fn slc_intensity_ratio_is_unit_exponential() {
    // 102400 draws of |z|^2 / R against Exp(1).
    let clean = big_uniform_scene(2.5, 900);
    let slc = sample_slc(&clean, &CounterRng::substream(900, 7)).unwrap();
    let ratios: Vec<f64> = slc
        .intensity()
        .data()
        .iter()
        .zip(clean.data())
        .map(|(i, r)| i / r)
        .collect();
    let result = exp1_goodness(&ratios).unwrap();
    assert!(
        result.pass,
        "KS statistic {} above {}",
        result.statistic, result.critical
    );
}

#[test]
fn log_speckle_mean_is_minus_gamma() {
    let clean = log_transform(&big_uniform_scene(1.0, 901), 1e-10).unwrap();
    let noisy = apply_speckle_log(&clean, &CounterRng::substream(901, 8)).unwrap();
    let n = clean.data().len() as f64;
    let mean: f64 = noisy
        .data()
        .iter()
        .zip(clean.data())
        .map(|(y, x)| y - x)
        .sum::<f64>()
        / n;
    // Var(log E) = pi^2 / 6.
    let se = (core::f64::consts::PI.powi(2) / 6.0 / n).sqrt();
    assert!(
        (mean + EULER_GAMMA).abs() < 3.0 * se,
        "mean {mean}, se {se}"
    );
}

#[test]
fn independent_speckle_fields_share_one_distribution() {
    let clean = log_transform(&big_uniform_scene(1.0, 902), 1e-10).unwrap();
    let rng = CounterRng::substream(902, 9);
    let pair = make_pairs_phase_a(&clean, &rng).unwrap();
    let a: Vec<f64> = pair
        .y1
        .data()
        .iter()
        .zip(clean.data())
        .map(|(y, x)| y - x)
        .collect();
    let b: Vec<f64> = pair
        .y2
        .data()
        .iter()
        .zip(clean.data())
        .map(|(y, x)| y - x)
        .collect();
    assert!(ks_two_sample(&a, &b) < ks_two_sample_critical_001(a.len(), b.len()));

    // Pearson correlation of the two fields stays at noise level.
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(&b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    let corr = cov / (va.sqrt() * vb.sqrt());
    assert!(corr.abs() < 3.0 / n.sqrt(), "correlation {corr}");
}

#[test]
fn shifted_speckle_fails_the_two_sample_test() {
    let clean = log_transform(&big_uniform_scene(1.0, 903), 1e-10).unwrap();
    let rng = CounterRng::substream(903, 10);
    let pair = make_pairs_phase_a(&clean, &rng).unwrap();
    let a: Vec<f64> = pair
        .y1
        .data()
        .iter()
        .zip(clean.data())
        .map(|(y, x)| y - x)
        .collect();
    let shifted: Vec<f64> = a.iter().map(|v| v + 0.15).collect();
    assert!(ks_two_sample(&a, &shifted) > ks_two_sample_critical_001(a.len(), shifted.len()));
}

#[test]
fn acquisition_dates_are_mutually_independent() {
    let spec = SceneSpec::uniform(256, 256, 1, 1.5, 904);
    let stack = simulate_stack(&spec, 3, 16, 0).unwrap();
    let d0: Vec<f64> = stack.date(0).data().to_vec();
    let d1: Vec<f64> = stack.date(1).data().to_vec();
    assert!(ks_two_sample(&d0, &d1) < ks_two_sample_critical_001(d0.len(), d1.len()));
    let n = d0.len() as f64;
    let m0 = d0.iter().sum::<f64>() / n;
    let m1 = d1.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut v0 = 0.0;
    let mut v1 = 0.0;
    for (x, y) in d0.iter().zip(&d1) {
        cov += (x - m0) * (y - m1);
        v0 += (x - m0) * (x - m0);
        v1 += (y - m1) * (y - m1);
    }
    let corr = cov / (v0.sqrt() * v1.sqrt());
    assert!(corr.abs() < 3.0 / n.sqrt(), "correlation {corr}");
}

#[test]
fn textured_segments_keep_their_mean_level() {
    let mut spec = SceneSpec::uniform(320, 320, 1, 2.0, 905);
    spec.base_texture_sigma = 0.4;
    let clean = render_clean(&spec).unwrap();
    let n = clean.data().len() as f64;
    let mean = clean.data().iter().sum::<f64>() / n;
    // Mean-one log-normal texture: Var = exp(sigma^2) - 1 per pixel.
    let sigma2: f64 = 0.4 * 0.4;
    let se = (2.0 * 2.0 * (sigma2.exp() - 1.0) / n).sqrt();
    assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    // Texture actually varies the field.
    let var = clean.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    assert!(var > 0.1);
}

#[test]
fn multilook_clean_reference_beats_single_look() {
    let spec = SceneSpec::uniform(128, 128, 1, 1.0, 906);
    let stack = simulate_stack(&spec, 1, 32, 0).unwrap();
    let truth = log_transform(&render_clean(&spec).unwrap(), 1e-10).unwrap();
    let mse = |img: &SarImage| {
        img.data()
            .iter()
            .zip(truth.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / truth.data().len() as f64
    };
    let reference_mse = mse(stack.clean().unwrap());
    let single_look_mse = mse(stack.date(0));
    // 32-look averaging shrinks log-domain error far below one look.
    assert!(
        reference_mse < single_look_mse / 10.0,
        "reference {reference_mse}, single {single_look_mse}"
    );
}
