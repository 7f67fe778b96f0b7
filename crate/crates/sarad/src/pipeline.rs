//! Stage implementations behind the subcommands. Each stage reads its
//! inputs from files in the output directory and writes its products
//! back there, so an end-to-end run leaves a directory that can be
//! reproduced stage by stage, and a rerun of any stage is idempotent.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sarad_core::aae::{
    normalize_dataset, patch_dataset, reconstruct_image, train_aae, AaeBundle, AaeTrainConfig,
};
use sarad_core::despeckler::{
    despeckle, simulate_stack, train_despeckler, DespeckleTrainConfig,
};
use sarad_core::detect::{
    anomaly_map_frobenius, anomaly_map_l1, normalize_map, rx_map, AnomalyMap,
};
use sarad_core::eval::{
    benchmark_patterns_sized, embed_anomalies, roc_auc, run_method, LabeledScene, Method,
    STREAM_BENCH_SLC,
};
use sarad_core::image::{log_transform, merge_cross_pol, normalize_with, DEFAULT_LOG_EPSILON};
use sarad_core::nn::ModelBundle;
use sarad_core::rng::derive_seed;
use sarad_core::speckle::{render_clean, sample_slc, Scatterer, SceneSpec, Segment};
use sarad_core::{CounterRng, SarImage};

use crate::checkpoint::{load_aae, load_model, save_aae, save_model};
use crate::error::{io_err, Result};
use crate::pgm::{render_image, write_pgm};
use crate::report::{
    write_aae_log, write_despeckle_log, write_results, write_results_timed, write_roc,
};
use crate::scene_file::write_scene;
use crate::tensor_io::{
    read_image, read_labels, read_slc, write_image, write_labels, write_map, write_slc,
};

pub const DEFAULT_HEIGHT: usize = 256;
pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_TRAIN_SIDE: usize = 96;
pub const DEFAULT_TRAIN_SCENES: usize = 2;
pub const DEFAULT_DATES: usize = 8;
pub const DEFAULT_LOOKS: usize = 16;
pub const DEFAULT_AAE_PATCH: usize = 32;
pub const DEFAULT_AAE_STRIDE: usize = 16;

/// Top percentile clipped before rendering images; score maps render
/// unclipped.
pub const RENDER_CLIP_PERCENT: f64 = 1.0;

// Purpose tag base for the despeckler training scenes, disjoint from the
// tags the trainers derive internally.
const PURPOSE_TRAIN_SCENE: u64 = 0x0100;

/// Canonical artifact names inside one output directory.
pub struct OutPaths {
    root: PathBuf,
}

impl OutPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ensure_root(&self) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))
    }

    fn join(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn scene(&self) -> PathBuf {
        self.join("scene.txt")
    }

    pub fn slc(&self) -> PathBuf {
        self.join("slc.sart")
    }

    pub fn clean(&self) -> PathBuf {
        self.join("clean.sart")
    }

    pub fn labels(&self) -> PathBuf {
        self.join("labels.sart")
    }

    pub fn noisy_log(&self) -> PathBuf {
        self.join("noisy_log.sart")
    }

    pub fn noisy_pgm(&self) -> PathBuf {
        self.join("noisy.pgm")
    }

    pub fn despeckler_dir(&self) -> PathBuf {
        self.join("despeckler")
    }

    pub fn despeckle_log(&self) -> PathBuf {
        self.join("despeckler_log.csv")
    }

    pub fn despeckled(&self) -> PathBuf {
        self.join("despeckled.sart")
    }

    pub fn despeckled_pgm(&self) -> PathBuf {
        self.join("despeckled.pgm")
    }

    pub fn aae_dir(&self) -> PathBuf {
        self.join("aae")
    }

    pub fn aae_log(&self) -> PathBuf {
        self.join("aae_log.csv")
    }

    pub fn reconstructed(&self) -> PathBuf {
        self.join("reconstructed.sart")
    }

    pub fn reconstructed_pgm(&self) -> PathBuf {
        self.join("reconstructed.pgm")
    }

    pub fn map_sart(&self, method: &str) -> PathBuf {
        self.join(&format!("map_{method}.sart"))
    }

    pub fn map_pgm(&self, method: &str) -> PathBuf {
        self.join(&format!("map_{method}.pgm"))
    }

    pub fn roc_csv(&self, method: &str) -> PathBuf {
        self.join(&format!("roc_{method}.csv"))
    }

    pub fn results(&self) -> PathBuf {
        self.join("results.csv")
    }
}

/// Maps items across up to `threads` workers with a fixed chunking, so
/// the output order and every result are independent of scheduling.
pub fn par_map<T, R, F>(items: Vec<T>, threads: usize, f: &F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.into_iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let mut chunks: Vec<Vec<T>> = Vec::with_capacity(threads);
    let mut it = items.into_iter();
    loop {
        let c: Vec<T> = it.by_ref().take(chunk).collect();
        if c.is_empty() {
            break;
        }
        chunks.push(c);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| s.spawn(move || c.into_iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Scene specs the despeckler trains on: per-scene levels, texture,
/// segment geometry and scatterers all derive from the root seed, with a
/// bright band, a dark block and a handful of point targets per scene.
pub fn training_specs(seed: u64, side: usize, scenes: usize) -> Vec<SceneSpec> {
    (0..scenes)
        .map(|i| {
            let scene_seed = derive_seed(seed, PURPOSE_TRAIN_SCENE + i as u64);
            let rng = CounterRng::new(scene_seed);
            let u = |k: u64| rng.f64_at(k);
            let level = |k: u64| 0.5 + 2.0 * u(k);
            let q = side / 4;
            let mut spec = SceneSpec::uniform(side, side, 4, 1.0, scene_seed);
            spec.base_levels =
                SceneSpec::quad_levels(level(0), 0.3 * level(1), level(2));
            spec.base_texture_sigma = 0.15 * u(3);
            spec.segments.push(Segment {
                row0: q / 2 + (u(4) * q as f64) as usize,
                col0: 0,
                row1: q / 2 + (u(4) * q as f64) as usize + q,
                col1: side,
                levels: SceneSpec::quad_levels(
                    2.0 * level(5),
                    0.5 * level(6),
                    1.5 * level(7),
                ),
                texture_sigma: 0.1 * u(8),
            });
            spec.segments.push(Segment {
                row0: 2 * q + q / 2,
                col0: q + (u(9) * q as f64) as usize,
                row1: 3 * q + q / 2,
                col1: 2 * q + (u(9) * q as f64) as usize,
                levels: SceneSpec::quad_levels(
                    0.25 * level(10),
                    0.1 * level(11),
                    0.2 * level(12),
                ),
                texture_sigma: 0.0,
            });
            for t in 0..3u64 {
                spec.scatterers.push(Scatterer {
                    row: (u(20 + t) * (side - 1) as f64) as usize,
                    col: (u(30 + t) * (side - 1) as f64) as usize,
                    amplitude: 20.0 + 20.0 * u(40 + t),
                });
            }
            spec
        })
        .collect()
}

/// Renders the scene, stamps the anomaly grid when asked, draws the
/// observation speckle, and writes every simulation artifact.
pub fn stage_simulate(spec: &SceneSpec, anomalies: bool, paths: &OutPaths) -> Result<()> {
    paths.ensure_root()?;
    let clean = render_clean(spec)?;
    let patterns = if anomalies {
        benchmark_patterns_sized(spec.height, spec.width)
    } else {
        Vec::new()
    };
    let (embedded, labels) = embed_anomalies(&clean, &patterns)?;
    let slc = sample_slc(&embedded, &CounterRng::substream(spec.seed, STREAM_BENCH_SLC))?;
    let noisy_log = log_transform(&merge_cross_pol(&slc.intensity())?, DEFAULT_LOG_EPSILON)?;
    write_scene(&paths.scene(), spec)?;
    write_image(&paths.clean(), &embedded)?;
    write_labels(&paths.labels(), &labels, spec.height, spec.width)?;
    write_slc(&paths.slc(), &slc)?;
    write_image(&paths.noisy_log(), &noisy_log)?;
    render_image(&paths.noisy_pgm(), &noisy_log, Some(RENDER_CLIP_PERCENT))
}

/// Training-set shape for the despeckler: scene count, canvas side, and
/// the per-scene acquisition counts.
#[derive(Debug, Clone, Copy)]
pub struct TrainData {
    pub side: usize,
    pub scenes: usize,
    pub dates: usize,
    pub looks: usize,
}

impl TrainData {
    pub fn desk() -> Self {
        Self {
            side: DEFAULT_TRAIN_SIDE,
            scenes: DEFAULT_TRAIN_SCENES,
            dates: DEFAULT_DATES,
            looks: DEFAULT_LOOKS,
        }
    }
}

/// Simulates acquisition stacks, trains the despeckler, writes the
/// checkpoint and loss log, and returns the model as reloaded from the
/// checkpoint so later stages see exactly what the files hold.
pub fn stage_despeckle_train(
    config: &DespeckleTrainConfig,
    data: &TrainData,
    paths: &OutPaths,
) -> Result<ModelBundle> {
    paths.ensure_root()?;
    let specs = training_specs(config.seed, data.side, data.scenes);
    let stacks = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| simulate_stack(spec, data.dates, data.looks, i % spec.channels))
        .collect::<sarad_core::Result<Vec<_>>>()?;
    let (model, log) = train_despeckler(&stacks, config)?;
    save_model(&paths.despeckler_dir(), &model)?;
    write_despeckle_log(&paths.despeckle_log(), &log)?;
    load_model(&paths.despeckler_dir())
}

pub fn stage_despeckle(model_dir: &Path, input: &Path, paths: &OutPaths) -> Result<SarImage> {
    paths.ensure_root()?;
    let model = load_model(model_dir)?;
    let noisy = read_image(input)?;
    let out = despeckle(&model, &noisy)?;
    write_image(&paths.despeckled(), &out)?;
    render_image(&paths.despeckled_pgm(), &out, Some(RENDER_CLIP_PERCENT))?;
    Ok(out)
}

/// Normalizes the despeckled image, trains the autoencoder on its
/// patches, writes the checkpoint and epoch log, and returns the bundle
/// reloaded from the checkpoint.
pub fn stage_aae_train(
    config: &AaeTrainConfig,
    patch: usize,
    stride: usize,
    input: &Path,
    paths: &OutPaths,
) -> Result<AaeBundle> {
    paths.ensure_root()?;
    let img = read_image(input)?;
    let (normalized, min, max) = normalize_dataset(core::slice::from_ref(&img))?;
    let patches = patch_dataset(&normalized, patch, stride)?;
    let (bundle, log) = train_aae(&patches, (min, max), config)?;
    save_aae(&paths.aae_dir(), &bundle)?;
    write_aae_log(&paths.aae_log(), &log)?;
    load_aae(&paths.aae_dir())
}

pub fn stage_reconstruct(aae_dir: &Path, input: &Path, paths: &OutPaths) -> Result<SarImage> {
    paths.ensure_root()?;
    let aae = load_aae(aae_dir)?;
    let img = read_image(input)?;
    let x = normalize_with(&img, aae.norm_min, aae.norm_max)?;
    let x_hat = reconstruct_image(&aae, &x)?;
    write_image(&paths.reconstructed(), &x_hat)?;
    render_image(&paths.reconstructed_pgm(), &x_hat, Some(RENDER_CLIP_PERCENT))?;
    Ok(x_hat)
}

fn write_method_map(map: &AnomalyMap, method: &str, paths: &OutPaths) -> Result<()> {
    write_map(&paths.map_sart(method), map)?;
    write_pgm(
        &paths.map_pgm(method),
        map.height(),
        map.width(),
        map.scores(),
        None,
    )
}

/// Covariance-distance map between the despeckled artifact and its
/// reconstruction, the primary detector output.
pub fn stage_detect(
    aae_dir: &Path,
    despeckled: &Path,
    reconstructed: &Path,
    k: usize,
    paths: &OutPaths,
) -> Result<AnomalyMap> {
    paths.ensure_root()?;
    let aae = load_aae(aae_dir)?;
    let x = normalize_with(&read_image(despeckled)?, aae.norm_min, aae.norm_max)?;
    let x_hat = read_image(reconstructed)?;
    let map = normalize_map(&anomaly_map_frobenius(&x, &x_hat, k)?);
    write_method_map(&map, Method::Covariance.name(), paths)?;
    Ok(map)
}

pub fn stage_rx(slc: &Path, outer: usize, guard: usize, paths: &OutPaths) -> Result<AnomalyMap> {
    paths.ensure_root()?;
    let img = read_slc(slc)?.merge_cross_pol()?;
    let map = normalize_map(&rx_map(&img, outer, guard)?);
    write_method_map(&map, Method::Rx.name(), paths)?;
    Ok(map)
}

fn method_map_from_artifacts(
    method: Method,
    aae: &AaeBundle,
    k: usize,
    rx_outer: usize,
    rx_guard: usize,
    paths: &OutPaths,
) -> Result<AnomalyMap> {
    match method {
        Method::Covariance => {
            let x = normalize_with(&read_image(&paths.despeckled())?, aae.norm_min, aae.norm_max)?;
            let x_hat = read_image(&paths.reconstructed())?;
            Ok(normalize_map(&anomaly_map_frobenius(&x, &x_hat, k)?))
        }
        Method::CovarianceNoisy => {
            let x = normalize_with(&read_image(&paths.noisy_log())?, aae.norm_min, aae.norm_max)?;
            let x_hat = reconstruct_image(aae, &x)?;
            Ok(normalize_map(&anomaly_map_frobenius(&x, &x_hat, k)?))
        }
        Method::L1 => {
            let x = normalize_with(&read_image(&paths.despeckled())?, aae.norm_min, aae.norm_max)?;
            let x_hat = read_image(&paths.reconstructed())?;
            Ok(normalize_map(&anomaly_map_l1(&x, &x_hat)?))
        }
        Method::Rx => {
            let img = read_slc(&paths.slc())?.merge_cross_pol()?;
            Ok(normalize_map(&rx_map(&img, rx_outer, rx_guard)?))
        }
    }
}

/// Scores every method against the label mask using the artifacts
/// already in the directory, writing one map, render and ROC per method
/// plus the summary table. Methods may run in parallel; results do not
/// depend on the thread count.
pub fn evaluate_from_artifacts(
    k: usize,
    rx_outer: usize,
    rx_guard: usize,
    threads: usize,
    paths: &OutPaths,
) -> Result<Vec<(String, f64)>> {
    let aae = load_aae(&paths.aae_dir())?;
    let (labels, _, _) = read_labels(&paths.labels())?;
    let maps = par_map(Method::all().to_vec(), threads, &|m: Method| {
        method_map_from_artifacts(m, &aae, k, rx_outer, rx_guard, paths).map(|map| (m, map))
    });
    let mut rows = Vec::with_capacity(maps.len());
    for result in maps {
        let (method, map) = result?;
        let roc = roc_auc(&map, &labels)?;
        write_method_map(&map, method.name(), paths)?;
        write_roc(&paths.roc_csv(method.name()), &roc)?;
        rows.push((method.name().to_string(), roc.auc()));
    }
    write_results(&paths.results(), &rows)?;
    Ok(rows)
}

/// Rebuilds the labeled scene from the simulation artifacts.
pub fn load_labeled_scene(paths: &OutPaths) -> Result<LabeledScene> {
    let slc = read_slc(&paths.slc())?;
    let clean = read_image(&paths.clean())?;
    let (labels, _, _) = read_labels(&paths.labels())?;
    Ok(LabeledScene::new(slc, clean, labels, Vec::new())?)
}

/// Like [`evaluate_from_artifacts`] but re-runs every method's full
/// chain from the observation and reports honest wall-clock runtimes, so
/// it stays sequential.
pub fn evaluate_timed(
    despeckler_dir: &Path,
    aae_dir: &Path,
    k: usize,
    rx_outer: usize,
    rx_guard: usize,
    paths: &OutPaths,
) -> Result<Vec<(String, f64, f64)>> {
    let scene = load_labeled_scene(paths)?;
    let despeckler = load_model(despeckler_dir)?;
    let aae = load_aae(aae_dir)?;
    let mut rows = Vec::with_capacity(4);
    for method in Method::all() {
        let start = Instant::now();
        let map = run_method(&scene, method, &despeckler, &aae, k, rx_outer, rx_guard)?;
        let seconds = start.elapsed().as_secs_f64();
        let roc = roc_auc(&map, scene.labels())?;
        write_method_map(&map, method.name(), paths)?;
        write_roc(&paths.roc_csv(method.name()), &roc)?;
        rows.push((method.name().to_string(), roc.auc(), seconds));
    }
    write_results_timed(&paths.results(), &rows)?;
    Ok(rows)
}

/// Everything one end-to-end run needs; the scene spec is resolved by
/// the caller so a scene file and the built-in background share a path.
pub struct PipelineParams {
    pub scene: SceneSpec,
    pub anomalies: bool,
    pub despeckle: DespeckleTrainConfig,
    pub data: TrainData,
    pub aae: AaeTrainConfig,
    pub aae_patch: usize,
    pub aae_stride: usize,
    pub k: usize,
    pub rx_outer: usize,
    pub rx_guard: usize,
    pub threads: usize,
}

/// Simulate, train both models, despeckle, reconstruct, evaluate. Each
/// stage consumes the files the previous one wrote, so the directory is
/// the complete record of the run.
pub fn run_pipeline(p: &PipelineParams, paths: &OutPaths) -> Result<Vec<(String, f64)>> {
    let note = |msg: &str| eprintln!("{msg}");
    note("[1/6] simulating the scene");
    stage_simulate(&p.scene, p.anomalies, paths)?;
    note("[2/6] training the despeckler");
    stage_despeckle_train(&p.despeckle, &p.data, paths)?;
    note("[3/6] despeckling");
    stage_despeckle(&paths.despeckler_dir(), &paths.noisy_log(), paths)?;
    note("[4/6] training the autoencoder");
    stage_aae_train(&p.aae, p.aae_patch, p.aae_stride, &paths.despeckled(), paths)?;
    note("[5/6] reconstructing");
    stage_reconstruct(&paths.aae_dir(), &paths.despeckled(), paths)?;
    note("[6/6] evaluating the detectors");
    evaluate_from_artifacts(p.k, p.rx_outer, p.rx_guard, p.threads, paths)
}
