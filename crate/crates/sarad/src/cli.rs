//! Command-line front end. Every flag has a default, so a bare
//! `sarad pipeline` runs the whole chain; a config file can replace any
//! subset of flags and explicit flags win over it.

use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Command};

use sarad_core::aae::AaeTrainConfig;
use sarad_core::despeckler::DespeckleTrainConfig;
use sarad_core::detect::{DEFAULT_SEMI_KERNEL, RX_GUARD, RX_OUTER};
use sarad_core::eval::benchmark_background;
use sarad_core::nn::LrSchedule;
use sarad_core::speckle::SceneSpec;

use crate::config::{FileConfig, Resolver};
use crate::error::Result;
use crate::pipeline::{
    evaluate_timed, run_pipeline, stage_aae_train, stage_despeckle, stage_despeckle_train,
    stage_detect, stage_reconstruct, stage_rx, stage_simulate, OutPaths, PipelineParams,
    TrainData, DEFAULT_AAE_PATCH, DEFAULT_AAE_STRIDE, DEFAULT_DATES, DEFAULT_HEIGHT,
    DEFAULT_LOOKS, DEFAULT_TRAIN_SCENES, DEFAULT_TRAIN_SIDE, DEFAULT_WIDTH,
};
use crate::scene_file::read_scene;

pub const DEFAULT_OUT: &str = "sarad-out";
pub const DEFAULT_SEED: u64 = 7;

fn opt(name: &'static str, default: String, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("VALUE")
        .default_value(default)
        .help(help)
}

fn scene_args(cmd: Command) -> Command {
    cmd.arg(opt(
        "height",
        DEFAULT_HEIGHT.to_string(),
        "scene height in pixels",
    ))
    .arg(opt(
        "width",
        DEFAULT_WIDTH.to_string(),
        "scene width in pixels",
    ))
    .arg(opt(
        "anomalies",
        "true".into(),
        "embed the anomaly grid (true|false)",
    ))
    .arg(opt(
        "scene",
        String::new(),
        "scene description file; empty for the built-in scene",
    ))
}

fn despeckle_train_args(cmd: Command, prefix_collisions: bool) -> Command {
    let desk = DespeckleTrainConfig::desk(0);
    let (patch, batch) = if prefix_collisions {
        ("despeckle-patch", "despeckle-batch")
    } else {
        ("patch", "batch")
    };
    cmd.arg(opt(
        "train-side",
        DEFAULT_TRAIN_SIDE.to_string(),
        "side of the training scenes",
    ))
    .arg(opt(
        "train-scenes",
        DEFAULT_TRAIN_SCENES.to_string(),
        "number of training scenes",
    ))
    .arg(opt(
        "dates",
        DEFAULT_DATES.to_string(),
        "acquisition dates per training scene",
    ))
    .arg(opt(
        "looks",
        DEFAULT_LOOKS.to_string(),
        "looks averaged into each clean reference",
    ))
    .arg(opt(patch, desk.patch.to_string(), "training patch side"))
    .arg(opt(batch, desk.batch.to_string(), "training batch size"))
    .arg(opt(
        "epochs-a",
        desk.epochs_a.to_string(),
        "epochs of supervised pretraining",
    ))
    .arg(opt(
        "epochs-b",
        desk.epochs_b.to_string(),
        "epochs of date-pair training",
    ))
    .arg(opt(
        "epochs-c",
        desk.epochs_c.to_string(),
        "epochs of change-compensated training",
    ))
    .arg(opt(
        "batches-per-epoch",
        desk.batches_per_epoch.to_string(),
        "optimizer steps per epoch",
    ))
    .arg(opt(
        "net-width",
        desk.width.to_string(),
        "despeckler feature channels",
    ))
    .arg(opt(
        "net-depth",
        desk.depth.to_string(),
        "despeckler convolution layers",
    ))
    .arg(opt("lr-low", "0.001".into(), "lower cyclical learning rate"))
    .arg(opt("lr-high", "0.01".into(), "upper cyclical learning rate"))
    .arg(opt(
        "lr-ramp",
        "33".into(),
        "batches from the low to the high rate",
    ))
}

fn aae_train_args(cmd: Command, prefix_collisions: bool) -> Command {
    let desk = AaeTrainConfig::desk(0);
    let (batch, epochs, lr_low, lr_high, patch, stride) = if prefix_collisions {
        ("aae-batch", "aae-epochs", "aae-lr-low", "aae-lr-high", "aae-patch", "aae-stride")
    } else {
        ("batch", "epochs", "lr-low", "lr-high", "patch", "stride")
    };
    cmd.arg(opt(
        "latent",
        desk.latent.to_string(),
        "latent space dimension",
    ))
    .arg(opt(batch, desk.batch.to_string(), "training batch size"))
    .arg(opt(epochs, desk.epochs.to_string(), "training epochs"))
    .arg(opt(
        lr_low,
        desk.lr_low.to_string(),
        "lower cyclical learning rate",
    ))
    .arg(opt(
        lr_high,
        desk.lr_high.to_string(),
        "upper cyclical learning rate",
    ))
    .arg(opt(
        "cycle-epochs",
        desk.cycle_epochs.to_string(),
        "epochs per learning-rate triangle",
    ))
    .arg(opt(patch, DEFAULT_AAE_PATCH.to_string(), "autoencoder patch side"))
    .arg(opt(
        stride,
        DEFAULT_AAE_STRIDE.to_string(),
        "stride between training patches",
    ))
}

fn detect_args(cmd: Command) -> Command {
    cmd.arg(opt(
        "window",
        DEFAULT_SEMI_KERNEL.to_string(),
        "covariance window semi-width",
    ))
}

fn rx_args(cmd: Command) -> Command {
    cmd.arg(opt(
        "outer",
        RX_OUTER.to_string(),
        "outer window side of the sliding detector",
    ))
    .arg(opt(
        "guard",
        RX_GUARD.to_string(),
        "guard window side excluded from the background",
    ))
}

pub fn build_cli() -> Command {
    Command::new("sarad")
        .about("Self-contained anomaly detection for synthetic-aperture radar scenes")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .default_value("")
                .global(true)
                .help("key = value file consulted for any flag not given"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .default_value(DEFAULT_OUT)
                .global(true)
                .help("directory all artifacts live in"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_name("VALUE")
                .default_value(DEFAULT_SEED.to_string())
                .global(true)
                .help("root seed for every random stream"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_name("VALUE")
                .default_value("1")
                .global(true)
                .help("worker threads for the evaluation stage"),
        )
        .subcommand(scene_args(Command::new("simulate").about(
            "Render a scene, embed anomalies and write the speckled observation",
        )))
        .subcommand(despeckle_train_args(
            Command::new("despeckle-train")
                .about("Train the despeckler on simulated acquisition stacks"),
            false,
        ))
        .subcommand(
            Command::new("despeckle")
                .about("Despeckle a log-intensity image with a trained model")
                .arg(opt("model", "despeckler".into(), "despeckler checkpoint directory"))
                .arg(opt("input", "noisy_log.sart".into(), "log-intensity input image")),
        )
        .subcommand(aae_train_args(
            Command::new("aae-train")
                .about("Train the adversarial autoencoder on a despeckled image")
                .arg(opt("input", "despeckled.sart".into(), "despeckled log image")),
            false,
        ))
        .subcommand(
            Command::new("reconstruct")
                .about("Reconstruct an anomaly-free estimate with a trained autoencoder")
                .arg(opt("aae", "aae".into(), "autoencoder checkpoint directory"))
                .arg(opt("input", "despeckled.sart".into(), "despeckled log image")),
        )
        .subcommand(detect_args(
            Command::new("detect")
                .about("Covariance-distance anomaly map from an image and its reconstruction")
                .arg(opt("aae", "aae".into(), "autoencoder checkpoint directory"))
                .arg(opt(
                    "despeckled",
                    "despeckled.sart".into(),
                    "despeckled log image",
                ))
                .arg(opt(
                    "reconstructed",
                    "reconstructed.sart".into(),
                    "reconstructed normalized image",
                )),
        ))
        .subcommand(rx_args(
            Command::new("rx")
                .about("Classical sliding-window detector on the complex observation")
                .arg(opt("input", "slc.sart".into(), "complex observation image")),
        ))
        .subcommand(rx_args(detect_args(
            Command::new("evaluate")
                .about("Score every detector against the labels, timing each full chain")
                .arg(opt(
                    "despeckler",
                    "despeckler".into(),
                    "despeckler checkpoint directory",
                ))
                .arg(opt("aae", "aae".into(), "autoencoder checkpoint directory")),
        )))
        .subcommand(rx_args(detect_args(aae_train_args(
            despeckle_train_args(
                scene_args(Command::new("pipeline").about(
                    "Simulate, train, despeckle, reconstruct and evaluate end to end",
                )),
                true,
            ),
            true,
        ))))
}

pub fn run() -> i32 {
    let matches = build_cli()
        .try_get_matches()
        .unwrap_or_else(|e| e.exit());
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match execute(name, sub) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(name: &str, sub: &ArgMatches) -> Result<()> {
    let config = match sub.get_one::<String>("config").map(String::as_str) {
        Some("") | None => FileConfig::none(),
        Some(path) => FileConfig::load(Path::new(path))?,
    };
    let r = Resolver::new(sub, &config, name);
    let out = PathBuf::from(r.raw("out"));
    let seed: u64 = r.get("seed")?;
    let paths = OutPaths::new(&out);
    println!("seed: {seed}");
    match name {
        "simulate" => cmd_simulate(&r, &paths, seed),
        "despeckle-train" => cmd_despeckle_train(&r, &paths, seed, false),
        "despeckle" => cmd_despeckle(&r, &paths),
        "aae-train" => cmd_aae_train(&r, &paths, seed, false),
        "reconstruct" => cmd_reconstruct(&r, &paths),
        "detect" => cmd_detect(&r, &paths),
        "rx" => cmd_rx(&r, &paths),
        "evaluate" => cmd_evaluate(&r, &paths),
        "pipeline" => cmd_pipeline(&r, &paths, seed),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn scene_for(r: &Resolver, paths: &OutPaths, seed: u64) -> Result<SceneSpec> {
    match r.opt_path_in("scene", paths.root()) {
        Some(path) => {
            let mut spec = read_scene(&path)?;
            // The scene file carries its own seed; an explicit --seed or a
            // configured one takes it over.
            if r.configured("seed") {
                spec.seed = seed;
            }
            Ok(spec)
        }
        None => Ok(benchmark_background(
            seed,
            r.get("height")?,
            r.get("width")?,
        )),
    }
}

fn cmd_simulate(r: &Resolver, paths: &OutPaths, seed: u64) -> Result<()> {
    let spec = scene_for(r, paths, seed)?;
    stage_simulate(&spec, r.get("anomalies")?, paths)?;
    println!(
        "simulate: wrote a {}x{}x{} scene to {}",
        spec.height,
        spec.width,
        spec.channels,
        paths.root().display()
    );
    Ok(())
}

fn despeckle_config(r: &Resolver, seed: u64, prefixed: bool) -> Result<DespeckleTrainConfig> {
    let (patch, batch) = if prefixed {
        ("despeckle-patch", "despeckle-batch")
    } else {
        ("patch", "batch")
    };
    Ok(DespeckleTrainConfig {
        seed,
        patch: r.get(patch)?,
        batch: r.get(batch)?,
        epochs_a: r.get("epochs-a")?,
        epochs_b: r.get("epochs-b")?,
        epochs_c: r.get("epochs-c")?,
        batches_per_epoch: r.get("batches-per-epoch")?,
        width: r.get("net-width")?,
        depth: r.get("net-depth")?,
        lr: LrSchedule::new(r.get("lr-low")?, r.get("lr-high")?, r.get("lr-ramp")?)?,
    })
}

fn train_data(r: &Resolver) -> Result<TrainData> {
    Ok(TrainData {
        side: r.get("train-side")?,
        scenes: r.get("train-scenes")?,
        dates: r.get("dates")?,
        looks: r.get("looks")?,
    })
}

fn cmd_despeckle_train(r: &Resolver, paths: &OutPaths, seed: u64, prefixed: bool) -> Result<()> {
    let config = despeckle_config(r, seed, prefixed)?;
    let data = train_data(r)?;
    let model = stage_despeckle_train(&config, &data, paths)?;
    println!(
        "despeckle-train: {} optimizer steps -> {}",
        model.adam.step,
        paths.despeckler_dir().display()
    );
    Ok(())
}

fn cmd_despeckle(r: &Resolver, paths: &OutPaths) -> Result<()> {
    let model = r.path_in("model", paths.root());
    let input = r.path_in("input", paths.root());
    stage_despeckle(&model, &input, paths)?;
    println!("despeckle: wrote {}", paths.despeckled().display());
    Ok(())
}

fn aae_config(r: &Resolver, seed: u64, prefixed: bool) -> Result<(AaeTrainConfig, usize, usize)> {
    let (batch, epochs, lr_low, lr_high, patch, stride) = if prefixed {
        ("aae-batch", "aae-epochs", "aae-lr-low", "aae-lr-high", "aae-patch", "aae-stride")
    } else {
        ("batch", "epochs", "lr-low", "lr-high", "patch", "stride")
    };
    let config = AaeTrainConfig {
        seed,
        latent: r.get("latent")?,
        batch: r.get(batch)?,
        epochs: r.get(epochs)?,
        lr_low: r.get(lr_low)?,
        lr_high: r.get(lr_high)?,
        cycle_epochs: r.get("cycle-epochs")?,
    };
    Ok((config, r.get(patch)?, r.get(stride)?))
}

fn cmd_aae_train(r: &Resolver, paths: &OutPaths, seed: u64, prefixed: bool) -> Result<()> {
    let (config, patch, stride) = aae_config(r, seed, prefixed)?;
    let input = r.path_in("input", paths.root());
    stage_aae_train(&config, patch, stride, &input, paths)?;
    println!(
        "aae-train: {} epochs -> {}",
        config.epochs,
        paths.aae_dir().display()
    );
    Ok(())
}

fn cmd_reconstruct(r: &Resolver, paths: &OutPaths) -> Result<()> {
    let aae = r.path_in("aae", paths.root());
    let input = r.path_in("input", paths.root());
    stage_reconstruct(&aae, &input, paths)?;
    println!("reconstruct: wrote {}", paths.reconstructed().display());
    Ok(())
}

fn cmd_detect(r: &Resolver, paths: &OutPaths) -> Result<()> {
    let aae = r.path_in("aae", paths.root());
    let despeckled = r.path_in("despeckled", paths.root());
    let reconstructed = r.path_in("reconstructed", paths.root());
    stage_detect(&aae, &despeckled, &reconstructed, r.get("window")?, paths)?;
    println!("detect: wrote {}", paths.map_sart("covariance").display());
    Ok(())
}

fn cmd_rx(r: &Resolver, paths: &OutPaths) -> Result<()> {
    let input = r.path_in("input", paths.root());
    stage_rx(&input, r.get("outer")?, r.get("guard")?, paths)?;
    println!("rx: wrote {}", paths.map_sart("rx").display());
    Ok(())
}

fn auc_summary(rows: &[(String, f64)]) -> String {
    rows.iter()
        .map(|(m, auc)| format!("{m}={auc:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_evaluate(r: &Resolver, paths: &OutPaths) -> Result<()> {
    let despeckler = r.path_in("despeckler", paths.root());
    let aae = r.path_in("aae", paths.root());
    let rows = evaluate_timed(
        &despeckler,
        &aae,
        r.get("window")?,
        r.get("outer")?,
        r.get("guard")?,
        paths,
    )?;
    let summary: Vec<(String, f64)> = rows.iter().map(|(m, a, _)| (m.clone(), *a)).collect();
    println!("evaluate: {}", auc_summary(&summary));
    Ok(())
}

fn cmd_pipeline(r: &Resolver, paths: &OutPaths, seed: u64) -> Result<()> {
    let (aae, aae_patch, aae_stride) = aae_config(r, seed, true)?;
    let params = PipelineParams {
        scene: scene_for(r, paths, seed)?,
        anomalies: r.get("anomalies")?,
        despeckle: despeckle_config(r, seed, true)?,
        data: train_data(r)?,
        aae,
        aae_patch,
        aae_stride,
        k: r.get("window")?,
        rx_outer: r.get("outer")?,
        rx_guard: r.get("guard")?,
        threads: r.get("threads")?,
    };
    let rows = run_pipeline(&params, paths)?;
    println!("pipeline: {}", auc_summary(&rows));
    Ok(())
}
