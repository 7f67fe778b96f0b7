//! Model checkpoints: a directory holding one tensor file per parameter
//! and optimizer moment, plus a plain-text manifest naming them next to
//! the layer specs, the Adam step counter, and the init seed. An
//! autoencoder bundle nests three model directories under one manifest
//! that also carries the normalization bounds.
//!
//! Tensors ride in the standard container, so checkpointed weights are
//! narrowed to f32. Loading therefore reproduces the saved files, not
//! the in-memory training state bit for bit; every consumer reloads the
//! checkpoint it just wrote before inferring with it.

use std::fmt::Write as _;
use std::path::Path;

use sarad_core::aae::AaeBundle;
use sarad_core::nn::{AdamState, Layer, LayerSpec, ModelBundle, Tensor};
use sarad_core::CounterRng;

use crate::error::{format_err, io_err, Result};
use crate::kv::{parse_field, KeyValueFile};
use crate::tensor_io::{read_tensor, write_tensor, TensorFile, TensorPayload, TensorTag};

pub const CHECKPOINT_VERSION: u32 = 1;

fn spec_line(spec: &LayerSpec) -> String {
    match *spec {
        LayerSpec::Dense { input, output } => format!("dense {input} {output}"),
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        } => format!("conv {in_channels} {out_channels} {kernel} {stride} {padding}"),
        LayerSpec::TransposedConv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        } => format!("tconv {in_channels} {out_channels} {kernel} {stride} {padding}"),
        LayerSpec::LeakyRelu { slope } => format!("lrelu {slope}"),
        LayerSpec::Sigmoid => "sigmoid".to_string(),
        LayerSpec::Tanh => "tanh".to_string(),
        LayerSpec::Flatten => "flatten".to_string(),
        LayerSpec::Reshape {
            height,
            width,
            channels,
        } => format!("reshape {height} {width} {channels}"),
    }
}

fn parse_spec_line(kv: &KeyValueFile, line: usize, raw: &str) -> Result<LayerSpec> {
    let fields: Vec<&str> = raw.split_whitespace().collect();
    let arity = |n: usize| -> Result<()> {
        if fields.len() == n + 1 {
            Ok(())
        } else {
            Err(kv.parse_err(line, format!("layer `{}` takes {n} fields", fields[0])))
        }
    };
    let num =
        |i: usize, what: &str| -> Result<usize> { parse_field(kv, line, what, fields[i]) };
    match fields.first() {
        Some(&"dense") => {
            arity(2)?;
            Ok(LayerSpec::Dense {
                input: num(1, "input")?,
                output: num(2, "output")?,
            })
        }
        Some(&"conv") => {
            arity(5)?;
            Ok(LayerSpec::Conv2d {
                in_channels: num(1, "in_channels")?,
                out_channels: num(2, "out_channels")?,
                kernel: num(3, "kernel")?,
                stride: num(4, "stride")?,
                padding: num(5, "padding")?,
            })
        }
        Some(&"tconv") => {
            arity(5)?;
            Ok(LayerSpec::TransposedConv2d {
                in_channels: num(1, "in_channels")?,
                out_channels: num(2, "out_channels")?,
                kernel: num(3, "kernel")?,
                stride: num(4, "stride")?,
                padding: num(5, "padding")?,
            })
        }
        Some(&"lrelu") => {
            arity(1)?;
            Ok(LayerSpec::LeakyRelu {
                slope: parse_field(kv, line, "slope", fields[1])?,
            })
        }
        Some(&"sigmoid") => {
            arity(0)?;
            Ok(LayerSpec::Sigmoid)
        }
        Some(&"tanh") => {
            arity(0)?;
            Ok(LayerSpec::Tanh)
        }
        Some(&"flatten") => {
            arity(0)?;
            Ok(LayerSpec::Flatten)
        }
        Some(&"reshape") => {
            arity(3)?;
            Ok(LayerSpec::Reshape {
                height: num(1, "height")?,
                width: num(2, "width")?,
                channels: num(3, "channels")?,
            })
        }
        _ => Err(kv.parse_err(line, format!("unknown layer kind in `{raw}`"))),
    }
}

fn tensor_of(t: &Tensor) -> TensorFile {
    TensorFile {
        // Weights live on the whole real line, like log-domain values.
        tag: TensorTag::Log,
        dims: t.shape().to_vec(),
        payload: TensorPayload::Real(t.data().to_vec()),
    }
}

fn tensor_from(path: &Path) -> Result<Tensor> {
    let t = read_tensor(path)?;
    let TensorPayload::Real(values) = t.payload else {
        return Err(format_err(path, "parameter tensors are real-valued"));
    };
    Ok(Tensor::new(t.dims, values)?)
}

pub fn save_model(dir: &Path, model: &ModelBundle) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "checkpoint = model");
    let _ = writeln!(manifest, "version = {CHECKPOINT_VERSION}");
    let _ = writeln!(manifest, "seed = {}", model.seed);
    let _ = writeln!(manifest, "step = {}", model.adam.step);
    let _ = writeln!(manifest, "layers = {}", model.layers.len());
    for (i, layer) in model.layers.iter().enumerate() {
        let _ = writeln!(manifest, "layer.{i} = {}", spec_line(&layer.spec));
    }
    for (i, layer) in model.layers.iter().enumerate() {
        for (j, param) in layer.params.iter().enumerate() {
            let names = [
                format!("p{i}_{j}.sart"),
                format!("m{i}_{j}.sart"),
                format!("v{i}_{j}.sart"),
            ];
            write_tensor(&dir.join(&names[0]), &tensor_of(param))?;
            write_tensor(&dir.join(&names[1]), &tensor_of(&model.adam.first_moments()[i][j]))?;
            write_tensor(&dir.join(&names[2]), &tensor_of(&model.adam.second_moments()[i][j]))?;
            let _ = writeln!(manifest, "param.{i}.{j} = {} {} {}", names[0], names[1], names[2]);
        }
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest).map_err(|e| io_err(&path, e))
}

pub fn load_model(dir: &Path) -> Result<ModelBundle> {
    let kv = KeyValueFile::read(&dir.join("manifest.txt"))?;
    let kind = kv.require("checkpoint")?;
    if kind != "model" {
        return Err(format_err(
            kv.path(),
            format!("expected a model checkpoint, found `{kind}`"),
        ));
    }
    check_version(&kv)?;
    let seed: u64 = require_parsed(&kv, "seed")?;
    let step: u64 = require_parsed(&kv, "step")?;
    let count: usize = require_parsed(&kv, "layers")?;
    let mut layers = Vec::with_capacity(count);
    let mut m = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    for i in 0..count {
        let key = format!("layer.{i}");
        let (raw, line) = kv.require_at(&key)?;
        let spec = parse_spec_line(&kv, line, raw)?;
        // The spec dictates how many parameter tensors to expect.
        let expected = spec.init_params(&CounterRng::new(0)).len();
        let mut params = Vec::with_capacity(expected);
        let mut lm = Vec::with_capacity(expected);
        let mut lv = Vec::with_capacity(expected);
        for j in 0..expected {
            let key = format!("param.{i}.{j}");
            let names: Vec<&str> = kv.require(&key)?.split_whitespace().collect();
            if names.len() != 3 {
                return Err(format_err(
                    kv.path(),
                    format!("{key}: expected parameter, m and v tensor names"),
                ));
            }
            params.push(tensor_from(&dir.join(names[0]))?);
            lm.push(tensor_from(&dir.join(names[1]))?);
            lv.push(tensor_from(&dir.join(names[2]))?);
        }
        layers.push(Layer { spec, params });
        m.push(lm);
        v.push(lv);
    }
    Ok(ModelBundle::from_parts(
        layers,
        AdamState::from_parts(m, v, step),
        seed,
    )?)
}

pub fn save_aae(dir: &Path, bundle: &AaeBundle) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    save_model(&dir.join("encoder"), &bundle.encoder)?;
    save_model(&dir.join("decoder"), &bundle.decoder)?;
    save_model(&dir.join("discriminator"), &bundle.discriminator)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "checkpoint = aae");
    let _ = writeln!(manifest, "version = {CHECKPOINT_VERSION}");
    let _ = writeln!(manifest, "latent = {}", bundle.latent_dim);
    let _ = writeln!(manifest, "patch = {}", bundle.patch);
    let _ = writeln!(manifest, "channels = {}", bundle.channels);
    let _ = writeln!(manifest, "norm_min = {}", bundle.norm_min);
    let _ = writeln!(manifest, "norm_max = {}", bundle.norm_max);
    let _ = writeln!(manifest, "encoder = encoder");
    let _ = writeln!(manifest, "decoder = decoder");
    let _ = writeln!(manifest, "discriminator = discriminator");
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest).map_err(|e| io_err(&path, e))
}

pub fn load_aae(dir: &Path) -> Result<AaeBundle> {
    let kv = KeyValueFile::read(&dir.join("manifest.txt"))?;
    let kind = kv.require("checkpoint")?;
    if kind != "aae" {
        return Err(format_err(
            kv.path(),
            format!("expected an aae checkpoint, found `{kind}`"),
        ));
    }
    check_version(&kv)?;
    let bundle = AaeBundle {
        encoder: load_model(&dir.join(kv.require("encoder")?))?,
        decoder: load_model(&dir.join(kv.require("decoder")?))?,
        discriminator: load_model(&dir.join(kv.require("discriminator")?))?,
        latent_dim: require_parsed(&kv, "latent")?,
        patch: require_parsed(&kv, "patch")?,
        channels: require_parsed(&kv, "channels")?,
        norm_min: require_parsed(&kv, "norm_min")?,
        norm_max: require_parsed(&kv, "norm_max")?,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn check_version(kv: &KeyValueFile) -> Result<()> {
    let version: u32 = require_parsed(kv, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(format_err(
            kv.path(),
            format!("unsupported checkpoint version {version}"),
        ));
    }
    Ok(())
}

fn require_parsed<T: std::str::FromStr>(kv: &KeyValueFile, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let (raw, line) = kv.require_at(key)?;
    parse_field(kv, line, key, raw)
}
