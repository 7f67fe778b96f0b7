//! Scene descriptions as key=value text. Repeated `segment` and
//! `scatterer` keys carry whitespace-separated fields:
//!
//! ```text
//! segment   = row0 col0 row1 col1 texture_sigma level_per_channel...
//! scatterer = row col amplitude
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sarad_core::speckle::{Scatterer, SceneSpec, Segment};

use crate::error::{io_err, Result};
use crate::kv::{parse_field, KeyValueFile};

const SCALAR_KEYS: [&str; 6] = [
    "height",
    "width",
    "channels",
    "seed",
    "base_levels",
    "base_texture_sigma",
];

pub fn read_scene(path: &Path) -> Result<SceneSpec> {
    let kv = KeyValueFile::read(path)?;
    parse_scene(&kv)
}

pub fn parse_scene(kv: &KeyValueFile) -> Result<SceneSpec> {
    for (key, line) in kv.keys() {
        if !SCALAR_KEYS.contains(&key) && key != "segment" && key != "scatterer" {
            return Err(kv.parse_err(line, format!("unknown key `{key}`")));
        }
    }
    let scalar = |key: &str| -> Result<&str> { kv.require(key) };
    let height: usize = parse_field(kv, 0, "height", scalar("height")?)?;
    let width: usize = parse_field(kv, 0, "width", scalar("width")?)?;
    let channels: usize = parse_field(kv, 0, "channels", scalar("channels")?)?;
    let seed: u64 = parse_field(kv, 0, "seed", scalar("seed")?)?;
    let base_levels = parse_levels(kv, 0, "base_levels", scalar("base_levels")?, channels)?;
    let base_texture_sigma: f64 = match kv.get("base_texture_sigma") {
        Some(raw) => parse_field(kv, 0, "base_texture_sigma", raw)?,
        None => 0.0,
    };
    let mut segments = Vec::new();
    for (raw, line) in kv.all("segment") {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 5 + channels {
            return Err(kv.parse_err(
                line,
                format!("segment needs {} fields, got {}", 5 + channels, fields.len()),
            ));
        }
        segments.push(Segment {
            row0: parse_field(kv, line, "segment row0", fields[0])?,
            col0: parse_field(kv, line, "segment col0", fields[1])?,
            row1: parse_field(kv, line, "segment row1", fields[2])?,
            col1: parse_field(kv, line, "segment col1", fields[3])?,
            texture_sigma: parse_field(kv, line, "segment texture_sigma", fields[4])?,
            levels: fields[5..]
                .iter()
                .map(|f| parse_field(kv, line, "segment level", f))
                .collect::<Result<_>>()?,
        });
    }
    let mut scatterers = Vec::new();
    for (raw, line) in kv.all("scatterer") {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(kv.parse_err(line, format!("scatterer needs 3 fields, got {}", fields.len())));
        }
        scatterers.push(Scatterer {
            row: parse_field(kv, line, "scatterer row", fields[0])?,
            col: parse_field(kv, line, "scatterer col", fields[1])?,
            amplitude: parse_field(kv, line, "scatterer amplitude", fields[2])?,
        });
    }
    Ok(SceneSpec {
        height,
        width,
        channels,
        base_levels,
        base_texture_sigma,
        segments,
        scatterers,
        seed,
    })
}

fn parse_levels(
    kv: &KeyValueFile,
    line: usize,
    key: &str,
    raw: &str,
    channels: usize,
) -> Result<Vec<f64>> {
    let levels: Vec<f64> = raw
        .split_whitespace()
        .map(|f| parse_field(kv, line, key, f))
        .collect::<Result<_>>()?;
    if levels.len() != channels {
        return Err(kv.parse_err(
            line,
            format!("{key} needs {channels} values, got {}", levels.len()),
        ));
    }
    Ok(levels)
}

pub fn write_scene(path: &Path, spec: &SceneSpec) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "height = {}", spec.height);
    let _ = writeln!(text, "width = {}", spec.width);
    let _ = writeln!(text, "channels = {}", spec.channels);
    let _ = writeln!(text, "seed = {}", spec.seed);
    let _ = writeln!(text, "base_levels = {}", join(&spec.base_levels));
    let _ = writeln!(text, "base_texture_sigma = {}", spec.base_texture_sigma);
    for s in &spec.segments {
        let _ = writeln!(
            text,
            "segment = {} {} {} {} {} {}",
            s.row0,
            s.col0,
            s.row1,
            s.col1,
            s.texture_sigma,
            join(&s.levels)
        );
    }
    for sc in &spec.scatterers {
        let _ = writeln!(text, "scatterer = {} {} {}", sc.row, sc.col, sc.amplitude);
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
