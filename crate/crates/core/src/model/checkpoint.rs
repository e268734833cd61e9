//! Plain-text model checkpoints.
//!
//! One `key = value` pair per line; arrays are whitespace-separated and
//! matrices are stored row-major next to an explicit `.shape` entry. Floats
//! use Rust's shortest round-trip formatting so a write/read cycle is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{GcnParams, GnnParams, MlpParams, Model, MultiscaleParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# gnnlab model checkpoint\n");
    line(&mut out, "version", &CHECKPOINT_VERSION.to_string());
    line(&mut out, "model", model.kind_name());
    match model {
        Model::Gnn(p) => {
            write_gcn(&mut out, &p.gcn);
            write_mlp(&mut out, "readout", &p.mlp);
        }
        Model::Mlp(p) => write_mlp(&mut out, "readout", p),
        Model::Multiscale(p) => {
            line(&mut out, "multiscale.alpha", &join(p.alpha.iter()));
            write_matrix(&mut out, "multiscale.weight", &p.weight);
            write_mlp(&mut out, "readout", &p.head);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text).map_err(|message| Error::format(path, message))
}

fn line(out: &mut String, key: &str, value: &str) {
    let _ = writeln!(out, "{key} = {value}");
}

fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn write_matrix(out: &mut String, key: &str, m: &Array2<f64>) {
    line(out, &format!("{key}.shape"), &format!("{} {}", m.nrows(), m.ncols()));
    line(out, key, &join(m.iter()));
}

fn write_gcn(out: &mut String, p: &GcnParams) {
    line(out, "gcn.depth", &p.depth().to_string());
    line(out, "gcn.gamma_trainable", &p.gamma_trainable.to_string());
    line(out, "gcn.gamma", &join(p.gamma.iter()));
    for (l, w) in p.weights.iter().enumerate() {
        write_matrix(out, &format!("gcn.weight.{l}"), w);
    }
}

fn write_mlp(out: &mut String, prefix: &str, p: &MlpParams) {
    let widths: Vec<String> = p.widths.iter().map(|w| w.to_string()).collect();
    line(out, &format!("{prefix}.widths"), &widths.join(" "));
    line(out, &format!("{prefix}.f_trunc"), &format!("{:?}", p.f_trunc));
    for (l, (w, b)) in p.weights.iter().zip(&p.biases).enumerate() {
        write_matrix(out, &format!("{prefix}.weight.{l}"), w);
        line(out, &format!("{prefix}.bias.{l}"), &join(b.iter()));
    }
}

type Fields = BTreeMap<String, String>;

fn parse_checkpoint(text: &str) -> std::result::Result<Model, String> {
    let mut fields = Fields::new();
    for (no, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", no + 1))?;
        if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key `{}`", no + 1, k.trim()));
        }
    }
    let version: u32 = scalar(&fields, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let kind = get(&fields, "model")?;
    let model = match kind {
        "gnn" => {
            let gcn = read_gcn(&fields)?;
            let mlp = read_mlp(&fields, "readout")?;
            Model::Gnn(GnnParams::new(gcn, mlp).map_err(|e| e.to_string())?)
        }
        "mlp" => Model::Mlp(read_mlp(&fields, "readout")?),
        "multiscale" => {
            let alpha = floats(get(&fields, "multiscale.alpha")?)?;
            let weight = read_matrix(&fields, "multiscale.weight", None)?;
            let head = read_mlp(&fields, "readout")?;
            Model::Multiscale(MultiscaleParams::new(alpha, weight, head).map_err(|e| e.to_string())?)
        }
        other => return Err(format!("unknown model kind `{other}`")),
    };
    Ok(model)
}

fn get<'a>(fields: &'a Fields, key: &str) -> std::result::Result<&'a str, String> {
    fields
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| format!("missing key `{key}`"))
}

fn scalar<T: std::str::FromStr>(fields: &Fields, key: &str) -> std::result::Result<T, String> {
    get(fields, key)?
        .parse()
        .map_err(|_| format!("cannot parse value of `{key}`"))
}

fn floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect()
}

fn read_matrix(fields: &Fields, key: &str, expect: Option<(usize, usize)>) -> std::result::Result<Array2<f64>, String> {
    let shape: Vec<usize> = get(fields, &format!("{key}.shape"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad shape entry `{t}` for `{key}`")))
        .collect::<std::result::Result<_, _>>()?;
    if shape.len() != 2 {
        return Err(format!("`{key}.shape` must have two entries"));
    }
    let dims = (shape[0], shape[1]);
    if let Some(e) = expect {
        if e != dims {
            return Err(format!("`{key}` has shape {dims:?}, expected {e:?}"));
        }
    }
    let values = floats(get(fields, key)?)?;
    Array2::from_shape_vec(dims, values).map_err(|_| format!("`{key}` does not match its shape"))
}

fn read_gcn(fields: &Fields) -> std::result::Result<GcnParams, String> {
    let depth: usize = scalar(fields, "gcn.depth")?;
    let gamma = floats(get(fields, "gcn.gamma")?)?;
    let weights = (0..depth)
        .map(|l| read_matrix(fields, &format!("gcn.weight.{l}"), None))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut p = GcnParams::new(weights, gamma).map_err(|e| e.to_string())?;
    p.gamma_trainable = scalar(fields, "gcn.gamma_trainable")?;
    Ok(p)
}

fn read_mlp(fields: &Fields, prefix: &str) -> std::result::Result<MlpParams, String> {
    let widths: Vec<usize> = get(fields, &format!("{prefix}.widths"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad width `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    let f_trunc: f64 = scalar(fields, &format!("{prefix}.f_trunc"))?;
    let mut p = MlpParams::zeros(widths, f_trunc).map_err(|e| e.to_string())?;
    for l in 0..p.weights.len() {
        let dims = p.weights[l].dim();
        p.weights[l] = read_matrix(fields, &format!("{prefix}.weight.{l}"), Some(dims))?;
        let b = floats(get(fields, &format!("{prefix}.bias.{l}"))?)?;
        if b.len() != p.biases[l].len() {
            return Err(format!("`{prefix}.bias.{l}` has the wrong length"));
        }
        p.biases[l] = Array1::from(b);
    }
    Ok(p)
}
