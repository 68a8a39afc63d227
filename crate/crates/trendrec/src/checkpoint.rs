//! Model checkpoints: a `key=value` config header followed by one
//! `tensor <name> <dims..>` line and one line of values per tensor.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use trendrec_core::autodiff::Tensor;
use trendrec_core::model::{Fusion, ModelConfig, ModelParams};

use crate::error::{Error, Result};
use crate::formats::write_text;

const MAGIC: &str = "# trendrec checkpoint v1";

pub fn config_header(config: &ModelConfig) -> String {
    let layers: Vec<String> = config.mlp_layers.iter().map(usize::to_string).collect();
    format!(
        "fusion={}\nemb_dim={}\ngmf_dim={}\nmlp_layers={}\nsocial_dim={}\nk={}\ndeep_head={}\nhead_hidden={}\n",
        config.fusion,
        config.emb_dim,
        config.gmf_dim,
        layers.join(","),
        config.social_dim,
        config.k,
        config.deep_head,
        config.head_hidden
    )
}

pub fn to_string(config: &ModelConfig, params: &ModelParams) -> String {
    let mut s = format!("{MAGIC}\n{}", config_header(config));
    for (name, t) in params.tensor_names().iter().zip(params.tensors()) {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        let _ = writeln!(s, "tensor {name} {}", dims.join(" "));
        let vals: Vec<String> = t.data().iter().map(f64::to_string).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    s
}

pub fn save(path: &Path, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    write_text(path, &to_string(config, params))
}

pub fn load(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}

fn parse(path: &Path, text: &str) -> Result<(ModelConfig, ModelParams)> {
    let err = |line: usize, m: String| Error::parse(path, line, m);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(err(1, "not a trendrec checkpoint".into())),
    }
    let mut config = ModelConfig::default();
    let mut tensors = Vec::new();
    let mut pending: Option<(usize, Vec<usize>)> = None;
    for (n, line) in lines {
        if let Some((header_line, shape)) = pending.take() {
            let data = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| err(n, format!("bad value {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            tensors.push(Tensor::new(shape, data).map_err(|e| err(header_line, e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("tensor ") {
            let mut parts = rest.split_whitespace();
            parts.next().ok_or_else(|| err(n, "tensor line without a name".into()))?;
            let shape = parts
                .map(|d| d.parse::<usize>().map_err(|_| err(n, format!("bad dimension {d:?}"))))
                .collect::<Result<Vec<_>>>()?;
            pending = Some((n, shape));
        } else if let Some((key, value)) = line.split_once('=') {
            let bad = |what: &str| err(n, format!("bad {what} {value:?}"));
            let num = |v: &str| v.parse::<usize>().map_err(|_| bad(key));
            match key {
                "fusion" => config.fusion = value.parse::<Fusion>().map_err(|_| bad("fusion"))?,
                "emb_dim" => config.emb_dim = num(value)?,
                "gmf_dim" => config.gmf_dim = num(value)?,
                "mlp_layers" => config.mlp_layers = value.split(',').map(num).collect::<Result<_>>()?,
                "social_dim" => config.social_dim = num(value)?,
                "k" => config.k = num(value)?,
                "deep_head" => config.deep_head = value.parse().map_err(|_| bad("deep_head"))?,
                "head_hidden" => config.head_hidden = num(value)?,
                _ => return Err(err(n, format!("unknown header key {key:?}"))),
            }
        } else if !line.trim().is_empty() {
            return Err(err(n, format!("unexpected line {line:?}")));
        }
    }
    if pending.is_some() {
        return Err(err(text.lines().count(), "tensor header without values".into()));
    }
    config.validate()?;
    let params = ModelParams::from_tensors(&config, tensors)?;
    Ok((config, params))
}
