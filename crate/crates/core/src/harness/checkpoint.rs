//! Text checkpoint container.
//!
//! ```text
//! chronoskill-ckpt v1
//! config variant multihead
//! config obs_dim 7
//! ...
//! policy.trunk.0.weight 2 7 64 <7*64 values>
//! ...
//! value.layer.0.weight 2 8 64 <values>
//! ...
//! end
//! ```
//!
//! Each tensor record is `name rank dims... values...`, values in row-major
//! order printed with round-trip precision. The closing `end` line makes a
//! truncated file detectable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::policy::{Policy, PolicyConfig};
use crate::ppo::ValueNet;

pub const MAGIC: &str = "chronoskill-ckpt";
pub const VERSION: &str = "v1";

fn write_tensor(out: &mut String, name: &str, t: &Tensor) {
    write!(out, "{name} {}", t.shape().len()).unwrap();
    for d in t.shape() {
        write!(out, " {d}").unwrap();
    }
    for v in t.data() {
        write!(out, " {v:?}").unwrap();
    }
    out.push('\n');
}

pub fn encode(policy: &Policy, value: &ValueNet) -> String {
    let c = policy.config();
    let mut out = format!("{MAGIC} {VERSION}\n");
    let widths: Vec<String> = c.trunk_widths.iter().map(usize::to_string).collect();
    writeln!(out, "config variant {}", c.variant).unwrap();
    writeln!(out, "config obs_dim {}", c.obs_dim).unwrap();
    writeln!(out, "config action_dim {}", c.action_dim).unwrap();
    writeln!(out, "config heads {}", c.heads).unwrap();
    writeln!(out, "config horizon {}", c.horizon).unwrap();
    writeln!(out, "config trunk_widths {}", widths.join(" ")).unwrap();
    writeln!(out, "config seed {}", c.seed).unwrap();
    for (name, t) in policy.param_names().iter().zip(policy.params()) {
        write_tensor(&mut out, name, t);
    }
    for (i, t) in value.params().iter().enumerate() {
        let kind = if i % 2 == 0 { "weight" } else { "bias" };
        write_tensor(&mut out, &format!("value.layer.{}.{kind}", i / 2), t);
    }
    out.push_str("end\n");
    out
}

pub fn save_checkpoint(policy: &Policy, value: &ValueNet, path: &Path) -> Result<()> {
    std::fs::write(path, encode(policy, value)).map_err(|e| Error::io(path, e))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, record: &str, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::format(format!("record `{record}`"), format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::format(format!("record `{record}`"), format!("bad {what} `{tok}`")))
}

fn parse_tensor(line: &str) -> Result<(String, Tensor)> {
    let mut toks = line.split_ascii_whitespace();
    let name = toks.next().unwrap_or_default().to_string();
    let rank: usize = parse_num(toks.next(), &name, "rank")?;
    let shape = (0..rank)
        .map(|_| parse_num(toks.next(), &name, "dimension"))
        .collect::<Result<Vec<usize>>>()?;
    let data = toks
        .map(|t| parse_num(Some(t), &name, "value"))
        .collect::<Result<Vec<f64>>>()?;
    let tensor = Tensor::new(shape, data).map_err(|e| Error::format(format!("record `{name}`"), e.to_string()))?;
    Ok((name, tensor))
}

pub fn decode(text: &str) -> Result<(Policy, ValueNet)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut head = header.split_ascii_whitespace();
    if head.next() != Some(MAGIC) {
        return Err(Error::format(
            "header",
            format!("expected `{MAGIC} {VERSION}`, got `{header}`"),
        ));
    }
    match head.next() {
        Some(VERSION) => {}
        other => return Err(Error::UnsupportedVersion(other.unwrap_or_default().to_string())),
    }

    let mut cfg = PolicyConfig::new(crate::policy::Variant::Vanilla, 1, 1, 1, 1, 0);
    let mut seen = Vec::new();
    let mut tensors = Vec::new();
    let mut finished = false;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if finished {
            return Err(Error::format("trailer", "data after `end`"));
        }
        if line == "end" {
            finished = true;
            continue;
        }
        if let Some(rest) = line.strip_prefix("config ") {
            let mut toks = rest.split_ascii_whitespace();
            let key = toks.next().unwrap_or_default();
            let record = format!("config {key}");
            match key {
                "variant" => {
                    cfg.variant = toks
                        .next()
                        .unwrap_or_default()
                        .parse()
                        .map_err(|e: Error| Error::format(record, e.to_string()))?
                }
                "obs_dim" => cfg.obs_dim = parse_num(toks.next(), &record, "value")?,
                "action_dim" => cfg.action_dim = parse_num(toks.next(), &record, "value")?,
                "heads" => cfg.heads = parse_num(toks.next(), &record, "value")?,
                "horizon" => cfg.horizon = parse_num(toks.next(), &record, "value")?,
                "trunk_widths" => {
                    cfg.trunk_widths = toks
                        .map(|t| parse_num(Some(t), &record, "width"))
                        .collect::<Result<_>>()?
                }
                "seed" => cfg.seed = parse_num(toks.next(), &record, "value")?,
                other => return Err(Error::format(record, format!("unknown config key `{other}`"))),
            }
            seen.push(key.to_string());
            continue;
        }
        tensors.push(parse_tensor(line)?);
    }
    if !finished {
        return Err(Error::format("trailer", "missing `end` line (truncated checkpoint?)"));
    }
    for key in [
        "variant",
        "obs_dim",
        "action_dim",
        "heads",
        "horizon",
        "trunk_widths",
        "seed",
    ] {
        if !seen.iter().any(|k| k == key) {
            return Err(Error::format(format!("config {key}"), "missing"));
        }
    }
    cfg.validate().map_err(|e| Error::format("config", e.to_string()))?;

    let layout = cfg.param_layout();
    let mut iter = tensors.into_iter();
    let mut policy_params = Vec::with_capacity(layout.len());
    for (name, shape) in &layout {
        let (got, t) = iter
            .next()
            .ok_or_else(|| Error::format(format!("record `{name}`"), "missing"))?;
        if &got != name {
            return Err(Error::format(format!("record `{got}`"), format!("expected `{name}`")));
        }
        if t.shape() != shape.as_slice() {
            return Err(Error::format(
                format!("record `{name}`"),
                format!("shape {:?}, expected {shape:?}", t.shape()),
            ));
        }
        policy_params.push(t);
    }
    let mut value_params = Vec::new();
    for (i, (name, t)) in iter.enumerate() {
        let kind = if i % 2 == 0 { "weight" } else { "bias" };
        let expected = format!("value.layer.{}.{kind}", i / 2);
        if name != expected {
            return Err(Error::format(
                format!("record `{name}`"),
                format!("expected `{expected}`"),
            ));
        }
        value_params.push(t);
    }
    let value = ValueNet::from_params(cfg.obs_dim, cfg.horizon, cfg.variant, value_params)
        .map_err(|e| Error::format("value records", e.to_string()))?;
    let policy = Policy::from_params(cfg, policy_params).map_err(|e| Error::format("policy records", e.to_string()))?;
    Ok((policy, value))
}

pub fn load_checkpoint(path: &Path) -> Result<(Policy, ValueNet)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text).map_err(|e| match e {
        Error::Format { context, message } => Error::Format {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}
