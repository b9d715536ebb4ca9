//! Plain-text model files.
//!
//! ```text
//! nocturne-model 1
//! arch network|transfer|forest
//! <key> <value>            header lines, values are JSON
//! param <name> frozen=<0|1> l2=<0|1> shape=<d0>x<d1>...
//! <row-major values separated by spaces>
//! ```
//!
//! Forests store their trees as one JSON line after `trees`.

use std::fmt::Write as _;

use super::forest::Forest;
use super::network::{NetConfig, Network};
use super::params::{Param, ParamSet};
use super::transfer::{TransferNet, TransferPlan};
use super::{ModelError, TrainedModel};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "nocturne-model";

fn json<S: serde::Serialize>(v: &S) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn write_params<T: Real>(out: &mut String, ps: &ParamSet<T>) {
    for p in &ps.params {
        let shape: Vec<String> = p.shape.iter().map(|d| d.to_string()).collect();
        writeln!(
            out,
            "param {} frozen={} l2={} shape={}",
            p.name,
            u8::from(p.frozen),
            u8::from(p.l2),
            shape.join("x")
        )
        .unwrap();
        let values: Vec<String> = p.data.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
}

pub fn save<T: Real>(model: &TrainedModel<T>) -> String {
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\n");
    match model {
        TrainedModel::Forest(f) => {
            out.push_str("arch forest\n");
            writeln!(out, "trees {}", json(f)).unwrap();
        }
        TrainedModel::Net(n) => {
            out.push_str("arch network\n");
            writeln!(out, "config {}", json(&n.cfg)).unwrap();
            writeln!(out, "inputs {}", json(&[n.n_temporal, n.n_static])).unwrap();
            write_params(&mut out, &n.params);
        }
        TrainedModel::Transfer(t) => {
            out.push_str("arch transfer\n");
            writeln!(out, "plan {}", json(&t.plan)).unwrap();
            writeln!(out, "hidden {}", json(&t.backbone_hidden())).unwrap();
            writeln!(out, "temporal_names {}", json(&t.temporal_names())).unwrap();
            write_params(&mut out, &t.params);
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Parse(msg.into())
}

fn parse_flag(tok: Option<&str>, key: &str) -> Result<bool, ModelError> {
    match tok.and_then(|t| t.strip_prefix(key)) {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        _ => Err(bad(format!("expected {key}<0|1>"))),
    }
}

fn parse_params<T: Real>(
    lines: &mut std::iter::Peekable<std::str::Lines<'_>>,
) -> Result<ParamSet<T>, ModelError> {
    let mut ps = ParamSet::default();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        if tok.next() != Some("param") {
            return Err(bad(format!("expected `param`, got `{line}`")));
        }
        let name = tok
            .next()
            .ok_or_else(|| bad("param without name"))?
            .to_string();
        let frozen = parse_flag(tok.next(), "frozen=")?;
        let l2 = parse_flag(tok.next(), "l2=")?;
        let shape_tok = tok
            .next()
            .and_then(|t| t.strip_prefix("shape="))
            .ok_or_else(|| bad("missing shape"))?;
        let shape: Vec<usize> = shape_tok
            .split('x')
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| bad(format!("bad dimension `{d}`")))
            })
            .collect::<Result<_, _>>()?;
        let values_line = lines.next().unwrap_or("");
        let data: Vec<T> = values_line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| bad(format!("bad value `{v}` in {name}")))
            })
            .collect::<Result<_, _>>()?;
        if data.len() != shape.iter().product::<usize>() {
            return Err(bad(format!(
                "{name}: {} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        ps.params.push(Param {
            name,
            shape,
            data,
            frozen,
            l2,
        });
    }
    Ok(ps)
}

fn header<'a>(
    lines: &mut std::iter::Peekable<std::str::Lines<'a>>,
    key: &str,
) -> Result<&'a str, ModelError> {
    let line = lines
        .next()
        .ok_or_else(|| bad(format!("missing `{key}` line")))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| bad(format!("expected `{key}`, got `{line}`")))
}

fn from_json<D: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<D, ModelError> {
    serde_json::from_str(s).map_err(|e| bad(format!("{what}: {e}")))
}

pub fn load<T: Real>(text: &str) -> Result<TrainedModel<T>, ModelError> {
    let mut lines = text.lines().peekable();
    let first = lines.next().ok_or_else(|| bad("empty model file"))?;
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| bad("not a model file"))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(bad(format!("unsupported model format version {version}")));
    }
    match header(&mut lines, "arch")? {
        "forest" => Ok(TrainedModel::Forest(from_json::<Forest>(
            header(&mut lines, "trees")?,
            "trees",
        )?)),
        "network" => {
            let cfg: NetConfig = from_json(header(&mut lines, "config")?, "config")?;
            let [nt, ns]: [usize; 2] = from_json(header(&mut lines, "inputs")?, "inputs")?;
            let ps = parse_params(&mut lines)?;
            Ok(TrainedModel::Net(Network::from_params(cfg, nt, ns, ps)?))
        }
        "transfer" => {
            let plan: TransferPlan = from_json(header(&mut lines, "plan")?, "plan")?;
            let hidden: usize = from_json(header(&mut lines, "hidden")?, "hidden")?;
            let names: Vec<String> =
                from_json(header(&mut lines, "temporal_names")?, "temporal_names")?;
            let ps = parse_params(&mut lines)?;
            Ok(TrainedModel::Transfer(TransferNet::from_params(
                &plan, hidden, &names, ps,
            )?))
        }
        other => Err(bad(format!("unknown architecture `{other}`"))),
    }
}
