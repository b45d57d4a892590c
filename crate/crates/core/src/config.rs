//! Plain-text scenario files.
//!
//! ```text
//! # comment
//! preset = table3-50-densityrow   # optional base, applied first
//! protocol = grb
//! seed = 7
//! topology = fig1.topo            # relative to this file
//! node 0 120.5 80
//! flow 0 5 3.0 60.0 [interval]
//! blocked 2 3
//! ```
//!
//! Flat `key = value` lines set scalars; `node`, `flow` and `blocked`
//! records may repeat. A topology file uses the same syntax but only
//! accepts `area_w`, `area_h`, `range` and `node`/`blocked` records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::engine::RadioModel;
use crate::error::{Error, Result};
use crate::geometry::{AreaBounds, NodeId, NodePair, Planarization, Position};
use crate::presets;
use crate::protocol::{ProtocolKind, ProtocolParams};
use crate::scenario::{FlowSpec, Placement, ScenarioConfig};
use crate::traffic::CbrFlow;

/// Packets in one preset run, split over its flows.
pub const PACKETS_TOTAL: u32 = 8780;
pub const DEFAULT_WARMUP: f64 = 10.0;

const KEYS: &[&str] = &[
    "preset",
    "scenario_id",
    "protocol",
    "planarization",
    "area_w",
    "area_h",
    "node_count",
    "topology",
    "placement",
    "duration",
    "seed",
    "range",
    "per_hop_latency",
    "loss_probability",
    "v_min",
    "v_max",
    "pause_time",
    "hello_interval",
    "hello_jitter",
    "seen_lifetime",
    "backtrack_threshold",
    "verification_timeout",
    "ttl",
    "flows",
    "packets_total",
    "warmup",
    "stop_when_idle",
    "output",
    "trace_output",
];

const REQUIRED: &[&str] = &["protocol", "area_w", "area_h", "node_count", "duration", "flows"];

/// Parsed but not yet interpreted file contents.
#[derive(Debug, Default)]
struct RawFile {
    keys: BTreeMap<String, (usize, String)>,
    nodes: Vec<(usize, NodeId, Position)>,
    flows: Vec<(usize, CbrFlow)>,
    blocked: Vec<(usize, NodePair)>,
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(path: &str, line: usize, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_error(path, line, format!("invalid {what} `{s}`")))
}

fn parse_raw(text: &str, path: &str, allowed: &[&str]) -> Result<RawFile> {
    let mut raw = RawFile::default();
    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some((k, v)) = content.split_once('=') {
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(parse_error(path, line, format!("unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(parse_error(path, line, format!("key `{k}` has no value")));
            }
            if raw.keys.insert(k.to_owned(), (line, v.to_owned())).is_some() {
                return Err(parse_error(path, line, format!("key `{k}` given twice")));
            }
            continue;
        }
        let parts: Vec<&str> = content.split_whitespace().collect();
        match parts[0] {
            "node" if parts.len() == 4 => {
                let id = NodeId(field(path, line, "node id", parts[1])?);
                let x = field(path, line, "x coordinate", parts[2])?;
                let y = field(path, line, "y coordinate", parts[3])?;
                raw.nodes.push((line, id, Position::new(x, y)));
            }
            "blocked" if parts.len() == 3 => {
                let a = NodeId(field(path, line, "node id", parts[1])?);
                let b = NodeId(field(path, line, "node id", parts[2])?);
                if a == b {
                    return Err(parse_error(path, line, "a node cannot be blocked from itself"));
                }
                raw.blocked.push((line, NodePair::new(a, b)));
            }
            "flow" if allowed.contains(&"flows") && (parts.len() == 5 || parts.len() == 6) => {
                let src = NodeId(field(path, line, "node id", parts[1])?);
                let dst = NodeId(field(path, line, "node id", parts[2])?);
                let start = field(path, line, "start time", parts[3])?;
                let end = field(path, line, "end time", parts[4])?;
                let mut flow = CbrFlow::new(raw.flows.len() as u32, src, dst, start, end);
                if let Some(iv) = parts.get(5) {
                    flow.interval = field(path, line, "interval", iv)?;
                }
                raw.flows.push((line, flow));
            }
            "node" | "blocked" | "flow" => {
                return Err(parse_error(path, line, format!("malformed `{}` record", parts[0])));
            }
            other => {
                return Err(parse_error(
                    path,
                    line,
                    format!("unrecognized line starting with `{other}`"),
                ))
            }
        }
    }
    Ok(raw)
}

/// Node coordinates and blocked pairs loaded from a topology file.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyFile {
    pub area: Option<AreaBounds>,
    pub range: Option<f64>,
    pub nodes: BTreeMap<NodeId, Position>,
    pub blocked: BTreeSet<NodePair>,
}

pub fn parse_topology(text: &str, path: &str) -> Result<TopologyFile> {
    let raw = parse_raw(text, path, &["area_w", "area_h", "range"])?;
    let get =
        |k: &str| -> Result<Option<f64>> { raw.keys.get(k).map(|(line, v)| field(path, *line, k, v)).transpose() };
    let area = match (get("area_w")?, get("area_h")?) {
        (Some(w), Some(h)) => Some(AreaBounds::new(w, h)?),
        (None, None) => None,
        _ => return Err(parse_error(path, 0, "area_w and area_h must be given together")),
    };
    let mut nodes = BTreeMap::new();
    for (line, id, p) in &raw.nodes {
        if nodes.insert(*id, *p).is_some() {
            return Err(parse_error(path, *line, format!("node {id} listed twice")));
        }
    }
    Ok(TopologyFile {
        area,
        range: get("range")?,
        nodes,
        blocked: raw.blocked.into_iter().map(|(_, p)| p).collect(),
    })
}

pub fn load_topology(path: &Path) -> Result<TopologyFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topology(&text, &path.display().to_string())
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, &path.display().to_string(), base)
}

/// Interpret a scenario file. Relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, path: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let raw = parse_raw(text, path, KEYS)?;
    let k = &raw.keys;
    let num = |key: &str| -> Result<Option<f64>> {
        k.get(key)
            .map(|(line, v)| field::<f64>(path, *line, key, v))
            .transpose()
    };
    let int = |key: &str| -> Result<Option<u64>> {
        k.get(key)
            .map(|(line, v)| field::<u64>(path, *line, key, v))
            .transpose()
    };
    let at = |key: &str| k.get(key).map_or(0, |(line, _)| *line);
    let wrap = |key: &str, e: Error| match e {
        Error::Param { .. } | Error::Topology(_) | Error::UnknownNode(_) => parse_error(path, at(key), e.to_string()),
        other => other,
    };

    let preset = match k.get("preset") {
        Some((line, name)) => Some(presets::preset(name).map_err(|e| parse_error(path, *line, e.to_string()))?),
        None => None,
    };

    let topology = match k.get("topology").or(k.get("placement")) {
        Some((_, v)) if v == "uniform" => None,
        Some((_, v)) => {
            let p = base_dir.join(v);
            Some(load_topology(&p)?)
        }
        None => None,
    };

    let mut nodes = topology.as_ref().map(|t| t.nodes.clone()).unwrap_or_default();
    for (line, id, p) in &raw.nodes {
        if nodes.insert(*id, *p).is_some() {
            return Err(parse_error(path, *line, format!("node {id} listed twice")));
        }
    }
    let mut blocked = topology.as_ref().map(|t| t.blocked.clone()).unwrap_or_default();
    blocked.extend(raw.blocked.iter().map(|(_, p)| *p));

    let mut missing = Vec::new();
    let has = |key: &str| k.contains_key(key) || preset.is_some();
    for &req in REQUIRED {
        let covered = match req {
            "node_count" => has(req) || !nodes.is_empty(),
            "area_w" | "area_h" => has(req) || topology.as_ref().is_some_and(|t| t.area.is_some()),
            "flows" => has(req) || !raw.flows.is_empty(),
            _ => has(req),
        };
        if !covered {
            missing.push(req.to_owned());
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingKeys(missing));
    }

    let mut cfg = preset.unwrap_or_else(|| ScenarioConfig {
        scenario_id: "scenario".into(),
        protocol: ProtocolKind::Grb,
        planarization: Planarization::Gabriel,
        area: AreaBounds::new(1.0, 1.0).expect("unit area"),
        node_count: 0,
        placement: Placement::Uniform,
        v_min: 0.0,
        v_max: 20.0,
        pause_time: 0.0,
        radio: RadioModel::default(),
        params: ProtocolParams::default(),
        ttl: None,
        flows: FlowSpec::Explicit(Vec::new()),
        duration: 0.0,
        seed: 1,
        stop_when_idle: false,
        output: None,
        trace_output: None,
    });

    if let Some((_, v)) = k.get("scenario_id") {
        cfg.scenario_id = v.clone();
    } else if let Some(name) = Path::new(path).file_stem().filter(|_| !k.contains_key("preset")) {
        cfg.scenario_id = name.to_string_lossy().into_owned();
    }
    if let Some((line, v)) = k.get("protocol") {
        cfg.protocol = v.parse().map_err(|e: Error| parse_error(path, *line, e.to_string()))?;
    }
    if let Some((line, v)) = k.get("planarization") {
        cfg.planarization = v.parse().map_err(|e: Error| parse_error(path, *line, e.to_string()))?;
    }

    if let Some(t) = &topology {
        if let Some(a) = t.area {
            cfg.area = a;
        }
        if let Some(r) = t.range {
            cfg.radio.range = r;
        }
    }
    let (w, h) = (num("area_w")?, num("area_h")?);
    if w.is_some() || h.is_some() {
        cfg.area = AreaBounds::new(w.unwrap_or(cfg.area.width), h.unwrap_or(cfg.area.height))
            .map_err(|e| wrap("area_w", e))?;
    }
    if !nodes.is_empty() {
        cfg.node_count = nodes.len();
        cfg.placement = Placement::Explicit(nodes);
    }
    if let Some(n) = int("node_count")? {
        cfg.node_count = n as usize;
    }
    cfg.radio.blocked.extend(blocked);

    if let Some(v) = num("duration")? {
        cfg.duration = v;
    }
    if let Some(v) = int("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = num("range")? {
        cfg.radio.range = v;
    }
    if let Some(v) = num("per_hop_latency")? {
        cfg.radio.per_hop_latency = v;
    }
    if let Some(v) = num("loss_probability")? {
        cfg.radio.loss_probability = v;
    }
    if let Some(v) = num("v_min")? {
        cfg.v_min = v;
    }
    if let Some(v) = num("v_max")? {
        cfg.v_max = v;
    }
    if let Some(v) = num("pause_time")? {
        cfg.pause_time = v;
    }
    if let Some(v) = num("hello_interval")? {
        cfg.params.hello_interval = v;
    }
    if let Some(v) = num("hello_jitter")? {
        cfg.params.hello_jitter = v;
    }
    if let Some((line, v)) = k.get("seen_lifetime") {
        cfg.params.seen_lifetime = parse_unbounded(path, *line, "seen_lifetime", v)?;
    }
    if let Some((line, v)) = k.get("backtrack_threshold") {
        cfg.params.backtrack_threshold = if is_infinite(v) {
            u32::MAX
        } else {
            field(path, *line, "backtrack_threshold", v)?
        };
    }
    cfg.params.verification_timeout = match num("verification_timeout")? {
        Some(v) => v,
        None => 4.0 * cfg.radio.per_hop_latency,
    };
    if let Some(v) = int("ttl")? {
        cfg.ttl = Some(v as u32);
    }

    if !raw.flows.is_empty() {
        if k.contains_key("flows") {
            return Err(parse_error(
                path,
                at("flows"),
                "give either `flows = N` or flow records, not both",
            ));
        }
        cfg.flows = FlowSpec::Explicit(raw.flows.iter().map(|(_, f)| *f).collect());
    } else {
        let (mut count, mut packets_total, mut warmup) = match &cfg.flows {
            FlowSpec::Random {
                count,
                packets_total,
                warmup,
            } => (*count, *packets_total, *warmup),
            FlowSpec::Explicit(_) => (0, PACKETS_TOTAL, DEFAULT_WARMUP),
        };
        if let Some(v) = int("flows")? {
            count = v as usize;
        }
        if let Some(v) = int("packets_total")? {
            packets_total = v as u32;
        }
        if let Some(v) = num("warmup")? {
            warmup = v;
        }
        cfg.flows = FlowSpec::Random {
            count,
            packets_total,
            warmup,
        };
    }

    if let Some((line, v)) = k.get("stop_when_idle") {
        cfg.stop_when_idle = field(path, *line, "stop_when_idle", v)?;
    }
    if let Some((_, v)) = k.get("output") {
        cfg.output = Some(base_dir.join(v));
    }
    if let Some((_, v)) = k.get("trace_output") {
        cfg.trace_output = Some(base_dir.join(v));
    }

    cfg.validate().map_err(|e| {
        let key = match &e {
            Error::Param { name, .. } => name,
            _ => "node_count",
        };
        wrap(key, e)
    })?;
    Ok(cfg)
}

fn is_infinite(v: &str) -> bool {
    matches!(v.to_ascii_lowercase().as_str(), "inf" | "infinity" | "unlimited")
}

fn parse_unbounded(path: &str, line: usize, key: &str, v: &str) -> Result<f64> {
    if is_infinite(v) {
        Ok(f64::INFINITY)
    } else {
        field(path, line, key, v)
    }
}

/// Render a config back to text that `parse_config` accepts.
pub fn render_config(cfg: &ScenarioConfig, topology: Option<&Path>) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    kv("scenario_id", cfg.scenario_id.clone());
    kv("protocol", cfg.protocol.to_string());
    kv("planarization", cfg.planarization.to_string());
    kv("area_w", cfg.area.width.to_string());
    kv("area_h", cfg.area.height.to_string());
    kv("node_count", cfg.node_count.to_string());
    if let Some(t) = topology {
        kv("topology", t.display().to_string());
    }
    kv("duration", cfg.duration.to_string());
    kv("seed", cfg.seed.to_string());
    kv("range", cfg.radio.range.to_string());
    kv("per_hop_latency", cfg.radio.per_hop_latency.to_string());
    kv("loss_probability", cfg.radio.loss_probability.to_string());
    kv("v_min", cfg.v_min.to_string());
    kv("v_max", cfg.v_max.to_string());
    kv("pause_time", cfg.pause_time.to_string());
    kv("hello_interval", cfg.params.hello_interval.to_string());
    kv("hello_jitter", cfg.params.hello_jitter.to_string());
    let lifetime = cfg.params.seen_lifetime;
    kv(
        "seen_lifetime",
        if lifetime.is_infinite() {
            "inf".into()
        } else {
            lifetime.to_string()
        },
    );
    let threshold = cfg.params.backtrack_threshold;
    kv(
        "backtrack_threshold",
        if threshold == u32::MAX {
            "inf".into()
        } else {
            threshold.to_string()
        },
    );
    kv("verification_timeout", cfg.params.verification_timeout.to_string());
    if let Some(t) = cfg.ttl {
        kv("ttl", t.to_string());
    }
    kv("stop_when_idle", cfg.stop_when_idle.to_string());
    match &cfg.flows {
        FlowSpec::Random {
            count,
            packets_total,
            warmup,
        } => {
            kv("flows", count.to_string());
            kv("packets_total", packets_total.to_string());
            kv("warmup", warmup.to_string());
        }
        FlowSpec::Explicit(flows) => {
            for f in flows {
                s.push_str(&format!(
                    "flow {} {} {} {} {}\n",
                    f.src.0, f.dst.0, f.start, f.end, f.interval
                ));
            }
        }
    }
    if topology.is_none() {
        if let Placement::Explicit(nodes) = &cfg.placement {
            for (id, p) in nodes {
                s.push_str(&format!("node {} {} {}\n", id.0, p.x, p.y));
            }
        }
        for pair in &cfg.radio.blocked {
            s.push_str(&format!("blocked {} {}\n", pair.first().0, pair.second().0));
        }
    }
    s
}

pub fn render_topology(
    area: AreaBounds,
    range: f64,
    nodes: &BTreeMap<NodeId, Position>,
    blocked: &BTreeSet<NodePair>,
) -> String {
    let mut s = format!("area_w = {}\narea_h = {}\nrange = {}\n", area.width, area.height, range);
    for (id, p) in nodes {
        s.push_str(&format!("node {} {} {}\n", id.0, p.x, p.y));
    }
    for pair in blocked {
        s.push_str(&format!("blocked {} {}\n", pair.first().0, pair.second().0));
    }
    s
}
