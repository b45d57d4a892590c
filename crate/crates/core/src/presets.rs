//! Named scenarios matching the published topologies, and the batch
//! runner for experiment matrices.
//!
//! Single presets (usable as `preset = ...` in a config file):
//!
//! | name                      | nodes | area        |
//! |---------------------------|-------|-------------|
//! | `table3-50-densityrow`    | 50    | 1500 x 300  |
//! | `table3-112-diameterrow`  | 112   | 2250 x 450  |
//! | `table3-200-diameterrow`  | 200   | 3000 x 600  |
//! | `table3-density-<n>`      | n     | 1500 x 1500 |
//!
//! All use 30 CBR flows carrying 8780 packets in total over 900 s, speeds
//! uniform in [0, 20] m/s and pause 0 s unless overridden.

use rayon::prelude::*;

use crate::config::{DEFAULT_WARMUP, PACKETS_TOTAL};
use crate::engine::RadioModel;
use crate::error::{Error, Result};
use crate::geometry::{AreaBounds, Planarization};
use crate::protocol::{ProtocolKind, ProtocolParams};
use crate::scenario::{run_scenario, CsvRow, FlowSpec, Placement, ScenarioConfig};

pub const DENSITY_NODES: [usize; 10] = [50, 75, 100, 125, 150, 175, 200, 225, 250, 300];
pub const PAUSE_TIMES: [f64; 8] = [0.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 120.0];
pub const DURATION: f64 = 900.0;
pub const FLOWS: usize = 30;

fn base(id: String, nodes: usize, w: f64, h: f64) -> ScenarioConfig {
    ScenarioConfig {
        scenario_id: id,
        protocol: ProtocolKind::Grb,
        planarization: Planarization::Gabriel,
        area: AreaBounds::new(w, h).expect("preset area"),
        node_count: nodes,
        placement: Placement::Uniform,
        v_min: 0.0,
        v_max: 20.0,
        pause_time: 0.0,
        radio: RadioModel::default(),
        params: ProtocolParams::default(),
        ttl: None,
        flows: FlowSpec::Random {
            count: FLOWS,
            packets_total: PACKETS_TOTAL,
            warmup: DEFAULT_WARMUP,
        },
        duration: DURATION,
        seed: 1,
        stop_when_idle: false,
        output: None,
        trace_output: None,
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let cfg = match name {
        "table3-50-densityrow" => base(name.into(), 50, 1500.0, 300.0),
        "table3-112-diameterrow" => base(name.into(), 112, 2250.0, 450.0),
        "table3-200-diameterrow" => base(name.into(), 200, 3000.0, 600.0),
        _ => {
            let n = name
                .strip_prefix("table3-density-")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| DENSITY_NODES.contains(n))
                .ok_or_else(|| Error::UnknownPreset(name.into()))?;
            base(name.into(), n, 1500.0, 1500.0)
        }
    };
    Ok(cfg)
}

pub const MATRICES: [&str; 6] = [
    "density",
    "diameter",
    "pause",
    "table4",
    "table4-scaled",
    "density-scaled",
];

/// Cells of a named experiment matrix.
///
/// * `density`: every density row at pause 0.
/// * `diameter`: the two larger-diameter rows.
/// * `pause`: the 50-node row over every pause time.
/// * `table4`: 50/112/200-node rows at pause 0 and 60, GRB and GPSR-lite.
/// * `table4-scaled`: the 50-node row at pause 60, GRB only.
/// * `density-scaled`: 50, 100, 150 and 200 nodes on 1500 x 1500.
pub fn matrix_cells(name: &str) -> Result<Vec<ScenarioConfig>> {
    let named = |id: &str, nodes: usize, w: f64, h: f64| base(id.into(), nodes, w, h);
    let cells = match name {
        "density" => DENSITY_NODES
            .iter()
            .map(|&n| named(&format!("density-{n}"), n, 1500.0, 1500.0))
            .collect(),
        "density-scaled" => [50, 100, 150, 200]
            .iter()
            .map(|&n| named(&format!("density-{n}"), n, 1500.0, 1500.0))
            .collect(),
        "diameter" => vec![
            named("diameter-112", 112, 2250.0, 450.0),
            named("diameter-200", 200, 3000.0, 600.0),
        ],
        "pause" => PAUSE_TIMES
            .iter()
            .map(|&pt| ScenarioConfig {
                pause_time: pt,
                ..named(&format!("pause-{pt}"), 50, 1500.0, 300.0)
            })
            .collect(),
        "table4" => {
            let mut cells = Vec::new();
            for (n, w, h) in [(50, 1500.0, 300.0), (112, 2250.0, 450.0), (200, 3000.0, 600.0)] {
                for pt in [0.0, 60.0] {
                    for protocol in [ProtocolKind::Grb, ProtocolKind::GpsrLite] {
                        cells.push(ScenarioConfig {
                            pause_time: pt,
                            protocol,
                            ..named(&format!("table4-{n}-pt{pt}"), n, w, h)
                        });
                    }
                }
            }
            cells
        }
        "table4-scaled" => vec![ScenarioConfig {
            pause_time: 60.0,
            ..named("table4-50-pt60", 50, 1500.0, 300.0)
        }],
        _ => {
            // A single preset is a one-cell matrix.
            vec![preset(name)?]
        }
    };
    Ok(cells)
}

/// Per-seed rows plus `mean` and `std` rows for every cell.
#[derive(Debug, Clone)]
pub struct MatrixResult {
    pub runs: Vec<CsvRow>,
    pub aggregates: Vec<CsvRow>,
}

impl MatrixResult {
    pub fn all_rows(&self) -> Vec<CsvRow> {
        self.runs.iter().chain(&self.aggregates).cloned().collect()
    }
}

pub fn run_matrix(name: &str, seeds: &[u64]) -> Result<MatrixResult> {
    run_cells(&matrix_cells(name)?, seeds)
}

/// Run every cell x seed in parallel. Row order is cell-major, then seed
/// order, independent of scheduling.
pub fn run_cells(cells: &[ScenarioConfig], seeds: &[u64]) -> Result<MatrixResult> {
    if seeds.is_empty() {
        return Err(Error::param("seeds", "at least one seed is required"));
    }
    let jobs: Vec<ScenarioConfig> = cells
        .iter()
        .flat_map(|c| seeds.iter().map(move |&seed| ScenarioConfig { seed, ..c.clone() }))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|cfg| run_scenario(cfg).map(|m| CsvRow::from_run(cfg, &m)))
        .collect::<Result<Vec<_>>>()?;
    let aggregates = runs
        .chunks(seeds.len())
        .flat_map(|rows| {
            let (mean, std) = aggregate(rows);
            [mean, std]
        })
        .collect();
    Ok(MatrixResult { runs, aggregates })
}

/// Column-wise mean and sample standard deviation; blank cells are skipped.
fn aggregate(rows: &[CsvRow]) -> (CsvRow, CsvRow) {
    let mut mean = rows[0].clone();
    let mut std = rows[0].clone();
    mean.seed = "mean".into();
    std.seed = "std".into();
    for i in 0..mean.values.len() {
        let xs: Vec<f64> = rows.iter().map(|r| r.values[i]).filter(|v| !v.is_nan()).collect();
        let (m, s) = mean_std(&xs);
        mean.values[i] = m;
        std.values[i] = s;
    }
    (mean, std)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (m, s)
}
