//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use grb_sim::analysis::planarization_report;
use grb_sim::config::load_config;
use grb_sim::engine::RadioModel;
use grb_sim::geometry::{
    distance, gabriel_edges, rng_edges, AreaBounds, NodeId, Planarization, Position, TopologySnapshot,
};
use grb_sim::goldens::emit_pathological_topologies;
use grb_sim::presets::{matrix_cells, mean_std};
use grb_sim::protocol::{DropReason, ProtocolKind, ProtocolParams};
use grb_sim::scenario::{run_scenario, write_csv, CsvRow, FlowSpec, Placement, ScenarioConfig};
use grb_sim::traffic::{CbrFlow, Outcome, RunMetrics};

const RANGE: f64 = 250.0;

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, pass, detail }
}

// ---------------------------------------------------------------------------
// Static corpus (criteria 1-3)

struct Instance {
    positions: Vec<Position>,
    src: usize,
    dst: usize,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(25..=60);
    let positions = (0..n)
        .map(|_| Position::new(rng.gen_range(0.0..1500.0), rng.gen_range(0.0..300.0)))
        .collect();
    let src = rng.gen_range(0..n);
    let mut dst = rng.gen_range(0..n - 1);
    if dst >= src {
        dst += 1;
    }
    Instance { positions, src, dst }
}

fn adjacency(pos: &[Position]) -> Vec<Vec<usize>> {
    let n = pos.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (pos[i].x - pos[j].x, pos[i].y - pos[j].y);
            if (dx * dx + dy * dy).sqrt() <= RANGE {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

fn bfs_reaches(adj: &[Vec<usize>], src: usize, dst: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([src]);
    seen[src] = true;
    while let Some(u) = queue.pop_front() {
        if u == dst {
            return true;
        }
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

const CORPUS_PACKETS: u32 = 20;
// Long enough that each packet finishes its search before the next starts.
const CORPUS_INTERVAL: f64 = 10.0;
const CORPUS_START: f64 = 3.0;

fn corpus_config(inst: &Instance, seed: u64) -> ScenarioConfig {
    let end = CORPUS_START + f64::from(CORPUS_PACKETS) * CORPUS_INTERVAL;
    let placement: BTreeMap<NodeId, Position> = inst
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| (NodeId(i as u32), *p))
        .collect();
    let mut flow = CbrFlow::new(0, NodeId(inst.src as u32), NodeId(inst.dst as u32), CORPUS_START, end);
    flow.interval = CORPUS_INTERVAL;
    ScenarioConfig {
        scenario_id: format!("static-{seed}"),
        protocol: ProtocolKind::Grb,
        planarization: Planarization::Gabriel,
        area: AreaBounds::new(1500.0, 300.0).unwrap(),
        node_count: inst.positions.len(),
        placement: Placement::Explicit(placement),
        v_min: 0.0,
        v_max: 0.0,
        pause_time: 0.0,
        radio: RadioModel::default(),
        params: ProtocolParams {
            seen_lifetime: f64::INFINITY,
            backtrack_threshold: u32::MAX,
            ..Default::default()
        },
        ttl: None,
        flows: FlowSpec::Explicit(vec![flow]),
        duration: end + 10.0,
        seed,
        stop_when_idle: true,
        output: None,
        trace_output: None,
    }
}

struct CorpusResult {
    connected: bool,
    edges: usize,
    metrics: RunMetrics,
}

fn corpus() -> (Vec<CorpusResult>, f64) {
    let t0 = Instant::now();
    let results = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let inst = instance(seed);
            let adj = adjacency(&inst.positions);
            let edges = adj.iter().map(Vec::len).sum::<usize>() / 2;
            let metrics = run_scenario(&corpus_config(&inst, seed)).expect("static run");
            CorpusResult {
                connected: bfs_reaches(&adj, inst.src, inst.dst),
                edges,
                metrics,
            }
        })
        .collect();
    (results, t0.elapsed().as_secs_f64())
}

fn first_packet(m: &RunMetrics) -> &grb_sim::traffic::PacketRecord {
    m.flow_packets(0).find(|r| r.id.seq == 0).expect("first packet")
}

fn criterion_1(corpus: &[CorpusResult], secs: f64) -> Verdict {
    let agree = corpus
        .iter()
        .filter(|c| matches!(first_packet(&c.metrics).outcome, Outcome::Delivered { .. }) == c.connected)
        .count();
    let connected = corpus.iter().filter(|c| c.connected).count();
    verdict(
        "1 DFS equivalence",
        agree == corpus.len() && secs < 30.0,
        format!(
            "{agree}/{} agree with BFS ({connected} connected), {secs:.1}s",
            corpus.len()
        ),
    )
}

fn criterion_2(corpus: &[CorpusResult]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut ok = 0;
    for c in corpus {
        let tx = first_packet(&c.metrics).transmissions().expect("first packet finished");
        if tx as usize <= 2 * c.edges {
            ok += 1;
        }
        if c.edges > 0 {
            worst = worst.max(f64::from(tx) / (2 * c.edges) as f64);
        }
    }
    verdict(
        "2 transmission bound",
        ok == corpus.len(),
        format!("{ok}/{} within 2|E|, worst ratio {worst:.3}", corpus.len()),
    )
}

fn criterion_3(corpus: &[CorpusResult]) -> Verdict {
    let mut ok = 0;
    for c in corpus {
        let packets: Vec<_> = c.metrics.flow_packets(0).collect();
        let stable = if packets.len() != CORPUS_PACKETS as usize {
            false
        } else if let Outcome::Delivered { final_path, .. } = &packets[0].outcome {
            packets[1..].iter().all(|r| match &r.outcome {
                Outcome::Delivered { path, hops, .. } => path == final_path && *hops as usize == final_path.len() - 1,
                _ => false,
            })
        } else {
            // No route exists: no later packet may find one either.
            packets.iter().all(|r| r.hops().is_none())
        };
        if stable {
            ok += 1;
        }
    }
    verdict(
        "3 route stability",
        ok == corpus.len(),
        format!("{ok}/{} instances stable over {CORPUS_PACKETS} packets", corpus.len()),
    )
}

// ---------------------------------------------------------------------------
// Golden contrasts (criterion 4)

fn criterion_4() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    emit_pathological_topologies(dir.path()).expect("emit goldens");
    let run = |name: &str, protocol: ProtocolKind| {
        let mut cfg = load_config(&dir.path().join(format!("{name}.conf"))).expect("load golden");
        cfg.protocol = protocol;
        run_scenario(&cfg).expect("golden run")
    };
    let mut notes = Vec::new();
    let mut pass = true;

    let greedy = run("fig1", ProtocolKind::Greedy);
    let grb = run("fig1", ProtocolKind::Grb);
    let a = greedy.delivered() == 0 && greedy.drops(DropReason::GreedyVoid) == greedy.sent() && grb.pdr() == 1.0;
    notes.push(format!(
        "a: greedy {} void drops, grb pdr {}",
        greedy.drops(DropReason::GreedyVoid),
        grb.pdr()
    ));
    pass &= a;

    for name in ["fig2", "fig3", "fig4"] {
        let gpsr = run(name, ProtocolKind::GpsrLite);
        let grb = run(name, ProtocolKind::Grb);
        let cut = gpsr.drops(DropReason::PerimeterLoop) + gpsr.drops(DropReason::TtlExpired);
        let ok = gpsr.delivered() < gpsr.sent() && cut == gpsr.sent() - gpsr.delivered() && grb.pdr() == 1.0;
        notes.push(format!("b/{name}: gpsr pdr {}, grb pdr {}", gpsr.pdr(), grb.pdr()));
        pass &= ok;
    }

    let fig2 = run("fig2", ProtocolKind::Grb);
    let hops: Vec<u32> = fig2.flow_packets(0).filter_map(|r| r.hops()).collect();
    let c = hops.len() > 1 && hops[1..].iter().all(|&h| h < hops[0]);
    notes.push(format!(
        "c: fig2 hops first {} later at most {}",
        hops[0],
        hops[1..].iter().max().unwrap_or(&0)
    ));
    pass &= c;

    verdict("4 golden contrasts", pass, notes.join("; "))
}

// ---------------------------------------------------------------------------
// Mobile runs (criteria 5, 7, 9)

struct MobileRun {
    config: ScenarioConfig,
    metrics: RunMetrics,
    row: Vec<u8>,
}

fn csv_bytes(cfg: &ScenarioConfig, m: &RunMetrics) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &[CsvRow::from_run(cfg, m)]).expect("csv");
    buf
}

fn mobile_runs() -> (Vec<MobileRun>, f64) {
    let t0 = Instant::now();
    let cells = matrix_cells("table4-scaled").expect("table4-scaled");
    let jobs: Vec<ScenarioConfig> = cells
        .iter()
        .flat_map(|c| (1..=10).map(move |seed| ScenarioConfig { seed, ..c.clone() }))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|config| {
            let metrics = run_scenario(&config).expect("mobile run");
            let row = csv_bytes(&config, &metrics);
            MobileRun { config, metrics, row }
        })
        .collect();
    (runs, t0.elapsed().as_secs_f64())
}

fn criterion_5(runs: &[MobileRun], secs: f64) -> Verdict {
    let pdrs: Vec<f64> = runs.iter().map(|r| r.metrics.pdr()).collect();
    let (mean, std) = mean_std(&pdrs);
    let shape = runs.iter().all(|r| {
        let c = &r.config;
        c.node_count == 50
            && c.area.width == 1500.0
            && c.area.height == 300.0
            && c.pause_time == 60.0
            && c.radio.loss_probability == 0.0
            && c.protocol == ProtocolKind::Grb
    });
    verdict(
        "5 scaled table 4 PDR",
        shape && runs.len() == 10 && mean >= 0.95 && secs < 300.0,
        format!(
            "mean pdr {mean:.6} (std {std:.6}) over {} seeds, need >= 0.95, {secs:.1}s",
            runs.len()
        ),
    )
}

fn criterion_7(runs: &[MobileRun]) -> Verdict {
    let control: u64 = runs.iter().map(|r| r.metrics.control.non_hello()).sum();
    let delivered: u64 = runs.iter().map(|r| r.metrics.delivered()).sum();
    let delivered_hops: f64 = runs
        .iter()
        .flat_map(|r| r.metrics.packets.iter().filter_map(|p| p.hops()))
        .map(f64::from)
        .sum();
    let per_packet = control as f64 / delivered as f64;
    let per_hop = control as f64 / delivered_hops;
    let conserved = runs.iter().filter(|r| r.metrics.conservation_holds()).count();
    verdict(
        "7 control overhead and conservation",
        per_packet <= 2.5 && conserved == runs.len(),
        format!(
            "{per_packet:.3} non-HELLO control per delivered packet (need <= 2.5; {per_hop:.3} per delivered hop), \
             conservation {conserved}/{}",
            runs.len()
        ),
    )
}

fn criterion_9(runs: &[MobileRun]) -> Verdict {
    let identical = runs
        .par_iter()
        .filter(|r| {
            let again = run_scenario(&r.config).expect("rerun");
            csv_bytes(&r.config, &again) == r.row
        })
        .count();
    verdict(
        "9 determinism",
        identical == runs.len(),
        format!("{identical}/{} reruns byte-identical", runs.len()),
    )
}

// ---------------------------------------------------------------------------
// Density trend (criterion 6)

/// Ranks with ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation of the ranks.
fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn criterion_6() -> Verdict {
    // Textbook value: one swapped pair in four gives 1 - 6*2/(4*15) = 0.8.
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-12);

    let cells = matrix_cells("density-scaled").expect("density-scaled");
    let jobs: Vec<ScenarioConfig> = cells
        .iter()
        .flat_map(|c| (1..=5).map(move |seed| ScenarioConfig { seed, ..c.clone() }))
        .collect();
    let metrics: Vec<(usize, RunMetrics)> = jobs
        .into_par_iter()
        .map(|cfg| (cfg.node_count, run_scenario(&cfg).expect("density run")))
        .collect();
    let mut by_nodes: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (n, m) in &metrics {
        let e = by_nodes.entry(*n).or_default();
        e.0.push(m.pdr());
        if let Some(h) = m.avg_hop_count() {
            e.1.push(h);
        }
    }
    let nodes: Vec<f64> = by_nodes.keys().map(|&n| n as f64).collect();
    let pdr: Vec<f64> = by_nodes.values().map(|(p, _)| mean_std(p).0).collect();
    let hop: BTreeMap<usize, f64> = by_nodes.iter().map(|(&n, (_, h))| (n, mean_std(h).0)).collect();
    let rho = spearman(&nodes, &pdr);
    let (h50, h200) = (hop[&50], hop[&200]);
    let expected: Vec<f64> = vec![50.0, 100.0, 150.0, 200.0];
    verdict(
        "6 density trend",
        nodes == expected && rho >= 0.0 && h200 <= h50,
        format!("spearman {rho:.3} over pdr {pdr:.3?}; hops {h50:.3} at 50 vs {h200:.3} at 200"),
    )
}

// ---------------------------------------------------------------------------
// Geometry (criterion 8)

fn criterion_8() -> Verdict {
    let failures: Vec<String> = (0..1000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
            let positions: BTreeMap<NodeId, Position> = (0..30)
                .map(|i| {
                    (
                        NodeId(i),
                        Position::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)),
                    )
                })
                .collect();
            let topo = TopologySnapshot::new(positions.clone(), RANGE, Vec::new()).unwrap();
            for v in topo.node_ids() {
                let gg = gabriel_edges(&topo, v).unwrap();
                let rng_set = rng_edges(&topo, v).unwrap();
                if !rng_set.is_subset(&gg) {
                    return Some(format!("set {seed}: rng not within gg at {v}"));
                }
                if gg
                    .iter()
                    .any(|&(a, b)| a != v || distance(positions[&a], positions[&b]) > RANGE)
                {
                    return Some(format!("set {seed}: gg edge outside unit disk at {v}"));
                }
            }
            let r = planarization_report(&topo, Planarization::Gabriel).unwrap();
            if !r.unidirectional.is_empty() {
                return Some(format!("set {seed}: {} one-sided gg edges", r.unidirectional.len()));
            }
            if !r.crossings.is_empty() {
                return Some(format!("set {seed}: {} crossings", r.crossings.len()));
            }
            None
        })
        .collect();
    verdict(
        "8 geometry properties",
        failures.is_empty(),
        if failures.is_empty() {
            "1000/1000 point sets clean".into()
        } else {
            format!("{} failing sets, first: {}", failures.len(), failures[0])
        },
    )
}

fn main() {
    let (corpus, corpus_secs) = corpus();
    let (mobile, mobile_secs) = mobile_runs();
    let verdicts = [
        criterion_1(&corpus, corpus_secs),
        criterion_2(&corpus),
        criterion_3(&corpus),
        criterion_4(),
        criterion_5(&mobile, mobile_secs),
        criterion_6(),
        criterion_7(&mobile),
        criterion_8(),
        criterion_9(&mobile),
    ];
    let mut failed = 0;
    for v in &verdicts {
        println!(
            "{} criterion {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!("{}/{} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
