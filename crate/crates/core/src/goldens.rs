//! Hand-built topologies on which greedy forwarding or planarized face
//! routing fails although a path exists. Every topology is checked with
//! the geometry module before it is written out.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::planarization_report;
use crate::config::{render_config, render_topology};
use crate::engine::RadioModel;
use crate::error::{Error, Result};
use crate::geometry::{
    distance, gabriel_edges, AreaBounds, NodeId, NodePair, Planarization, Position, TopologySnapshot,
};
use crate::protocol::{ProtocolKind, ProtocolParams};
use crate::scenario::{FlowSpec, Placement, ScenarioConfig};
use crate::traffic::CbrFlow;

pub const RANGE: f64 = 250.0;
/// Packets in the single golden flow.
pub const PACKETS: u32 = 10;
pub const FLOW_START: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pathology {
    /// Greedy forwarding reaches a node with no closer neighbor.
    Void,
    /// Some link is kept by one endpoint and dropped by the other.
    Unidirectional,
    /// Planarizing cuts every planar route from source to destination.
    Disconnected,
    /// Two planar edges cross.
    CrossLink,
}

#[derive(Debug, Clone)]
pub struct Golden {
    pub name: &'static str,
    pub pathology: Pathology,
    pub area: AreaBounds,
    /// Label and position of each node; the index is the node id.
    pub nodes: Vec<(&'static str, Position)>,
    pub blocked: Vec<(&'static str, &'static str)>,
}

impl Golden {
    pub fn id(&self, label: &str) -> NodeId {
        let i = self
            .nodes
            .iter()
            .position(|(l, _)| *l == label)
            .unwrap_or_else(|| panic!("no node labelled {label} in {}", self.name));
        NodeId(i as u32)
    }

    pub fn src(&self) -> NodeId {
        self.id("S")
    }

    pub fn dst(&self) -> NodeId {
        self.id("D")
    }

    pub fn positions(&self) -> BTreeMap<NodeId, Position> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, (_, p))| (NodeId(i as u32), *p))
            .collect()
    }

    pub fn blocked_pairs(&self) -> BTreeSet<NodePair> {
        self.blocked
            .iter()
            .map(|(a, b)| NodePair::new(self.id(a), self.id(b)))
            .collect()
    }

    pub fn snapshot(&self) -> Result<TopologySnapshot> {
        TopologySnapshot::new(self.positions(), RANGE, self.blocked_pairs())
    }

    /// A static single-flow scenario on this topology.
    pub fn config(&self, protocol: ProtocolKind) -> ScenarioConfig {
        let interval = crate::traffic::CBR_INTERVAL;
        let end = FLOW_START + f64::from(PACKETS) * interval;
        ScenarioConfig {
            scenario_id: self.name.into(),
            protocol,
            planarization: Planarization::Gabriel,
            area: self.area,
            node_count: self.nodes.len(),
            placement: Placement::Explicit(self.positions()),
            v_min: 0.0,
            v_max: 0.0,
            pause_time: 0.0,
            radio: RadioModel {
                range: RANGE,
                blocked: self.blocked_pairs(),
                ..Default::default()
            },
            params: ProtocolParams::default(),
            ttl: None,
            flows: FlowSpec::Explicit(vec![CbrFlow::new(0, self.src(), self.dst(), FLOW_START, end)]),
            duration: end + 10.0,
            seed: 1,
            stop_when_idle: true,
            output: None,
            trace_output: None,
        }
    }

    /// Confirm the topology has its pathology and still connects S to D.
    pub fn verify(&self) -> Result<()> {
        let fail = |reason: String| Error::GoldenCheck {
            name: self.name,
            reason,
        };
        let topo = self.snapshot()?;
        for (id, p) in topo.positions() {
            if !self.area.contains(*p) {
                return Err(fail(format!("node {id} lies outside the area")));
            }
        }
        let (s, d) = (self.src(), self.dst());
        if !connected(&topo, s, d) {
            return Err(fail("no radio path from S to D".into()));
        }
        // Every golden forces a recovery step: greedy must stall.
        match greedy_walk(&topo, s, d) {
            Some(stuck) if stuck != d => {}
            _ => return Err(fail("greedy forwarding reaches D".into())),
        }
        let report = planarization_report(&topo, Planarization::Gabriel)?;
        match self.pathology {
            Pathology::Void => {}
            Pathology::Unidirectional => {
                let found = topo.node_ids().any(|u| {
                    gabriel_edges(&topo, u).is_ok_and(|edges| {
                        edges
                            .iter()
                            .any(|&(_, v)| gabriel_edges(&topo, v).is_ok_and(|back| !back.contains(&(v, u))))
                    })
                });
                if !found {
                    return Err(fail("no unidirectional Gabriel link".into()));
                }
            }
            Pathology::Disconnected => {
                if !report.separates(s, d) {
                    return Err(fail("planarized graph still connects S and D".into()));
                }
            }
            Pathology::CrossLink => {
                if report.crossings.is_empty() {
                    return Err(fail("no crossing planar edges".into()));
                }
            }
        }
        Ok(())
    }
}

fn connected(topo: &TopologySnapshot, s: NodeId, d: NodeId) -> bool {
    let edges = topo.communication_edges();
    let mut seen = BTreeSet::from([s]);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for e in &edges {
            let v = if e.first() == u {
                e.second()
            } else if e.second() == u {
                e.first()
            } else {
                continue;
            };
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen.contains(&d)
}

/// Follow strictly-closer greedy hops from `s`; returns where it stops.
fn greedy_walk(topo: &TopologySnapshot, s: NodeId, d: NodeId) -> Option<NodeId> {
    let dp = topo.position(d).ok()?;
    let mut here = s;
    for _ in 0..topo.len() {
        if here == d {
            return Some(d);
        }
        let hp = topo.position(here).ok()?;
        let next = topo
            .node_ids()
            .filter(|&v| topo.linked(here, v))
            .map(|v| (distance(topo.positions()[&v], dp), v))
            .filter(|&(dist, _)| dist < distance(hp, dp))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match next {
            Some((_, v)) => here = v,
            None => return Some(here),
        }
    }
    None
}

fn p(x: f64, y: f64) -> Position {
    Position::new(x, y)
}

/// The four reference topologies.
pub fn golden_topologies() -> Vec<Golden> {
    vec![
        // B is a dead end for D; the detour 1..6 goes around the void.
        Golden {
            name: "fig1",
            pathology: Pathology::Void,
            area: AreaBounds::new(1200.0, 1100.0).expect("area"),
            nodes: vec![
                ("S", p(300.0, 500.0)),
                ("B", p(500.0, 500.0)),
                ("1", p(480.0, 720.0)),
                ("2", p(600.0, 900.0)),
                ("3", p(780.0, 960.0)),
                ("4", p(960.0, 900.0)),
                ("5", p(1080.0, 740.0)),
                ("6", p(1060.0, 560.0)),
                ("D", p(900.0, 500.0)),
            ],
            blocked: vec![],
        },
        // V stalls. Witness B sits inside the A-C circle but an obstacle
        // hides it from C, so C keeps C-A while A drops A-C. X is a dead end
        // that the first GRB packet explores and backtracks from.
        Golden {
            name: "fig2",
            pathology: Pathology::Unidirectional,
            area: AreaBounds::new(1000.0, 1000.0).expect("area"),
            nodes: vec![
                ("S", p(100.0, 500.0)),
                ("V", p(300.0, 500.0)),
                ("X", p(320.0, 720.0)),
                ("A", p(300.0, 280.0)),
                ("B", p(410.0, 240.0)),
                ("C", p(520.0, 250.0)),
                ("E", p(720.0, 380.0)),
                ("D", p(900.0, 500.0)),
            ],
            blocked: vec![("B", "C")],
        },
        // A sees witness B1 and C sees witness B2 inside the A-C circle;
        // each witness is hidden from the far endpoint and from the other,
        // so both ends drop the only bridge.
        Golden {
            name: "fig3",
            pathology: Pathology::Disconnected,
            area: AreaBounds::new(1000.0, 1000.0).expect("area"),
            nodes: vec![
                ("S", p(100.0, 500.0)),
                ("V", p(300.0, 500.0)),
                ("A", p(300.0, 280.0)),
                ("B1", p(410.0, 230.0)),
                ("B2", p(430.0, 250.0)),
                ("C", p(520.0, 250.0)),
                ("E", p(720.0, 380.0)),
                ("D", p(900.0, 500.0)),
            ],
            blocked: vec![("B1", "C"), ("B2", "A"), ("B1", "B2")],
        },
        // D lies inside the N-C circle but is hidden from N, C and B, so N
        // and C keep N-C, which crosses D-G. Face traversal from N cycles
        // through B and C without meeting G.
        Golden {
            name: "fig4",
            pathology: Pathology::CrossLink,
            area: AreaBounds::new(800.0, 800.0).expect("area"),
            nodes: vec![
                ("S", p(220.0, 500.0)),
                ("N", p(400.0, 500.0)),
                ("B", p(410.0, 640.0)),
                ("C", p(600.0, 500.0)),
                ("G", p(495.0, 330.0)),
                ("D", p(495.0, 530.0)),
            ],
            blocked: vec![("D", "N"), ("D", "C"), ("D", "B")],
        },
    ]
}

/// Verify each topology, then write `<name>.topo` and `<name>.conf` into
/// `out_dir`. Nothing is written if any check fails.
pub fn emit_pathological_topologies(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let goldens = golden_topologies();
    for g in &goldens {
        g.verify()?;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for g in &goldens {
        let topo_name = format!("{}.topo", g.name);
        let mut text = String::new();
        for (i, (label, _)) in g.nodes.iter().enumerate() {
            text.push_str(&format!("# node {i} = {label}\n"));
        }
        text.push_str(&render_topology(g.area, RANGE, &g.positions(), &g.blocked_pairs()));
        let topo_path = out_dir.join(&topo_name);
        fs::write(&topo_path, text).map_err(|e| Error::io(&topo_path, e))?;
        let conf_path = out_dir.join(format!("{}.conf", g.name));
        let conf = render_config(&g.config(ProtocolKind::Grb), Some(Path::new(&topo_name)));
        fs::write(&conf_path, conf).map_err(|e| Error::io(&conf_path, e))?;
        written.push(topo_path);
        written.push(conf_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_golden_passes_its_self_check() {
        for g in golden_topologies() {
            g.verify().unwrap_or_else(|e| panic!("{e}"));
        }
    }

    #[test]
    fn fig2_unidirectional_pair_is_c_to_a() {
        let g = &golden_topologies()[1];
        let topo = g.snapshot().unwrap();
        let (a, c) = (g.id("A"), g.id("C"));
        assert!(gabriel_edges(&topo, c).unwrap().contains(&(c, a)));
        assert!(!gabriel_edges(&topo, a).unwrap().contains(&(a, c)));
        assert!(topo.linked(a, c));
    }

    #[test]
    fn fig4_cross_link_is_n_c_over_d_g() {
        let g = &golden_topologies()[3];
        let r = planarization_report(&g.snapshot().unwrap(), Planarization::Gabriel).unwrap();
        let nc = NodePair::new(g.id("N"), g.id("C"));
        let dg = NodePair::new(g.id("D"), g.id("G"));
        assert!(r.crossings.contains(&(nc, dg)) || r.crossings.contains(&(dg, nc)));
    }

    #[test]
    fn broken_golden_is_rejected() {
        let mut g = golden_topologies().remove(3);
        g.blocked.clear();
        assert!(matches!(g.verify(), Err(Error::GoldenCheck { name: "fig4", .. })));
    }

    #[test]
    fn greedy_walk_stops_at_fig1_void() {
        let g = &golden_topologies()[0];
        let topo = g.snapshot().unwrap();
        assert_eq!(greedy_walk(&topo, g.src(), g.dst()), Some(g.id("B")));
    }
}
