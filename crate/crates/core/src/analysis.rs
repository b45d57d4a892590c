//! Diagnostics for local planarization: links kept by only one endpoint,
//! connectivity lost by planarizing, and planar edges that cross.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::Result;
use crate::geometry::{edges_cross, planarized_edges, NodeId, NodePair, Planarization, Segment, TopologySnapshot};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarReport {
    pub method: Planarization,
    /// Edges each node keeps after planarizing its own neighborhood.
    pub kept: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// `(u, v)`: `u` keeps the link to `v` but `v` drops the link to `u`.
    pub unidirectional: Vec<(NodeId, NodeId)>,
    /// Components of the undirected union of all kept edges.
    pub planar_components: Vec<BTreeSet<NodeId>>,
    /// Components of the full communication graph.
    pub radio_components: Vec<BTreeSet<NodeId>>,
    /// Pairs of kept edges that properly cross.
    pub crossings: Vec<(NodePair, NodePair)>,
}

impl PlanarReport {
    pub fn union_edges(&self) -> BTreeSet<NodePair> {
        self.kept
            .iter()
            .flat_map(|(&u, vs)| vs.iter().map(move |&v| NodePair::new(u, v)))
            .collect()
    }

    /// Planarizing split a connected set of nodes.
    pub fn is_disconnected(&self) -> bool {
        self.planar_components.len() > self.radio_components.len()
    }

    /// `a` and `b` can talk over radio but not over planar edges.
    pub fn separates(&self, a: NodeId, b: NodeId) -> bool {
        let same = |comps: &[BTreeSet<NodeId>]| comps.iter().any(|c| c.contains(&a) && c.contains(&b));
        same(&self.radio_components) && !same(&self.planar_components)
    }
}

fn components(nodes: impl Iterator<Item = NodeId>, edges: &BTreeSet<NodePair>) -> Vec<BTreeSet<NodeId>> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = nodes.map(|n| (n, Vec::new())).collect();
    for e in edges {
        adj.entry(e.first()).or_default().push(e.second());
        adj.entry(e.second()).or_default().push(e.first());
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[&u] {
                if seen.insert(v) {
                    comp.insert(v);
                    queue.push_back(v);
                }
            }
        }
        out.push(comp);
    }
    out
}

pub fn planarization_report(topo: &TopologySnapshot, method: Planarization) -> Result<PlanarReport> {
    let mut kept = BTreeMap::new();
    for id in topo.node_ids() {
        let edges = planarized_edges(topo, id, method)?;
        kept.insert(id, edges.into_iter().map(|(_, v)| v).collect::<BTreeSet<_>>());
    }
    let unidirectional = kept
        .iter()
        .flat_map(|(&u, vs)| vs.iter().map(move |&v| (u, v)))
        .filter(|&(u, v)| !kept[&v].contains(&u))
        .collect();

    let mut report = PlanarReport {
        method,
        kept,
        unidirectional,
        planar_components: Vec::new(),
        radio_components: components(topo.node_ids(), &topo.communication_edges()),
        crossings: Vec::new(),
    };
    let union: Vec<NodePair> = report.union_edges().into_iter().collect();
    report.planar_components = components(topo.node_ids(), &union.iter().copied().collect());
    let seg =
        |e: &NodePair| -> Result<Segment> { Ok(Segment::new(topo.position(e.first())?, topo.position(e.second())?)) };
    for (i, e1) in union.iter().enumerate() {
        for e2 in &union[i + 1..] {
            if edges_cross(seg(e1)?, seg(e2)?)? {
                report.crossings.push((*e1, *e2));
            }
        }
    }
    Ok(report)
}

impl fmt::Display for PlanarReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "planar edges: {}", self.union_edges().len())?;
        writeln!(f, "unidirectional links: {}", self.unidirectional.len())?;
        for (u, v) in &self.unidirectional {
            writeln!(f, "  {u} keeps {u}-{v}, {v} drops it")?;
        }
        writeln!(
            f,
            "components: {} planar, {} radio{}",
            self.planar_components.len(),
            self.radio_components.len(),
            if self.is_disconnected() {
                " (disconnected by planarization)"
            } else {
                ""
            }
        )?;
        if self.is_disconnected() {
            for c in &self.planar_components {
                let ids: Vec<String> = c.iter().map(|n| n.to_string()).collect();
                writeln!(f, "  {{{}}}", ids.join(", "))?;
            }
        }
        writeln!(f, "crossing edge pairs: {}", self.crossings.len())?;
        for (a, b) in &self.crossings {
            writeln!(f, "  {}-{} x {}-{}", a.first(), a.second(), b.first(), b.second())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;

    fn topo(points: &[(f64, f64)], blocked: &[(u32, u32)]) -> TopologySnapshot {
        let positions = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (NodeId(i as u32), Position::new(x, y)))
            .collect();
        let blocked: BTreeSet<NodePair> = blocked
            .iter()
            .map(|&(a, b)| NodePair::new(NodeId(a), NodeId(b)))
            .collect();
        TopologySnapshot::new(positions, 250.0, blocked).unwrap()
    }

    #[test]
    fn clean_quad_has_no_pathologies() {
        let t = topo(&[(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (5.0, 95.0)], &[]);
        let r = planarization_report(&t, Planarization::Gabriel).unwrap();
        assert!(r.unidirectional.is_empty());
        assert!(r.crossings.is_empty());
        assert!(!r.is_disconnected());
        assert_eq!(r.union_edges().len(), 5);
    }

    #[test]
    fn cocircular_square_keeps_both_diagonals() {
        // Each diagonal has the other corners on its circle, not inside.
        let t = topo(&[(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)], &[]);
        let r = planarization_report(&t, Planarization::Gabriel).unwrap();
        assert_eq!(r.union_edges().len(), 6);
        assert_eq!(r.crossings.len(), 1);
    }

    #[test]
    fn hidden_witness_gives_unidirectional_link() {
        // A=0, C=1, witness B=2 near the middle, blocked from C.
        let t = topo(&[(0.0, 0.0), (200.0, 0.0), (100.0, 10.0)], &[(1, 2)]);
        let r = planarization_report(&t, Planarization::Gabriel).unwrap();
        assert_eq!(r.unidirectional, vec![(NodeId(1), NodeId(0))]);
    }

    #[test]
    fn components_follow_edges() {
        let edges = BTreeSet::from([NodePair::new(NodeId(0), NodeId(1))]);
        let c = components((0..3).map(NodeId), &edges);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn report_mentions_each_section() {
        let t = topo(&[(0.0, 0.0), (200.0, 0.0), (100.0, 10.0)], &[(1, 2)]);
        let text = planarization_report(&t, Planarization::Gabriel).unwrap().to_string();
        assert!(text.contains("unidirectional links: 1"));
        assert!(text.contains("crossing edge pairs: 0"));
    }
}
