//! Planar geometry of the node field: positions, unit-disk connectivity with
//! radio-opaque blocked pairs, and local Gabriel / relative-neighborhood
//! planarization as computed by a single node from its own neighbor set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance for "strictly inside" witness tests.
pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        distance(*self, *other)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Point `frac` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Position, frac: f64) -> Position {
        Position::new(self.x + (other.x - self.x) * frac, self.y + (other.y - self.y) * frac)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Euclidean distance.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Terrain rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaBounds {
    pub width: f64,
    pub height: f64,
}

impl AreaBounds {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::param("area_w", format!("must be > 0, got {width}")));
        }
        if !(height.is_finite() && height > 0.0) {
            return Err(Error::param("area_h", format!("must be > 0, got {height}")));
        }
        Ok(AreaBounds { width, height })
    }

    pub fn contains(&self, p: Position) -> bool {
        p.is_finite() && (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePair(NodeId, NodeId);

impl NodePair {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            NodePair(a, b)
        } else {
            NodePair(b, a)
        }
    }

    pub fn first(&self) -> NodeId {
        self.0
    }

    pub fn second(&self) -> NodeId {
        self.1
    }
}

/// Directed edge `(from, to)` as seen by the `from` endpoint.
pub type Edge = (NodeId, NodeId);

/// Frozen node positions plus the radio parameters that induce the
/// communication graph.
#[derive(Debug, Clone)]
pub struct TopologySnapshot {
    positions: BTreeMap<NodeId, Position>,
    range: f64,
    blocked: BTreeSet<NodePair>,
}

impl TopologySnapshot {
    pub fn new(
        positions: BTreeMap<NodeId, Position>,
        range: f64,
        blocked: impl IntoIterator<Item = NodePair>,
    ) -> Result<Self> {
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::param("range", format!("must be > 0, got {range}")));
        }
        if let Some((id, p)) = positions.iter().find(|(_, p)| !p.is_finite()) {
            return Err(Error::Topology(format!("node {id} has non-finite position {p}")));
        }
        let blocked: BTreeSet<NodePair> = blocked.into_iter().collect();
        for pair in &blocked {
            for id in [pair.first(), pair.second()] {
                if !positions.contains_key(&id) {
                    return Err(Error::Topology(format!(
                        "blocked pair ({}, {}) references unknown node {id}",
                        pair.first(),
                        pair.second()
                    )));
                }
            }
        }
        Ok(TopologySnapshot {
            positions,
            range,
            blocked,
        })
    }

    pub fn positions(&self) -> &BTreeMap<NodeId, Position> {
        &self.positions
    }

    pub fn position(&self, id: NodeId) -> Result<Position> {
        self.positions.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn blocked(&self) -> &BTreeSet<NodePair> {
        &self.blocked
    }

    pub fn is_blocked(&self, a: NodeId, b: NodeId) -> bool {
        self.blocked.contains(&NodePair::new(a, b))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.positions.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// True iff `a` and `b` can exchange frames.
    pub fn linked(&self, a: NodeId, b: NodeId) -> bool {
        if a == b || self.is_blocked(a, b) {
            return false;
        }
        match (self.positions.get(&a), self.positions.get(&b)) {
            (Some(pa), Some(pb)) => distance(*pa, *pb) <= self.range,
            _ => false,
        }
    }

    /// All undirected communication edges.
    pub fn communication_edges(&self) -> BTreeSet<NodePair> {
        let ids: Vec<NodeId> = self.node_ids().collect();
        let mut edges = BTreeSet::new();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if self.linked(a, b) {
                    edges.insert(NodePair::new(a, b));
                }
            }
        }
        edges
    }
}

/// Nodes `u != node` within range of `node` and not blocked from it.
pub fn neighbors_within_range(topo: &TopologySnapshot, node: NodeId) -> Result<BTreeSet<NodeId>> {
    topo.position(node)?;
    Ok(topo.node_ids().filter(|&u| topo.linked(node, u)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Planarization {
    Gabriel,
    RelativeNeighborhood,
}

impl Planarization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Planarization::Gabriel => "gg",
            Planarization::RelativeNeighborhood => "rng",
        }
    }
}

impl FromStr for Planarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gg" | "gabriel" => Ok(Planarization::Gabriel),
            "rng" => Ok(Planarization::RelativeNeighborhood),
            other => Err(Error::param(
                "planarization",
                format!("expected gg or rng, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Planarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True iff `w` lies strictly inside the circle whose diameter is `u`-`v`.
pub fn in_diameter_circle(u: Position, v: Position, w: Position, eps: f64) -> bool {
    let center = u.lerp(&v, 0.5);
    distance(center, w) < distance(u, v) / 2.0 - eps
}

/// True iff `w` lies strictly inside the lune of `u`-`v`.
pub fn in_lune(u: Position, v: Position, w: Position, eps: f64) -> bool {
    let duv = distance(u, v);
    distance(u, w).max(distance(v, w)) < duv - eps
}

/// Planarize the star of `center` using only the nodes in `known` as
/// witnesses. Returns the retained neighbor ids in input order.
pub fn planar_neighbors(
    center: Position,
    known: &[(NodeId, Position)],
    method: Planarization,
    eps: f64,
) -> Vec<NodeId> {
    let witness = match method {
        Planarization::Gabriel => in_diameter_circle,
        Planarization::RelativeNeighborhood => in_lune,
    };
    known
        .iter()
        .filter(|(id, pos)| {
            !known
                .iter()
                .any(|(wid, wpos)| wid != id && witness(center, *pos, *wpos, eps))
        })
        .map(|(id, _)| *id)
        .collect()
}

fn local_view(topo: &TopologySnapshot, viewpoint: NodeId) -> Result<(Position, Vec<(NodeId, Position)>)> {
    let center = topo.position(viewpoint)?;
    let known = neighbors_within_range(topo, viewpoint)?
        .into_iter()
        .map(|id| (id, topo.positions[&id]))
        .collect();
    Ok((center, known))
}

pub fn planarized_edges_eps(
    topo: &TopologySnapshot,
    viewpoint: NodeId,
    method: Planarization,
    eps: f64,
) -> Result<BTreeSet<Edge>> {
    let (center, known) = local_view(topo, viewpoint)?;
    Ok(planar_neighbors(center, &known, method, eps)
        .into_iter()
        .map(|u| (viewpoint, u))
        .collect())
}

pub fn planarized_edges(topo: &TopologySnapshot, viewpoint: NodeId, method: Planarization) -> Result<BTreeSet<Edge>> {
    planarized_edges_eps(topo, viewpoint, method, DEFAULT_EPSILON)
}

/// Gabriel edges incident to `viewpoint`, witnesses restricted to the
/// viewpoint's own neighbor set.
pub fn gabriel_edges(topo: &TopologySnapshot, viewpoint: NodeId) -> Result<BTreeSet<Edge>> {
    planarized_edges(topo, viewpoint, Planarization::Gabriel)
}

/// Relative-neighborhood edges incident to `viewpoint` (lune criterion).
pub fn rng_edges(topo: &TopologySnapshot, viewpoint: NodeId) -> Result<BTreeSet<Edge>> {
    planarized_edges(topo, viewpoint, Planarization::RelativeNeighborhood)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Position,
    pub b: Position,
}

impl Segment {
    pub fn new(a: Position, b: Position) -> Self {
        Segment { a, b }
    }
}

fn orientation(p: Position, q: Position, r: Position) -> f64 {
    (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
}

/// Proper crossing test: open segments intersect in exactly one interior
/// point. Segments sharing an endpoint never cross.
pub fn edges_cross(e1: Segment, e2: Segment) -> Result<bool> {
    if e1.a == e1.b || e2.a == e2.b {
        return Err(Error::DegenerateSegment);
    }
    if e1.a == e2.a || e1.a == e2.b || e1.b == e2.a || e1.b == e2.b {
        return Ok(false);
    }
    let o1 = orientation(e1.a, e1.b, e2.a);
    let o2 = orientation(e1.a, e1.b, e2.b);
    let o3 = orientation(e2.a, e2.b, e1.a);
    let o4 = orientation(e2.a, e2.b, e1.b);
    Ok(o1 * o2 < 0.0 && o3 * o4 < 0.0)
}

/// Intersection point of two properly crossing segments, if any.
pub fn segment_intersection(e1: Segment, e2: Segment) -> Option<Position> {
    let r = (e1.b.x - e1.a.x, e1.b.y - e1.a.y);
    let s = (e2.b.x - e2.a.x, e2.b.y - e2.a.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom == 0.0 {
        return None;
    }
    let qp = (e2.a.x - e1.a.x, e2.a.y - e1.a.y);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    if t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0 {
        Some(e1.a.lerp(&e1.b, t))
    } else {
        None
    }
}
