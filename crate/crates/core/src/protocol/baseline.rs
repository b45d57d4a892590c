//! Comparison forwarding strategies: pure greedy, and greedy with
//! right-hand-rule perimeter recovery over a locally planarized graph.

use std::f64::consts::TAU;

use crate::geometry::{
    distance, planar_neighbors, segment_intersection, NodeId, Planarization, Position, Segment, DEFAULT_EPSILON,
};
use crate::packet::{ControlPacket, DataPacket};

use super::{Action, Agent, DropReason, NeighborTable, NodeCtx, ProtocolParams};

/// Neighbor strictly closer to `dst` than `here`, minimizing distance to
/// `dst` (ties to the smaller id). `None` at a void.
pub fn greedy_next_hop(here: Position, neighbors: &NeighborTable, dst: Position) -> Option<NodeId> {
    let own = distance(here, dst);
    neighbors
        .iter()
        .map(|e| (distance(e.position, dst), e.nbr_id))
        .filter(|(d, _)| *d < own)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

#[derive(Debug, Clone)]
pub struct GreedyNode {
    id: NodeId,
    params: ProtocolParams,
    neighbors: NeighborTable,
}

impl GreedyNode {
    pub fn new(id: NodeId, params: ProtocolParams) -> Self {
        GreedyNode {
            id,
            params,
            neighbors: NeighborTable::new(),
        }
    }

    fn forward(&mut self, ctx: NodeCtx, packet: DataPacket, out: &mut Vec<Action>) {
        self.expire_tables(ctx.now);
        if self.neighbors.contains(packet.dst) {
            out.push(Action::data(packet.dst, packet));
            return;
        }
        match greedy_next_hop(ctx.position, &self.neighbors, packet.dst_position) {
            Some(next) => out.push(Action::data(next, packet)),
            None => {
                let reason = if self.neighbors.is_empty() && packet.src == self.id {
                    DropReason::NoNeighbor
                } else {
                    DropReason::GreedyVoid
                };
                out.push(Action::Drop { packet, reason });
            }
        }
    }
}

impl Agent for GreedyNode {
    fn id(&self) -> NodeId {
        self.id
    }

    fn neighbors(&self) -> &NeighborTable {
        &self.neighbors
    }

    fn neighbors_mut(&mut self) -> &mut NeighborTable {
        &mut self.neighbors
    }

    fn expire_tables(&mut self, now: f64) {
        self.neighbors.expire(now, self.params.neighbor_expiry());
    }

    fn originate(&mut self, ctx: NodeCtx, packet: DataPacket, out: &mut Vec<Action>) {
        self.forward(ctx, packet, out);
    }

    fn on_data(&mut self, ctx: NodeCtx, packet: DataPacket, _from: NodeId, out: &mut Vec<Action>) {
        if packet.dst == self.id {
            out.push(Action::Deliver(packet));
        } else {
            self.forward(ctx, packet, out);
        }
    }

    fn on_control(&mut self, ctx: NodeCtx, ctrl: ControlPacket, _from: NodeId, _out: &mut Vec<Action>) {
        if let ControlPacket::Hello(h) = ctrl {
            self.neighbors.on_hello(&h, ctx.now);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Greedy,
    Perimeter,
}

/// Per-packet header of the perimeter-routing baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsrPacketState {
    pub mode: ForwardMode,
    /// Where perimeter mode began; set iff `mode == Perimeter`.
    pub entry_point: Option<Position>,
    /// Point on the entry-to-destination line where the current face was entered.
    pub face_point: Option<Position>,
    /// First edge traversed on the current face.
    pub first_edge: Option<(NodeId, NodeId)>,
    /// Position of the node that sent the packet here.
    pub last_hop: Option<Position>,
    pub ttl: u32,
}

impl GpsrPacketState {
    pub fn new(ttl: u32) -> Self {
        GpsrPacketState {
            mode: ForwardMode::Greedy,
            entry_point: None,
            face_point: None,
            first_edge: None,
            last_hop: None,
            ttl,
        }
    }
}

fn bearing(from: Position, to: Position) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// First planar neighbor counterclockwise from the direction `reference`
/// around `center`. A neighbor lying exactly on the reference direction
/// comes last, so a packet is only sent back where it came from when no
/// other edge exists.
fn right_hand_next(center: Position, reference: f64, planar: &[(NodeId, Position)]) -> Option<(NodeId, Position)> {
    planar
        .iter()
        .map(|&(id, pos)| {
            let mut delta = (bearing(center, pos) - reference).rem_euclid(TAU);
            if delta <= 1e-12 {
                delta = TAU;
            }
            (delta, id, pos)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id, pos)| (id, pos))
}

/// One right-hand-rule step of perimeter mode at node `here`/`here_pos`,
/// over the planar neighbor set `planar`. Returns the next hop (or `None`
/// when the packet must be dropped) and the updated header; the caller
/// checks the return-to-greedy condition first.
pub fn perimeter_next_hop(
    here: NodeId,
    here_pos: Position,
    planar: &[(NodeId, Position)],
    mut state: GpsrPacketState,
    dst: Position,
) -> (Option<NodeId>, GpsrPacketState) {
    debug_assert_eq!(state.mode, ForwardMode::Perimeter);
    let entering = state.first_edge.is_none();
    let reference = match (entering, state.last_hop) {
        (false, Some(prev)) => bearing(here_pos, prev),
        _ => bearing(here_pos, dst),
    };
    let Some((mut next, mut next_pos)) = right_hand_next(here_pos, reference, planar) else {
        return (None, state);
    };
    let mut face_changed = false;
    if let Some(mut lf) = state.face_point {
        // Switch faces whenever the chosen edge crosses the line toward the
        // destination closer than the point where this face was entered.
        for _ in 0..planar.len() {
            let crossing = segment_intersection(Segment::new(here_pos, next_pos), Segment::new(lf, dst));
            match crossing {
                Some(i) if distance(i, dst) < distance(lf, dst) => {
                    lf = i;
                    face_changed = true;
                    match right_hand_next(here_pos, bearing(here_pos, next_pos), planar) {
                        Some((n, p)) => {
                            next = n;
                            next_pos = p;
                        }
                        None => break,
                    }
                }
                _ => break,
            }
        }
        state.face_point = Some(lf);
    }
    if entering || face_changed {
        state.first_edge = Some((here, next));
    } else if state.first_edge == Some((here, next)) {
        return (None, state);
    }
    (Some(next), state)
}

#[derive(Debug, Clone)]
pub struct GpsrNode {
    id: NodeId,
    params: ProtocolParams,
    neighbors: NeighborTable,
    planarization: Planarization,
    ttl: u32,
}

impl GpsrNode {
    pub fn new(id: NodeId, params: ProtocolParams, planarization: Planarization, ttl: u32) -> Self {
        GpsrNode {
            id,
            params,
            neighbors: NeighborTable::new(),
            planarization,
            ttl,
        }
    }

    fn planar_view(&self, here: Position) -> Vec<(NodeId, Position)> {
        let known: Vec<(NodeId, Position)> = self.neighbors.iter().map(|e| (e.nbr_id, e.position)).collect();
        let keep = planar_neighbors(here, &known, self.planarization, DEFAULT_EPSILON);
        known.into_iter().filter(|(id, _)| keep.contains(id)).collect()
    }

    fn forward(&mut self, ctx: NodeCtx, mut packet: DataPacket, out: &mut Vec<Action>) {
        self.expire_tables(ctx.now);
        let mut state = packet.gpsr.unwrap_or_else(|| GpsrPacketState::new(self.ttl));
        if state.ttl == 0 {
            out.push(Action::Drop {
                packet,
                reason: DropReason::TtlExpired,
            });
            return;
        }
        state.ttl -= 1;
        let dst = packet.dst_position;

        if self.neighbors.contains(packet.dst) {
            state.last_hop = Some(ctx.position);
            packet.gpsr = Some(state);
            out.push(Action::data(packet.dst, packet));
            return;
        }

        if state.mode == ForwardMode::Perimeter {
            let lp = state.entry_point.expect("perimeter mode has an entry point");
            if distance(ctx.position, dst) < distance(lp, dst) {
                state = GpsrPacketState::new(state.ttl);
            }
        }

        if state.mode == ForwardMode::Greedy {
            if let Some(next) = greedy_next_hop(ctx.position, &self.neighbors, dst) {
                state.last_hop = Some(ctx.position);
                packet.gpsr = Some(state);
                out.push(Action::data(next, packet));
                return;
            }
            if self.neighbors.is_empty() {
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoNeighbor,
                });
                return;
            }
            state.mode = ForwardMode::Perimeter;
            state.entry_point = Some(ctx.position);
            state.face_point = Some(ctx.position);
            state.first_edge = None;
        }

        let planar = self.planar_view(ctx.position);
        let (next, mut state) = perimeter_next_hop(self.id, ctx.position, &planar, state, dst);
        match next {
            Some(next) => {
                state.last_hop = Some(ctx.position);
                packet.gpsr = Some(state);
                out.push(Action::data(next, packet));
            }
            None => {
                let reason = if planar.is_empty() {
                    DropReason::NoNeighbor
                } else {
                    DropReason::PerimeterLoop
                };
                out.push(Action::Drop { packet, reason });
            }
        }
    }
}

impl Agent for GpsrNode {
    fn id(&self) -> NodeId {
        self.id
    }

    fn neighbors(&self) -> &NeighborTable {
        &self.neighbors
    }

    fn neighbors_mut(&mut self) -> &mut NeighborTable {
        &mut self.neighbors
    }

    fn expire_tables(&mut self, now: f64) {
        self.neighbors.expire(now, self.params.neighbor_expiry());
    }

    fn originate(&mut self, ctx: NodeCtx, packet: DataPacket, out: &mut Vec<Action>) {
        self.forward(ctx, packet, out);
    }

    fn on_data(&mut self, ctx: NodeCtx, packet: DataPacket, _from: NodeId, out: &mut Vec<Action>) {
        if packet.dst == self.id {
            out.push(Action::Deliver(packet));
        } else {
            self.forward(ctx, packet, out);
        }
    }

    fn on_control(&mut self, ctx: NodeCtx, ctrl: ControlPacket, _from: NodeId, _out: &mut Vec<Action>) {
        if let ControlPacket::Hello(h) = ctrl {
            self.neighbors.on_hello(&h, ctx.now);
        }
    }
}
