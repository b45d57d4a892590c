//! Greedy routing with backtracking.
//!
//! Each node forwards a packet to the neighbor closest to the destination
//! that has not already handled the flow, after asking that neighbor to
//! confirm it has not seen the flow from anyone else. A node that runs out
//! of candidates hands the packet back to whoever gave it, so the first
//! packet of a flow performs a depth-first search of the network. The Seen
//! Table left behind by that search steers later packets of the same
//! source/destination pair straight down the path that worked.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{distance, NodeId};
use crate::packet::{ControlPacket, DataPacket, PacketId};

use super::{Action, Agent, DropReason, NeighborTable, NodeCtx, ProtocolParams, Timer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeenEntry {
    pub nbr_id: NodeId,
    pub src: NodeId,
    pub dst: NodeId,
    /// `false`: data for (src, dst) arrived from `nbr_id`.
    /// `true`: a packet for (src, dst) backtracked from `nbr_id`.
    pub flag: bool,
    pub expires: f64,
}

/// One entry per `(nbr_id, src, dst)`.
#[derive(Debug, Clone, Default)]
pub struct SeenTable {
    entries: BTreeMap<(NodeId, NodeId, NodeId), SeenEntry>,
}

impl SeenTable {
    pub fn upsert(&mut self, nbr_id: NodeId, src: NodeId, dst: NodeId, flag: bool, expires: f64) {
        self.entries.insert(
            (nbr_id, src, dst),
            SeenEntry {
                nbr_id,
                src,
                dst,
                flag,
                expires,
            },
        );
    }

    pub fn get(&self, nbr_id: NodeId, src: NodeId, dst: NodeId) -> Option<&SeenEntry> {
        self.entries.get(&(nbr_id, src, dst))
    }

    pub fn contains(&self, nbr_id: NodeId, src: NodeId, dst: NodeId) -> bool {
        self.entries.contains_key(&(nbr_id, src, dst))
    }

    /// Some neighbor other than `asker` has sent us data for (src, dst).
    pub fn seen_from_other(&self, src: NodeId, dst: NodeId, asker: NodeId) -> bool {
        self.entries
            .values()
            .any(|e| e.src == src && e.dst == dst && !e.flag && e.nbr_id != asker)
    }

    pub fn expire(&mut self, now: f64) {
        self.entries.retain(|_, e| now <= e.expires);
    }

    pub fn iter(&self) -> impl Iterator<Item = &SeenEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A packet this node is currently trying to move on.
#[derive(Debug, Clone)]
pub struct PendingForward {
    pub packet: DataPacket,
    pub received_from: Option<NodeId>,
    pub candidates_tried: BTreeSet<NodeId>,
    pub awaiting_reply_from: Option<NodeId>,
    nonce: u64,
}

impl PendingForward {
    pub fn new(packet: DataPacket, received_from: Option<NodeId>) -> Self {
        PendingForward {
            packet,
            received_from,
            candidates_tried: BTreeSet::new(),
            awaiting_reply_from: None,
            nonce: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrbNode {
    id: NodeId,
    params: ProtocolParams,
    neighbors: NeighborTable,
    seen: SeenTable,
    pending: BTreeMap<PacketId, PendingForward>,
    /// Who first handed us each packet (`None` at the source), with expiry.
    upstream: BTreeMap<PacketId, (Option<NodeId>, f64)>,
    next_nonce: u64,
}

impl GrbNode {
    pub fn new(id: NodeId, params: ProtocolParams) -> Self {
        GrbNode {
            id,
            params,
            neighbors: NeighborTable::new(),
            seen: SeenTable::default(),
            pending: BTreeMap::new(),
            upstream: BTreeMap::new(),
            next_nonce: 1,
        }
    }

    pub fn seen(&self) -> &SeenTable {
        &self.seen
    }

    pub fn seen_mut(&mut self) -> &mut SeenTable {
        &mut self.seen
    }

    pub fn pending(&self, id: PacketId) -> Option<&PendingForward> {
        self.pending.get(&id)
    }

    /// Next-hop candidate for `packet`: the destination itself when it is a
    /// neighbor, otherwise the eligible neighbor closest to the destination
    /// (ties to the smaller id). The pick may be farther from the
    /// destination than this node.
    pub fn select_candidate(
        &self,
        packet: &DataPacket,
        received_from: Option<NodeId>,
        tried: &BTreeSet<NodeId>,
    ) -> Option<NodeId> {
        if self.neighbors.contains(packet.dst) {
            return Some(packet.dst);
        }
        self.neighbors
            .iter()
            .filter(|e| {
                e.nbr_id != self.id
                    && Some(e.nbr_id) != received_from
                    && !tried.contains(&e.nbr_id)
                    && !self.seen.contains(e.nbr_id, packet.src, packet.dst)
            })
            .map(|e| (distance(e.position, packet.dst_position), e.nbr_id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    /// Answer a verification request from `from` for the (src, dst) flow.
    pub fn handle_verify_request(&self, src: NodeId, dst: NodeId, from: NodeId) -> bool {
        // The source has seen every packet of its own flows; accepting one
        // back would let the search re-enter a node already on its stack.
        self.id != src && !self.seen.seen_from_other(src, dst, from)
    }

    fn forward_attempt(&mut self, mut pending: PendingForward, out: &mut Vec<Action>) {
        let candidate = self.select_candidate(&pending.packet, pending.received_from, &pending.candidates_tried);
        match candidate {
            Some(next) if next == pending.packet.dst => {
                out.push(Action::data(next, pending.packet));
            }
            Some(next) => {
                pending.candidates_tried.insert(next);
                pending.awaiting_reply_from = Some(next);
                pending.nonce = self.next_nonce;
                self.next_nonce += 1;
                let id = pending.packet.id;
                out.push(Action::control(
                    next,
                    ControlPacket::VerifyRequest {
                        packet: id,
                        src: pending.packet.src,
                        dst: pending.packet.dst,
                    },
                ));
                out.push(Action::SetTimer {
                    delay: self.params.verification_timeout,
                    timer: Timer {
                        packet: id,
                        nonce: pending.nonce,
                    },
                });
                self.pending.insert(id, pending);
            }
            None if self.id == pending.packet.src => {
                let reason = if self.neighbors.is_empty() {
                    DropReason::NoNeighbor
                } else {
                    DropReason::Exhausted
                };
                out.push(Action::Drop {
                    packet: pending.packet,
                    reason,
                });
            }
            None => match pending.received_from {
                Some(back) => out.push(Action::control(back, ControlPacket::Backtrack(pending.packet))),
                None => out.push(Action::Drop {
                    packet: pending.packet,
                    reason: DropReason::Exhausted,
                }),
            },
        }
    }

    fn on_verify_reply(&mut self, packet: PacketId, valid: bool, from: NodeId, out: &mut Vec<Action>) {
        let Some(pending) = self.pending.get(&packet) else {
            return;
        };
        if pending.awaiting_reply_from != Some(from) {
            return;
        }
        let mut pending = self.pending.remove(&packet).expect("checked above");
        pending.awaiting_reply_from = None;
        // Another packet of the flow may have come back from `from` while
        // this handshake was in flight.
        let stale = self.seen.contains(from, pending.packet.src, pending.packet.dst);
        if valid && !stale {
            out.push(Action::data(from, pending.packet));
        } else {
            self.forward_attempt(pending, out);
        }
    }

    fn on_backtrack(&mut self, now: f64, mut packet: DataPacket, from: NodeId, out: &mut Vec<Action>) {
        self.seen
            .upsert(from, packet.src, packet.dst, true, now + self.params.seen_lifetime);
        packet.backtrack_count += 1;
        let received_from = self.upstream.get(&packet.id).and_then(|(up, _)| *up);
        if self.id == packet.src && packet.backtrack_count >= self.params.backtrack_threshold {
            out.push(Action::Drop {
                packet,
                reason: DropReason::BacktrackThreshold,
            });
            return;
        }
        self.pending.remove(&packet.id);
        self.forward_attempt(PendingForward::new(packet, received_from), out);
    }
}

impl Agent for GrbNode {
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
        self.seen.expire(now);
        self.upstream.retain(|_, (_, expires)| now <= *expires);
    }

    fn originate(&mut self, ctx: NodeCtx, packet: DataPacket, out: &mut Vec<Action>) {
        self.expire_tables(ctx.now);
        if self.neighbors.is_empty() {
            out.push(Action::Drop {
                packet,
                reason: DropReason::NoNeighbor,
            });
            return;
        }
        self.upstream
            .insert(packet.id, (None, ctx.now + self.params.seen_lifetime));
        self.forward_attempt(PendingForward::new(packet, None), out);
    }

    fn on_data(&mut self, ctx: NodeCtx, packet: DataPacket, from: NodeId, out: &mut Vec<Action>) {
        if packet.dst == self.id {
            out.push(Action::Deliver(packet));
            return;
        }
        self.expire_tables(ctx.now);
        let expires = ctx.now + self.params.seen_lifetime;
        self.seen.upsert(from, packet.src, packet.dst, false, expires);
        self.upstream.insert(packet.id, (Some(from), expires));
        self.pending.remove(&packet.id);
        self.forward_attempt(PendingForward::new(packet, Some(from)), out);
    }

    fn on_control(&mut self, ctx: NodeCtx, ctrl: ControlPacket, from: NodeId, out: &mut Vec<Action>) {
        match ctrl {
            ControlPacket::Hello(h) => self.neighbors.on_hello(&h, ctx.now),
            ControlPacket::VerifyRequest { packet, src, dst } => {
                self.expire_tables(ctx.now);
                let valid = self.handle_verify_request(src, dst, from);
                out.push(Action::control(
                    from,
                    ControlPacket::VerifyReply {
                        packet,
                        src,
                        dst,
                        valid,
                    },
                ));
            }
            ControlPacket::VerifyReply { packet, valid, .. } => {
                self.expire_tables(ctx.now);
                self.on_verify_reply(packet, valid, from, out);
            }
            ControlPacket::Backtrack(packet) => {
                self.expire_tables(ctx.now);
                self.on_backtrack(ctx.now, packet, from, out);
            }
        }
    }

    fn on_timer(&mut self, ctx: NodeCtx, timer: Timer, out: &mut Vec<Action>) {
        let live = self
            .pending
            .get(&timer.packet)
            .is_some_and(|p| p.nonce == timer.nonce && p.awaiting_reply_from.is_some());
        if !live {
            return;
        }
        self.expire_tables(ctx.now);
        let mut pending = self.pending.remove(&timer.packet).expect("checked above");
        pending.awaiting_reply_from = None;
        self.forward_attempt(pending, out);
    }
}
