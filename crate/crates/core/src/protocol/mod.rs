//! Per-node routing agents and the machinery they share: the HELLO-driven
//! neighbor table, protocol parameters, and the action interface through
//! which an agent talks to the engine.

pub mod baseline;
pub mod grb;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{NodeId, Position};
use crate::packet::{ControlPacket, DataPacket, Hello, PacketId, Payload};

pub use baseline::{GpsrNode, GreedyNode};
pub use grb::GrbNode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// HELLO period `T`.
    pub hello_interval: f64,
    /// HELLO jitter `R`; each period is drawn from `[T - R, T + R]`.
    pub hello_jitter: f64,
    pub seen_lifetime: f64,
    /// Backtracks tolerated at the source; `u32::MAX` disables the check.
    pub backtrack_threshold: u32,
    pub verification_timeout: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            hello_interval: 1.0,
            hello_jitter: 0.25,
            seen_lifetime: 5.0,
            backtrack_threshold: 10,
            verification_timeout: 0.008,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let t = self.hello_interval;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param("hello_interval", format!("must be > 0, got {t}")));
        }
        let r = self.hello_jitter;
        if !(r >= 0.0 && r < t) {
            return Err(Error::param(
                "hello_jitter",
                format!("must satisfy 0 <= R < T, got R={r}, T={t}"),
            ));
        }
        if self.seen_lifetime.is_nan() || self.seen_lifetime <= 0.0 {
            return Err(Error::param("seen_lifetime", "must be > 0"));
        }
        if self.backtrack_threshold < 1 {
            return Err(Error::param("backtrack_threshold", "must be >= 1"));
        }
        if !(self.verification_timeout.is_finite() && self.verification_timeout > 0.0) {
            return Err(Error::param("verification_timeout", "must be > 0"));
        }
        Ok(())
    }

    /// Silence after which a neighbor is forgotten (`2T`).
    pub fn neighbor_expiry(&self) -> f64 {
        2.0 * self.hello_interval
    }
}

/// Build this node's HELLO and draw the time of the next one.
pub fn emit_hello<R: Rng>(
    node: NodeId,
    position: Position,
    now: f64,
    params: &ProtocolParams,
    rng: &mut R,
) -> (Hello, f64) {
    let t = params.hello_interval;
    let r = params.hello_jitter;
    let next = if r == 0.0 {
        now + t
    } else {
        now + rng.gen_range((t - r)..=(t + r))
    };
    (Hello { node, position }, next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub nbr_id: NodeId,
    pub position: Position,
    pub last_heard: f64,
}

#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborEntry>,
}

impl NeighborTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_hello(&mut self, hello: &Hello, now: f64) {
        self.entries.insert(
            hello.node,
            NeighborEntry {
                nbr_id: hello.node,
                position: hello.position,
                last_heard: now,
            },
        );
    }

    /// Drop entries silent for strictly longer than `expiry`.
    pub fn expire(&mut self, now: f64, expiry: f64) {
        self.entries.retain(|_, e| now - e.last_heard <= expiry);
    }

    pub fn get(&self, id: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    /// Source had an empty neighbor table.
    NoNeighbor,
    /// Every candidate next hop was tried or disqualified.
    Exhausted,
    /// Backtrack count reached the source threshold.
    BacktrackThreshold,
    /// Pure greedy found no neighbor closer to the destination.
    GreedyVoid,
    /// Hop budget of the GPSR-style baseline ran out.
    TtlExpired,
    /// Perimeter traversal came back to its first edge.
    PerimeterLoop,
    /// A frame carrying the packet never reached its next hop.
    LinkLoss,
}

impl DropReason {
    pub const ALL: [DropReason; 7] = [
        DropReason::NoNeighbor,
        DropReason::Exhausted,
        DropReason::BacktrackThreshold,
        DropReason::GreedyVoid,
        DropReason::TtlExpired,
        DropReason::PerimeterLoop,
        DropReason::LinkLoss,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::NoNeighbor => "no neighbors",
            DropReason::Exhausted => "identified as invalid next hops",
            DropReason::BacktrackThreshold => "backtrack threshold",
            DropReason::GreedyVoid => "greedy void",
            DropReason::TtlExpired => "ttl expired",
            DropReason::PerimeterLoop => "perimeter loop",
            DropReason::LinkLoss => "link loss",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Handle for a verification timeout. A stale `nonce` means the wait it
/// guarded has already ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timer {
    pub packet: PacketId,
    pub nonce: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Send { to: NodeId, body: Payload },
    SetTimer { delay: f64, timer: Timer },
    Deliver(DataPacket),
    Drop { packet: DataPacket, reason: DropReason },
}

impl Action {
    pub(crate) fn data(to: NodeId, packet: DataPacket) -> Self {
        Action::Send {
            to,
            body: Payload::Data(packet),
        }
    }

    pub(crate) fn control(to: NodeId, ctrl: ControlPacket) -> Self {
        Action::Send {
            to,
            body: Payload::Control(ctrl),
        }
    }
}

/// What the engine tells a handler about the node's own situation.
#[derive(Debug, Clone, Copy)]
pub struct NodeCtx {
    pub now: f64,
    pub position: Position,
}

/// A routing protocol instance running on one node.
pub trait Agent {
    fn id(&self) -> NodeId;

    fn neighbors(&self) -> &NeighborTable;

    fn neighbors_mut(&mut self) -> &mut NeighborTable;

    fn expire_tables(&mut self, now: f64);

    fn originate(&mut self, ctx: NodeCtx, packet: DataPacket, out: &mut Vec<Action>);

    fn on_data(&mut self, ctx: NodeCtx, packet: DataPacket, from: NodeId, out: &mut Vec<Action>);

    fn on_control(&mut self, ctx: NodeCtx, ctrl: ControlPacket, from: NodeId, out: &mut Vec<Action>);

    fn on_timer(&mut self, _ctx: NodeCtx, _timer: Timer, _out: &mut Vec<Action>) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Grb,
    Greedy,
    GpsrLite,
}

impl ProtocolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Grb => "grb",
            ProtocolKind::Greedy => "greedy",
            ProtocolKind::GpsrLite => "gpsr-lite",
        }
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grb" => Ok(ProtocolKind::Grb),
            "greedy" => Ok(ProtocolKind::Greedy),
            "gpsr-lite" | "gpsr" => Ok(ProtocolKind::GpsrLite),
            other => Err(Error::param(
                "protocol",
                format!("expected grb, greedy or gpsr-lite, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
