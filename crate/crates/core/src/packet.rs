//! Frames exchanged over the simulated radio.

use std::fmt;

use crate::geometry::{NodeId, Position};
use crate::protocol::baseline::GpsrPacketState;

/// Identifies one data packet: its flow and per-flow sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId {
    pub flow: u32,
    pub seq: u32,
}

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.flow, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub id: PacketId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Destination position handed out by the location oracle at origination.
    pub dst_position: Position,
    pub backtrack_count: u32,
    pub payload_size: u32,
    pub origin_time: f64,
    /// Data and backtrack frames sent while carrying this packet.
    pub transmissions: u32,
    /// Every node that has held the packet, in order, starting at the source.
    pub trace: Vec<NodeId>,
    /// Header used only by the GPSR-style baseline.
    pub gpsr: Option<GpsrPacketState>,
}

impl DataPacket {
    pub fn new(
        id: PacketId,
        src: NodeId,
        dst: NodeId,
        dst_position: Position,
        payload_size: u32,
        origin_time: f64,
    ) -> Self {
        DataPacket {
            id,
            src,
            dst,
            dst_position,
            backtrack_count: 0,
            payload_size,
            origin_time,
            transmissions: 0,
            trace: vec![src],
            gpsr: None,
        }
    }

    /// The walk in `trace` with every backtracked detour removed.
    pub fn final_path(&self) -> Vec<NodeId> {
        let mut stack: Vec<NodeId> = Vec::with_capacity(self.trace.len());
        for &node in &self.trace {
            if stack.len() >= 2 && stack[stack.len() - 2] == node {
                stack.pop();
            } else {
                stack.push(node);
            }
        }
        stack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hello {
    pub node: NodeId,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlPacket {
    Hello(Hello),
    VerifyRequest {
        packet: PacketId,
        src: NodeId,
        dst: NodeId,
    },
    VerifyReply {
        packet: PacketId,
        src: NodeId,
        dst: NodeId,
        valid: bool,
    },
    Backtrack(DataPacket),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlKind {
    Hello,
    VerifyRequest,
    VerifyReply,
    Backtrack,
}

impl ControlPacket {
    pub fn kind(&self) -> ControlKind {
        match self {
            ControlPacket::Hello(_) => ControlKind::Hello,
            ControlPacket::VerifyRequest { .. } => ControlKind::VerifyRequest,
            ControlPacket::VerifyReply { .. } => ControlKind::VerifyReply,
            ControlPacket::Backtrack(_) => ControlKind::Backtrack,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Data(DataPacket),
    Control(ControlPacket),
}

impl Payload {
    /// The data packet carried by this frame, if any (data or backtrack).
    pub fn carried(&self) -> Option<&DataPacket> {
        match self {
            Payload::Data(p) | Payload::Control(ControlPacket::Backtrack(p)) => Some(p),
            Payload::Control(_) => None,
        }
    }

    pub fn carried_mut(&mut self) -> Option<&mut DataPacket> {
        match self {
            Payload::Data(p) | Payload::Control(ControlPacket::Backtrack(p)) => Some(p),
            Payload::Control(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Payload::Data(_) => "data",
            Payload::Control(c) => match c.kind() {
                ControlKind::Hello => "hello",
                ControlKind::VerifyRequest => "vreq",
                ControlKind::VerifyReply => "vrep",
                ControlKind::Backtrack => "backtrack",
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Unicast(NodeId),
    Broadcast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub src: NodeId,
    pub dst: Destination,
    pub body: Payload,
}
