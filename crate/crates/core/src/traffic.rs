//! CBR flow schedules and run metrics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::NodeId;
use crate::packet::{ControlKind, DataPacket, PacketId};
use crate::protocol::DropReason;

/// Interval between packets of a CBR flow, seconds.
pub const CBR_INTERVAL: f64 = 0.25;
/// Payload of every CBR packet, bytes.
pub const CBR_PAYLOAD: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrFlow {
    pub flow_id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub start: f64,
    pub end: f64,
    pub interval: f64,
    pub payload: u32,
}

impl CbrFlow {
    pub fn new(flow_id: u32, src: NodeId, dst: NodeId, start: f64, end: f64) -> Self {
        CbrFlow {
            flow_id,
            src,
            dst,
            start,
            end,
            interval: CBR_INTERVAL,
            payload: CBR_PAYLOAD,
        }
    }

    pub fn validate(&self, duration: f64) -> Result<()> {
        if self.src == self.dst {
            return Err(Error::param(
                "flow",
                format!("flow {} has identical endpoints {}", self.flow_id, self.src),
            ));
        }
        if !(self.start >= 0.0 && self.start < self.end && self.end <= duration) {
            return Err(Error::param(
                "flow",
                format!(
                    "flow {} needs 0 <= start < end <= {duration}, got [{}, {}]",
                    self.flow_id, self.start, self.end
                ),
            ));
        }
        if !(self.interval.is_finite() && self.interval > 0.0) {
            return Err(Error::param(
                "flow",
                format!("flow {} interval must be > 0", self.flow_id),
            ));
        }
        Ok(())
    }

    /// Packets this flow originates: one per interval, strictly before `end`.
    pub fn packet_count(&self) -> u32 {
        let span = (self.end - self.start) / self.interval;
        (span - 1e-9).ceil().max(0.0) as u32
    }

    pub fn bit_rate(&self) -> f64 {
        f64::from(self.payload) * 8.0 / self.interval
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Origination {
    pub time: f64,
    pub id: PacketId,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: u32,
}

/// All originations of `flows`, ordered by time then flow then sequence.
pub fn generate_cbr_schedule(flows: &[CbrFlow]) -> Result<Vec<Origination>> {
    let mut out = Vec::new();
    for flow in flows {
        if flow.src == flow.dst {
            return Err(Error::param(
                "flow",
                format!("flow {} has identical endpoints {}", flow.flow_id, flow.src),
            ));
        }
        for seq in 0..flow.packet_count() {
            out.push(Origination {
                time: flow.start + f64::from(seq) * flow.interval,
                id: PacketId {
                    flow: flow.flow_id,
                    seq,
                },
                src: flow.src,
                dst: flow.dst,
                payload: flow.payload,
            });
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.id.cmp(&b.id)));
    Ok(out)
}

/// Draw `count` flows between distinct random endpoints. Flow lengths
/// split `packets_total` as evenly as possible; each start time is uniform
/// over the slots that keep the flow inside `[warmup, duration]`.
pub fn random_flows<R: Rng>(
    node_count: usize,
    count: usize,
    packets_total: u32,
    warmup: f64,
    duration: f64,
    rng: &mut R,
) -> Result<Vec<CbrFlow>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if node_count < 2 {
        return Err(Error::param("flows", "random flows need at least two nodes"));
    }
    let base = packets_total / count as u32;
    let extra = packets_total % count as u32;
    let ids: Vec<u32> = (0..node_count as u32).collect();
    let mut flows = Vec::with_capacity(count);
    for i in 0..count {
        let packets = base + u32::from((i as u32) < extra);
        let length = f64::from(packets) * CBR_INTERVAL;
        let latest = duration - length;
        if latest < warmup {
            return Err(Error::param(
                "packets_total",
                format!("a flow of {packets} packets does not fit in the run"),
            ));
        }
        let start = rng.gen_range(warmup..=latest);
        let pair: Vec<u32> = ids.choose_multiple(rng, 2).copied().collect();
        flows.push(CbrFlow::new(
            i as u32,
            NodeId(pair[0]),
            NodeId(pair[1]),
            start,
            start + length,
        ));
    }
    Ok(flows)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Delivered {
        at: f64,
        hops: u32,
        path: Vec<NodeId>,
        final_path: Vec<NodeId>,
    },
    Dropped {
        reason: DropReason,
        transmissions: u32,
    },
    InFlight,
}

/// Raw per-packet record collected during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: PacketId,
    pub src: NodeId,
    pub dst: NodeId,
    pub sent_at: f64,
    pub outcome: Outcome,
}

impl PacketRecord {
    pub fn delay(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Delivered { at, .. } => Some(at - self.sent_at),
            _ => None,
        }
    }

    pub fn hops(&self) -> Option<u32> {
        match self.outcome {
            Outcome::Delivered { hops, .. } => Some(hops),
            _ => None,
        }
    }

    /// Data plus backtrack frames the packet used, whatever became of it.
    pub fn transmissions(&self) -> Option<u32> {
        match self.outcome {
            Outcome::Delivered { hops, .. } => Some(hops),
            Outcome::Dropped { transmissions, .. } => Some(transmissions),
            Outcome::InFlight => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControlCounts {
    pub hello: u64,
    pub verify_req: u64,
    pub verify_reply: u64,
    pub backtrack: u64,
}

impl ControlCounts {
    pub fn record(&mut self, kind: ControlKind) {
        match kind {
            ControlKind::Hello => self.hello += 1,
            ControlKind::VerifyRequest => self.verify_req += 1,
            ControlKind::VerifyReply => self.verify_reply += 1,
            ControlKind::Backtrack => self.backtrack += 1,
        }
    }

    pub fn non_hello(&self) -> u64 {
        self.verify_req + self.verify_reply + self.backtrack
    }
}

/// Accumulates raw records while the engine runs.
#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    records: BTreeMap<PacketId, PacketRecord>,
    control: ControlCounts,
    duplicate_outcomes: u64,
    outstanding: usize,
}

impl MetricsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sent(&mut self, packet: &DataPacket, at: f64) {
        self.outstanding += 1;
        self.records.insert(
            packet.id,
            PacketRecord {
                id: packet.id,
                src: packet.src,
                dst: packet.dst,
                sent_at: at,
                outcome: Outcome::InFlight,
            },
        );
    }

    fn resolve(&mut self, id: PacketId, outcome: Outcome) {
        match self.records.get_mut(&id) {
            Some(rec) if rec.outcome == Outcome::InFlight => {
                rec.outcome = outcome;
                self.outstanding -= 1;
            }
            _ => self.duplicate_outcomes += 1,
        }
    }

    pub fn delivered(&mut self, packet: &DataPacket, at: f64) {
        let outcome = Outcome::Delivered {
            at,
            hops: packet.transmissions,
            path: packet.trace.clone(),
            final_path: packet.final_path(),
        };
        self.resolve(packet.id, outcome);
    }

    pub fn dropped(&mut self, packet: &DataPacket, reason: DropReason) {
        self.resolve(
            packet.id,
            Outcome::Dropped {
                reason,
                transmissions: packet.transmissions,
            },
        );
    }

    pub fn control(&mut self, kind: ControlKind) {
        self.control.record(kind);
    }

    /// Packets neither delivered nor dropped yet.
    pub fn outstanding(&self) -> usize {
        self.outstanding
    }

    pub fn into_records(self) -> (Vec<PacketRecord>, ControlCounts, u64) {
        (
            self.records.into_values().collect(),
            self.control,
            self.duplicate_outcomes,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowStats {
    pub sent: u64,
    pub delivered: u64,
    pub in_flight: u64,
    pub drops: BTreeMap<DropReason, u64>,
    pub delays: Vec<f64>,
    pub hops: Vec<u32>,
}

impl FlowStats {
    pub fn pdr(&self) -> f64 {
        ratio(self.delivered, self.sent)
    }

    pub fn total_drops(&self) -> u64 {
        self.drops.values().sum()
    }

    pub fn mean_delay(&self) -> Option<f64> {
        mean(&self.delays)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub flows: BTreeMap<u32, FlowStats>,
    pub control: ControlCounts,
    pub packets: Vec<PacketRecord>,
    /// Outcomes reported for packets already resolved; nonzero means a
    /// protocol duplicated a packet.
    pub duplicate_outcomes: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Fold raw per-packet records into per-flow and aggregate statistics.
pub fn summarize(records: Vec<PacketRecord>, control: ControlCounts, duplicate_outcomes: u64) -> RunMetrics {
    let mut flows: BTreeMap<u32, FlowStats> = BTreeMap::new();
    for rec in &records {
        let stats = flows.entry(rec.id.flow).or_default();
        stats.sent += 1;
        match &rec.outcome {
            Outcome::Delivered { at, hops, .. } => {
                stats.delivered += 1;
                stats.delays.push(at - rec.sent_at);
                stats.hops.push(*hops);
            }
            Outcome::Dropped { reason, .. } => *stats.drops.entry(*reason).or_default() += 1,
            Outcome::InFlight => stats.in_flight += 1,
        }
    }
    RunMetrics {
        flows,
        control,
        packets: records,
        duplicate_outcomes,
    }
}

impl RunMetrics {
    pub fn sent(&self) -> u64 {
        self.flows.values().map(|f| f.sent).sum()
    }

    pub fn delivered(&self) -> u64 {
        self.flows.values().map(|f| f.delivered).sum()
    }

    pub fn in_flight(&self) -> u64 {
        self.flows.values().map(|f| f.in_flight).sum()
    }

    pub fn drops(&self, reason: DropReason) -> u64 {
        self.flows.values().filter_map(|f| f.drops.get(&reason)).sum()
    }

    pub fn total_drops(&self) -> u64 {
        self.flows.values().map(FlowStats::total_drops).sum()
    }

    pub fn pdr(&self) -> f64 {
        ratio(self.delivered(), self.sent())
    }

    /// Mean over flows of each flow's mean delay; flows with no deliveries
    /// are left out.
    pub fn avg_delay(&self) -> Option<f64> {
        let per_flow: Vec<f64> = self.flows.values().filter_map(FlowStats::mean_delay).collect();
        mean(&per_flow)
    }

    /// Mean hop count over every delivered packet of every flow.
    pub fn avg_hop_count(&self) -> Option<f64> {
        let hops: Vec<f64> = self
            .flows
            .values()
            .flat_map(|f| f.hops.iter().map(|&h| f64::from(h)))
            .collect();
        mean(&hops)
    }

    /// sent = delivered + drops + in-flight, with no packet resolved twice.
    pub fn conservation_holds(&self) -> bool {
        self.duplicate_outcomes == 0
            && self
                .flows
                .values()
                .all(|f| f.sent == f.delivered + f.total_drops() + f.in_flight)
    }

    pub fn flow_packets(&self, flow: u32) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter().filter(move |p| p.id.flow == flow)
    }
}
