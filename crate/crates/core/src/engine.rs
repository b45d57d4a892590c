//! Deterministic discrete-event scheduler and abstract radio.
//!
//! Events are ordered by `(time, sequence)`; the sequence number is the
//! insertion order, so simultaneous events run first-come first-served.
//! Node positions are evaluated lazily from each node's waypoint state at
//! the time an event needs them.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{distance, NodeId, NodePair, Position};
use crate::mobility::{MobilityParams, WaypointState};
use crate::packet::{ControlPacket, DataPacket, Destination, Frame, Payload};
use crate::protocol::{emit_hello, Action, Agent, DropReason, NodeCtx, ProtocolParams, Timer};
use crate::rng::{substream, Stream};
use crate::traffic::{summarize, MetricsCollector, Origination, RunMetrics};

#[derive(Debug, Clone, PartialEq)]
pub struct RadioModel {
    pub range: f64,
    pub per_hop_latency: f64,
    pub loss_probability: f64,
    pub blocked: BTreeSet<NodePair>,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            range: 250.0,
            per_hop_latency: 0.002,
            loss_probability: 0.0,
            blocked: BTreeSet::new(),
        }
    }
}

impl RadioModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(Error::param("range", "must be > 0"));
        }
        if !(self.per_hop_latency.is_finite() && self.per_hop_latency > 0.0) {
            return Err(Error::param("per_hop_latency", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(Error::param("loss_probability", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    FrameDelivery { to: NodeId, frame: Frame },
    HelloTimer { node: NodeId },
    TableExpiryScan { node: NodeId },
    TrafficOrigination(Origination),
    VerificationTimeout { node: NodeId, timer: Timer },
}

impl EventKind {
    fn label(&self) -> &'static str {
        match self {
            EventKind::FrameDelivery { .. } => "rx",
            EventKind::HelloTimer { .. } => "hello-timer",
            EventKind::TableExpiryScan { .. } => "expiry-scan",
            EventKind::TrafficOrigination(_) => "originate",
            EventKind::VerificationTimeout { .. } => "verify-timeout",
        }
    }

    fn node(&self) -> NodeId {
        match self {
            EventKind::FrameDelivery { to, .. } => *to,
            EventKind::HelloTimer { node }
            | EventKind::TableExpiryScan { node }
            | EventKind::VerificationTimeout { node, .. } => *node,
            EventKind::TrafficOrigination(o) => o.src,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

struct SimNode<A> {
    agent: A,
    motion: WaypointState,
    hello_rng: ChaCha8Rng,
}

pub struct Simulation<A: Agent> {
    clock: f64,
    next_sequence: u64,
    queue: BinaryHeap<Event>,
    nodes: Vec<SimNode<A>>,
    mobility: MobilityParams,
    radio: RadioModel,
    params: ProtocolParams,
    loss_rng: ChaCha8Rng,
    metrics: MetricsCollector,
    pending_originations: usize,
    stop_when_idle: bool,
    trace: Option<String>,
    dispatched: u64,
}

impl<A: Agent> Simulation<A> {
    /// `agents[i]` and `motions[i]` belong to node `i`.
    pub fn new(
        agents: Vec<A>,
        motions: Vec<WaypointState>,
        mobility: MobilityParams,
        radio: RadioModel,
        params: ProtocolParams,
        seed: u64,
    ) -> Result<Self> {
        radio.validate()?;
        params.validate()?;
        if agents.len() != motions.len() {
            return Err(Error::Topology(format!(
                "{} agents but {} trajectories",
                agents.len(),
                motions.len()
            )));
        }
        if let Some((i, a)) = agents.iter().enumerate().find(|(i, a)| a.id() != NodeId(*i as u32)) {
            return Err(Error::Topology(format!("agent at index {i} has id {}", a.id())));
        }
        let nodes = agents
            .into_iter()
            .zip(motions)
            .enumerate()
            .map(|(i, (agent, motion))| SimNode {
                agent,
                motion,
                hello_rng: substream(seed, Stream::Hello(i as u32)),
            })
            .collect();
        Ok(Simulation {
            clock: 0.0,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            nodes,
            mobility,
            radio,
            params,
            loss_rng: substream(seed, Stream::Loss),
            metrics: MetricsCollector::new(),
            pending_originations: 0,
            stop_when_idle: false,
            trace: None,
            dispatched: 0,
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn agent(&self, id: NodeId) -> &A {
        &self.nodes[id.0 as usize].agent
    }

    pub fn agent_mut(&mut self, id: NodeId) -> &mut A {
        &mut self.nodes[id.0 as usize].agent
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Record one line per dispatched event.
    pub fn enable_trace(&mut self) {
        self.trace = Some(String::new());
    }

    pub fn trace(&self) -> Option<&str> {
        self.trace.as_deref()
    }

    /// Stop `run_until` as soon as every scheduled packet has been
    /// originated and resolved.
    pub fn stop_when_traffic_done(&mut self, yes: bool) {
        self.stop_when_idle = yes;
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) -> Result<()> {
        if time < self.clock || time.is_nan() {
            return Err(Error::EventInPast {
                at: time,
                clock: self.clock,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Event { time, sequence, kind });
        Ok(())
    }

    /// Schedule each node's first HELLO at a uniform offset in `[0, T)` and
    /// its periodic table scan.
    pub fn start_beacons(&mut self) -> Result<()> {
        let t = self.params.hello_interval;
        for i in 0..self.nodes.len() {
            let offset = self.nodes[i].hello_rng.gen::<f64>() * t;
            let node = NodeId(i as u32);
            self.schedule(self.clock + offset, EventKind::HelloTimer { node })?;
            self.schedule(self.clock + offset + t, EventKind::TableExpiryScan { node })?;
        }
        Ok(())
    }

    pub fn schedule_traffic(&mut self, schedule: impl IntoIterator<Item = Origination>) -> Result<()> {
        for o in schedule {
            for id in [o.src, o.dst] {
                if id.0 as usize >= self.nodes.len() {
                    return Err(Error::UnknownNode(id));
                }
            }
            self.schedule(o.time, EventKind::TrafficOrigination(o))?;
            self.pending_originations += 1;
        }
        Ok(())
    }

    /// Position of `node` at time `at` (never earlier than its last query).
    pub fn position(&mut self, node: NodeId, at: f64) -> Position {
        let mobility = self.mobility;
        self.nodes[node.0 as usize].motion.advance(&mobility, at)
    }

    fn in_range(&mut self, a: NodeId, b: NodeId, at: f64) -> bool {
        if a == b || self.radio.blocked.contains(&NodePair::new(a, b)) {
            return false;
        }
        let pa = self.position(a, at);
        let pb = self.position(b, at);
        distance(pa, pb) <= self.radio.range
    }

    fn survives_loss(&mut self) -> bool {
        let p = self.radio.loss_probability;
        p == 0.0 || self.loss_rng.gen::<f64>() >= p
    }

    /// Put `frame` on the air at time `at`. Unicast frames to a receiver out
    /// of range, behind a blocked pair, or hit by the loss draw vanish.
    pub fn transmit(&mut self, frame: Frame, at: f64) -> Result<()> {
        let arrive = at + self.radio.per_hop_latency;
        match frame.dst {
            Destination::Unicast(to) => {
                if self.in_range(frame.src, to, at) && self.survives_loss() {
                    self.schedule(arrive, EventKind::FrameDelivery { to, frame })?;
                } else if let Some(p) = frame.body.carried() {
                    self.metrics.dropped(p, DropReason::LinkLoss);
                }
            }
            Destination::Broadcast => {
                for i in 0..self.nodes.len() {
                    let to = NodeId(i as u32);
                    if self.in_range(frame.src, to, at) && self.survives_loss() {
                        self.schedule(
                            arrive,
                            EventKind::FrameDelivery {
                                to,
                                frame: frame.clone(),
                            },
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    fn traffic_done(&self) -> bool {
        self.pending_originations == 0 && self.metrics.outstanding() == 0
    }

    /// Dispatch events in order until the queue empties or the next event
    /// lies beyond `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        if t_end < self.clock {
            return Err(Error::EventInPast {
                at: t_end,
                clock: self.clock,
            });
        }
        while let Some(head) = self.queue.peek() {
            if head.time > t_end {
                break;
            }
            let ev = self.queue.pop().expect("peeked");
            if ev.time < self.clock {
                return Err(Error::EventInPast {
                    at: ev.time,
                    clock: self.clock,
                });
            }
            self.clock = ev.time;
            self.dispatch(ev)?;
            if self.stop_when_idle && self.traffic_done() {
                return Ok(());
            }
        }
        self.clock = t_end;
        Ok(())
    }

    fn log(&mut self, ev: &Event) {
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        let _ = write!(trace, "{:.6} {} {}", ev.time, ev.kind.node(), ev.kind.label());
        match &ev.kind {
            EventKind::FrameDelivery { frame, .. } => {
                let _ = write!(trace, " {} from={}", frame.body.label(), frame.src);
                match &frame.body {
                    Payload::Control(ControlPacket::VerifyRequest { packet, .. }) => {
                        let _ = write!(trace, " pkt={packet}");
                    }
                    Payload::Control(ControlPacket::VerifyReply { packet, valid, .. }) => {
                        let _ = write!(trace, " pkt={packet} valid={valid}");
                    }
                    body => {
                        if let Some(p) = body.carried() {
                            let _ = write!(trace, " pkt={} bt={}", p.id, p.backtrack_count);
                        }
                    }
                }
            }
            EventKind::TrafficOrigination(o) => {
                let _ = write!(trace, " pkt={}", o.id);
            }
            EventKind::VerificationTimeout { timer, .. } => {
                let _ = write!(trace, " pkt={}", timer.packet);
            }
            _ => {}
        }
        trace.push('\n');
    }

    fn ctx(&mut self, node: NodeId) -> NodeCtx {
        let now = self.clock;
        NodeCtx {
            now,
            position: self.position(node, now),
        }
    }

    fn dispatch(&mut self, ev: Event) -> Result<()> {
        self.dispatched += 1;
        self.log(&ev);
        let now = self.clock;
        let mut out = Vec::new();
        let node = ev.kind.node();
        match ev.kind {
            EventKind::FrameDelivery { to, mut frame } => {
                if let Some(p) = frame.body.carried_mut() {
                    p.trace.push(to);
                }
                let ctx = self.ctx(to);
                let agent = &mut self.nodes[to.0 as usize].agent;
                match frame.body {
                    Payload::Data(p) => agent.on_data(ctx, p, frame.src, &mut out),
                    Payload::Control(c) => agent.on_control(ctx, c, frame.src, &mut out),
                }
            }
            EventKind::HelloTimer { node } => {
                let position = self.position(node, now);
                let params = self.params;
                let (hello, next) =
                    emit_hello(node, position, now, &params, &mut self.nodes[node.0 as usize].hello_rng);
                self.metrics.control(crate::packet::ControlKind::Hello);
                self.transmit(
                    Frame {
                        src: node,
                        dst: Destination::Broadcast,
                        body: Payload::Control(ControlPacket::Hello(hello)),
                    },
                    now,
                )?;
                self.schedule(next, EventKind::HelloTimer { node })?;
            }
            EventKind::TableExpiryScan { node } => {
                self.nodes[node.0 as usize].agent.expire_tables(now);
                self.schedule(now + self.params.hello_interval, EventKind::TableExpiryScan { node })?;
            }
            EventKind::TrafficOrigination(o) => {
                self.pending_originations -= 1;
                let dst_position = self.position(o.dst, now);
                let packet = DataPacket::new(o.id, o.src, o.dst, dst_position, o.payload, now);
                self.metrics.sent(&packet, now);
                let ctx = self.ctx(o.src);
                self.nodes[o.src.0 as usize].agent.originate(ctx, packet, &mut out);
            }
            EventKind::VerificationTimeout { node, timer } => {
                let ctx = self.ctx(node);
                self.nodes[node.0 as usize].agent.on_timer(ctx, timer, &mut out);
            }
        }
        self.apply(node, out)
    }

    fn apply(&mut self, node: NodeId, actions: Vec<Action>) -> Result<()> {
        let now = self.clock;
        for action in actions {
            match action {
                Action::Send { to, mut body } => {
                    if let Payload::Control(c) = &body {
                        self.metrics.control(c.kind());
                    }
                    if let Some(p) = body.carried_mut() {
                        p.transmissions += 1;
                    }
                    self.transmit(
                        Frame {
                            src: node,
                            dst: Destination::Unicast(to),
                            body,
                        },
                        now,
                    )?;
                }
                Action::SetTimer { delay, timer } => {
                    self.schedule(now + delay, EventKind::VerificationTimeout { node, timer })?;
                }
                Action::Deliver(p) => self.metrics.delivered(&p, now),
                Action::Drop { packet, reason } => self.metrics.dropped(&packet, reason),
            }
        }
        Ok(())
    }

    /// Close the run: unresolved packets count as in flight.
    pub fn finish(self) -> RunMetrics {
        let (records, control, dup) = self.metrics.into_records();
        summarize(records, control, dup)
    }
}
