//! Deterministic discrete-event network simulation.
//!
//! Links are FIFO with one uniform latency. Events run in `(time, seq)`
//! order where `seq` is assigned at enqueue, so a run depends only on the
//! topology, the node configuration, the file and the seed. Eavesdroppers
//! have no protocol state: deliveries to them are logged and never answered.

mod topology;
mod trace;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

pub use topology::{NodeInfo, Role, Topology, DEFAULT_LATENCY_MS};
pub use trace::{read_jsonl, NodeSnapshot, Trace, TraceEvent, TraceLine, TRACE_CID_PREFIX_BYTES};

use crate::content::{chunk_content, reassemble, Cid};
use crate::error::SimError;
use crate::message::BitswapMessage;
use crate::node::{NodeConfig, NodeState, PeerId, Ticket, TimedSend};
use crate::Millis;

pub const DEFAULT_MAX_TIME_MS: Millis = 60_000;
pub const DEFAULT_BLOCK_SIZE: usize = 256 * 1024;

/// Stand-in for a DHT provider search: once every honest neighbor of the
/// leech has declined the root cid, the leech learns the seed's address
/// after `delay_ms` and dials it directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProviderLookup {
    pub delay_ms: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Applied to every honest node.
    pub node_config: NodeConfig,
    pub seed: u64,
    pub max_time_ms: Millis,
    pub block_size: usize,
    pub provider_lookup: Option<ProviderLookup>,
}

impl SimConfig {
    pub fn new(node_config: NodeConfig, seed: u64) -> Self {
        SimConfig {
            node_config,
            seed,
            max_time_ms: DEFAULT_MAX_TIME_MS,
            block_size: DEFAULT_BLOCK_SIZE,
            provider_lookup: None,
        }
    }
}

#[derive(Debug)]
enum EventKind {
    Deliver {
        from: PeerId,
        to: PeerId,
        sent_at: Millis,
        message: BitswapMessage,
    },
    Release {
        node: PeerId,
        ticket: Ticket,
    },
    Sweep {
        node: PeerId,
    },
    LookupDone,
}

#[derive(Debug)]
struct Event {
    time: Millis,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Event queue keyed by `(time, seq)`.
#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    /// Events other than periodic sweeps.
    active: usize,
}

impl EventQueue {
    fn push(&mut self, time: Millis, kind: EventKind) {
        if !matches!(kind, EventKind::Sweep { .. }) {
            self.active += 1;
        }
        self.heap.push(Event {
            time,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        if !matches!(ev.kind, EventKind::Sweep { .. }) {
            self.active -= 1;
        }
        Some(ev)
    }
}

struct Simulation<'a> {
    topo: Topology,
    cfg: &'a SimConfig,
    nodes: BTreeMap<PeerId, NodeState>,
    queue: EventQueue,
    leech: PeerId,
    seed: PeerId,
    cids: Vec<Cid>,
    events: Vec<crate::simnet::TraceEvent>,
    last_delivery: BTreeMap<(PeerId, PeerId), (Millis, Millis)>,
    lookup_scheduled: bool,
    lookup_at: Option<Millis>,
    messages_total: usize,
    now: Millis,
}

impl Simulation<'_> {
    fn enqueue(&mut self, from: PeerId, sends: Vec<TimedSend>) -> Result<(), SimError> {
        for send in sends {
            debug_assert!(send.at >= self.now, "send scheduled in the past");
            match send.ticket {
                Some(ticket) => self
                    .queue
                    .push(send.at, EventKind::Release { node: from, ticket }),
                None => {
                    if !self.topo.has_edge(from, send.to) {
                        return Err(SimError::NotAnEdge { from, to: send.to });
                    }
                    self.queue.push(
                        send.at + self.topo.latency_ms(),
                        EventKind::Deliver {
                            from,
                            to: send.to,
                            sent_at: send.at,
                            message: send.message,
                        },
                    );
                }
            }
        }
        Ok(())
    }

    fn node(&mut self, id: PeerId) -> Result<&mut NodeState, SimError> {
        self.nodes.get_mut(&id).ok_or(SimError::UnknownNode(id))
    }

    fn leech_done(&self) -> bool {
        self.nodes[&self.leech]
            .sessions()
            .first()
            .is_some_and(|s| s.completed_at.is_some())
    }

    fn deliver(
        &mut self,
        from: PeerId,
        to: PeerId,
        sent_at: Millis,
        message: BitswapMessage,
    ) -> Result<(), SimError> {
        if !self.topo.has_edge(from, to) {
            return Err(SimError::NotAnEdge { from, to });
        }
        let key = (from, to);
        if let Some(&(prev_sent, prev_time)) = self.last_delivery.get(&key) {
            if sent_at < prev_sent || self.now < prev_time {
                return Err(SimError::FifoViolation { from, to });
            }
        }
        self.last_delivery.insert(key, (sent_at, self.now));
        self.messages_total += 1;
        for (kind, cid) in message.parts() {
            self.events.push(TraceEvent {
                time: self.now,
                sent_at,
                from,
                to,
                kind,
                cid,
            });
        }
        if self.topo.role(to) == Some(Role::Eavesdropper) {
            return Ok(());
        }
        let now = self.now;
        let out = self.node(to)?.handle_message(from, &message, now)?;
        self.enqueue(to, out)?;
        if to == self.leech {
            self.maybe_start_lookup();
        }
        Ok(())
    }

    fn maybe_start_lookup(&mut self) {
        let Some(lookup) = self.cfg.provider_lookup else {
            return;
        };
        if self.lookup_scheduled || self.leech_done() || self.topo.has_edge(self.leech, self.seed) {
            return;
        }
        let leech = &self.nodes[&self.leech];
        let root = self.cids[0];
        let Some(declined) = leech.dont_haves(&root) else {
            return;
        };
        let all_declined = leech
            .neighbors()
            .iter()
            .filter(|p| self.topo.role(**p).is_some_and(Role::is_honest))
            .all(|p| declined.contains(p));
        if all_declined {
            self.lookup_scheduled = true;
            self.queue
                .push(self.now + lookup.delay_ms, EventKind::LookupDone);
        }
    }

    fn connect_provider(&mut self) -> Result<(), SimError> {
        let (leech, seed, now) = (self.leech, self.seed, self.now);
        self.topo.add_edge(leech, seed)?;
        self.lookup_at = Some(now);
        let out = self.node(leech)?.add_peer(seed, now)?;
        self.enqueue(leech, out)?;
        let out = self.node(seed)?.add_peer(leech, now)?;
        self.enqueue(seed, out)
    }

    fn sweep_all(&mut self) -> Result<(), SimError> {
        let ids: Vec<PeerId> = self.nodes.keys().copied().collect();
        for id in ids {
            let now = self.now;
            let out = self.node(id)?.session_sweep(now);
            self.enqueue(id, out)?;
        }
        Ok(())
    }

    fn run(&mut self) -> Result<bool, SimError> {
        let interval = self.cfg.node_config.sweep_interval_ms.max(1);
        let ids: Vec<PeerId> = self.nodes.keys().copied().collect();
        for id in ids {
            self.queue.push(interval, EventKind::Sweep { node: id });
        }
        let root_cids = self.cids.clone();
        let out = self.node(self.leech)?.want_content(&root_cids, 0);
        self.enqueue(self.leech, out)?;

        while let Some(ev) = self.queue.pop() {
            if ev.time > self.cfg.max_time_ms {
                return Ok(true);
            }
            debug_assert!(ev.time >= self.now, "causality");
            self.now = ev.time;
            match ev.kind {
                EventKind::Deliver {
                    from,
                    to,
                    sent_at,
                    message,
                } => self.deliver(from, to, sent_at, message)?,
                EventKind::Release { node, ticket } => {
                    let now = self.now;
                    if let Some(send) = self.node(node)?.release(ticket, now) {
                        self.enqueue(node, vec![send])?;
                    }
                }
                EventKind::Sweep { node } => {
                    let now = self.now;
                    let out = self.node(node)?.session_sweep(now);
                    self.enqueue(node, out)?;
                    if self.queue.active > 0 {
                        self.queue.push(now + interval, EventKind::Sweep { node });
                    }
                }
                EventKind::LookupDone => self.connect_provider()?,
            }
            if self.queue.active == 0 {
                self.sweep_all()?;
                if self.queue.active == 0 {
                    break;
                }
            }
        }
        Ok(false)
    }
}

/// Fetches `file` from the topology's seed into `leech` and records every
/// delivery.
///
/// The seed starts with all blocks, every other honest node with none. The
/// loop ends at quiescence (nothing left in flight or queued) or when the
/// next event lies past `max_time_ms`, in which case the trace is marked
/// truncated. An incomplete fetch is reported through
/// [`Trace::completed_at`], not as an error; errors are reserved for
/// violated simulator invariants.
pub fn run_simulation(
    topo: &Topology,
    cfg: &SimConfig,
    file: &[u8],
    leech: PeerId,
) -> Result<Trace, SimError> {
    topo.validate()?;
    cfg.node_config
        .strategy
        .validate()
        .map_err(|e| SimError::Setup(e.to_string()))?;
    let seed = topo
        .seed()
        .ok_or_else(|| SimError::Setup("no seed".into()))?;
    if leech == seed || !topo.role(leech).is_some_and(Role::is_honest) {
        return Err(SimError::Setup(format!(
            "{} cannot be the leech",
            topo.name(leech)
        )));
    }
    let blocks = chunk_content(file, cfg.block_size)?;
    if blocks.is_empty() {
        return Err(SimError::Setup("file is empty".into()));
    }
    let cids: Vec<Cid> = blocks.iter().map(|b| *b.cid()).collect();

    let mut topo = topo.clone();
    if topo.role(leech) == Some(Role::Forwarder) {
        topo.set_leech(leech)?;
    }
    let mut nodes = BTreeMap::new();
    for id in topo.honest_ids() {
        let node = NodeState::new(id, topo.neighbors(id), cfg.node_config.clone(), cfg.seed)?;
        nodes.insert(id, node);
    }
    let seed_node = nodes.get_mut(&seed).expect("seed is honest");
    for block in &blocks {
        seed_node.insert_block(block.clone());
    }

    let mut sim = Simulation {
        topo,
        cfg,
        nodes,
        queue: EventQueue::default(),
        leech,
        seed,
        cids,
        events: Vec::new(),
        last_delivery: BTreeMap::new(),
        lookup_scheduled: false,
        lookup_at: None,
        messages_total: 0,
        now: 0,
    };
    let truncated = sim.run()?;

    let leech_node = &sim.nodes[&leech];
    let completed_at = leech_node.sessions().first().and_then(|s| s.completed_at);
    let file_intact = completed_at.is_some() && {
        let held: Option<Vec<_>> = sim
            .cids
            .iter()
            .map(|c| leech_node.blockstore().get(c))
            .collect();
        held.is_some_and(|blocks| reassemble(blocks) == file)
    };
    let snapshots = sim
        .topo
        .nodes()
        .iter()
        .map(|info| match sim.nodes.get(&info.id) {
            Some(n) => NodeSnapshot {
                id: info.id,
                role: info.role,
                blocks_held: n.blockstore().len(),
                relay_interests: n
                    .relay_session()
                    .interests()
                    .values()
                    .map(|s| s.len())
                    .sum(),
                forwarded: n.relay_session().forwarded().len(),
                outstanding_wants: n.ledger().outstanding_cids().len(),
                pending_sends: n.ledger().pending_len(),
            },
            None => NodeSnapshot {
                id: info.id,
                role: info.role,
                blocks_held: 0,
                relay_interests: 0,
                forwarded: 0,
                outstanding_wants: 0,
                pending_sends: 0,
            },
        })
        .collect();

    Ok(Trace {
        names: sim.topo.nodes().iter().map(|n| n.name.clone()).collect(),
        roles: sim.topo.nodes().iter().map(|n| n.role).collect(),
        leech,
        seed,
        cids: sim.cids,
        events: sim.events,
        snapshots,
        started_at: 0,
        completed_at,
        lookup_at: sim.lookup_at,
        file_intact,
        end_time: sim.now,
        truncated,
        messages_total: sim.messages_total,
    })
}
