//! The Bitswap state machine, extended with request forwarding through a
//! relay session and with pluggable spreading of WANT-HAVEs and CANCELs.
//!
//! A [`NodeState`] owns no clock and no transport. Every handler takes the
//! current time and returns [`TimedSend`]s. A send scheduled for a later time
//! carries a [`Ticket`]; the driver hands the ticket back through
//! [`NodeState::release`] when that time comes, and gets the message as it
//! stands then. Wants for blocks that arrived in the meantime are dropped
//! from it.

mod ledger;
mod session;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ledger::{DispatchState, PeerWantLedger, PendingSend, SentWant, Ticket};
pub use session::{ClientSession, RelaySession};

use crate::content::{Block, Cid};
use crate::error::ProtocolError;
use crate::message::{BitswapMessage, Presence, WantType, WantlistEntry};
use crate::spread::{schedule_spread, SpreadingStrategy};
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PeerId(pub u16);

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Blocks strictly smaller than this are sent in reply to a WANT-HAVE.
pub const DEFAULT_SMALL_BLOCK_THRESHOLD: usize = 1024;
pub const DEFAULT_SWEEP_INTERVAL_MS: Millis = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub strategy: SpreadingStrategy,
    pub forwarding: bool,
    /// Initial hop budget stamped on own wants; `None` disables hop limiting.
    pub hop_limit: Option<u32>,
    pub small_block_threshold: usize,
    pub sweep_interval_ms: Millis,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            strategy: SpreadingStrategy::default(),
            forwarding: true,
            hop_limit: None,
            small_block_threshold: DEFAULT_SMALL_BLOCK_THRESHOLD,
            sweep_interval_ms: DEFAULT_SWEEP_INTERVAL_MS,
        }
    }
}

impl NodeConfig {
    /// Stock Bitswap: no forwarding, no spreading delay.
    pub fn baseline() -> Self {
        NodeConfig {
            strategy: SpreadingStrategy::Immediate,
            forwarding: false,
            ..NodeConfig::default()
        }
    }

    pub fn forwarding(strategy: SpreadingStrategy) -> Self {
        NodeConfig {
            strategy,
            ..NodeConfig::default()
        }
    }
}

/// A message this node wants on the wire at `at`.
#[derive(Debug, Clone)]
pub struct TimedSend {
    pub at: Millis,
    pub to: PeerId,
    pub message: BitswapMessage,
    /// Set when `at` lies in the future; pass it to [`NodeState::release`]
    /// at `at` to obtain the message that actually goes out.
    pub ticket: Option<Ticket>,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    id: PeerId,
    neighbors: Vec<PeerId>,
    blockstore: BTreeMap<Cid, Block>,
    sessions: Vec<ClientSession>,
    relay: RelaySession,
    ledger: PeerWantLedger,
    dont_haves: BTreeMap<Cid, BTreeSet<PeerId>>,
    config: NodeConfig,
    rng: ChaCha8Rng,
}

impl NodeState {
    /// Creates a node whose generator is derived from `(seed, id)`.
    pub fn new(
        id: PeerId,
        neighbors: Vec<PeerId>,
        config: NodeConfig,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        let mut seen = BTreeSet::new();
        for &n in &neighbors {
            if n == id {
                return Err(ProtocolError::SelfNeighbor(id));
            }
            if !seen.insert(n) {
                return Err(ProtocolError::DuplicateNeighbor(n));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id.0 as u64);
        Ok(NodeState {
            id,
            neighbors,
            blockstore: BTreeMap::new(),
            sessions: Vec::new(),
            relay: RelaySession::default(),
            ledger: PeerWantLedger::default(),
            dont_haves: BTreeMap::new(),
            config,
            rng,
        })
    }

    pub fn id(&self) -> PeerId {
        self.id
    }

    pub fn neighbors(&self) -> &[PeerId] {
        &self.neighbors
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn blockstore(&self) -> &BTreeMap<Cid, Block> {
        &self.blockstore
    }

    pub fn has_block(&self, cid: &Cid) -> bool {
        self.blockstore.contains_key(cid)
    }

    pub fn sessions(&self) -> &[ClientSession] {
        &self.sessions
    }

    pub fn relay_session(&self) -> &RelaySession {
        &self.relay
    }

    pub fn ledger(&self) -> &PeerWantLedger {
        &self.ledger
    }

    /// Peers that answered DONT-HAVE to one of this node's own wants.
    pub fn dont_haves(&self, cid: &Cid) -> Option<&BTreeSet<PeerId>> {
        self.dont_haves.get(cid)
    }

    /// Seeds the blockstore without any protocol traffic.
    pub fn insert_block(&mut self, block: Block) {
        self.blockstore.entry(*block.cid()).or_insert(block);
    }

    fn session_wants(&self, cid: &Cid) -> bool {
        self.sessions.iter().any(|s| s.is_waiting_for(cid))
    }

    /// Starts a client session for `cids` and spreads WANT-HAVEs for the
    /// missing ones to every neighbor.
    pub fn want_content(&mut self, cids: &[Cid], now: Millis) -> Vec<TimedSend> {
        let wanted: BTreeSet<Cid> = cids.iter().copied().collect();
        let received: BTreeSet<Cid> = wanted
            .iter()
            .filter(|c| self.has_block(c))
            .copied()
            .collect();
        let mut session = ClientSession {
            id: self.sessions.len() as u64,
            wanted,
            received,
            is_relay: false,
            started_at: now,
            completed_at: None,
        };
        if session.is_complete() {
            session.completed_at = Some(now);
            self.sessions.push(session);
            return Vec::new();
        }
        // keep the caller's order so the first cid leads every message
        let mut seen = BTreeSet::new();
        let missing: Vec<Cid> = cids
            .iter()
            .filter(|c| !session.received.contains(c) && seen.insert(**c))
            .copied()
            .collect();
        self.sessions.push(session);
        let targets = self.neighbors.clone();
        self.spread_wants(&missing, &targets, self.config.hop_limit, now)
    }

    /// Connects a new peer (e.g. a provider found out of band) and sends it
    /// every want of the unfinished client sessions.
    pub fn add_peer(&mut self, peer: PeerId, now: Millis) -> Result<Vec<TimedSend>, ProtocolError> {
        if peer == self.id {
            return Err(ProtocolError::SelfNeighbor(peer));
        }
        if self.neighbors.contains(&peer) {
            return Err(ProtocolError::DuplicateNeighbor(peer));
        }
        self.neighbors.push(peer);
        let mut seen = BTreeSet::new();
        let missing: Vec<Cid> = self
            .sessions
            .iter()
            .filter(|s| !s.is_complete())
            .flat_map(|s| s.wanted.difference(&s.received).copied())
            .filter(|c| seen.insert(*c))
            .collect();
        Ok(self.spread_wants(&missing, &[peer], self.config.hop_limit, now))
    }

    pub fn handle_message(
        &mut self,
        from: PeerId,
        msg: &BitswapMessage,
        now: Millis,
    ) -> Result<Vec<TimedSend>, ProtocolError> {
        if !self.neighbors.contains(&from) {
            return Err(ProtocolError::NotANeighbor {
                node: self.id,
                from,
            });
        }
        msg.validate()
            .map_err(|source| ProtocolError::Malformed { from, source })?;

        let mut out = Vec::new();
        for block in msg.blocks() {
            out.extend(self.handle_block(from, block, now));
        }
        for (cid, presence) in msg.presences() {
            match presence {
                Presence::Have => out.extend(self.handle_have(from, cid, now)),
                Presence::DontHave => self.handle_dont_have(from, cid),
            }
        }
        for entry in msg.entries() {
            let sends = match (entry.cancel, entry.want_type) {
                (true, _) => self.handle_cancel(from, &entry.cid, now),
                (false, WantType::Have) => self.handle_want_have(from, entry, now),
                (false, WantType::Block) => self.handle_want_block(from, entry, now),
            };
            out.extend(sends);
        }
        Ok(out)
    }

    pub fn handle_want_have(
        &mut self,
        from: PeerId,
        entry: &WantlistEntry,
        now: Millis,
    ) -> Vec<TimedSend> {
        if let Some(block) = self.blockstore.get(&entry.cid) {
            let reply = if block.size() < self.config.small_block_threshold {
                BitswapMessage::block(block.clone())
            } else {
                BitswapMessage::presence(entry.cid, Presence::Have)
            };
            return vec![self.immediate(from, reply, now)];
        }
        self.relay_or_decline(from, entry, now)
    }

    /// WANT-BLOCKs only go to peers that announced HAVE, so a miss here means
    /// the peer is not following the protocol; treat it like a WANT-HAVE
    /// without the small-block shortcut.
    pub fn handle_want_block(
        &mut self,
        from: PeerId,
        entry: &WantlistEntry,
        now: Millis,
    ) -> Vec<TimedSend> {
        if let Some(block) = self.blockstore.get(&entry.cid) {
            let reply = BitswapMessage::block(block.clone());
            return vec![self.immediate(from, reply, now)];
        }
        self.relay_or_decline(from, entry, now)
    }

    fn relay_or_decline(
        &mut self,
        from: PeerId,
        entry: &WantlistEntry,
        now: Millis,
    ) -> Vec<TimedSend> {
        let cid = entry.cid;
        let mut out = Vec::new();
        if entry.send_dont_have {
            out.push(self.immediate(from, BitswapMessage::presence(cid, Presence::DontHave), now));
        }
        let hops_left = entry.ttl.is_none_or(|t| t > 1);
        if !self.config.forwarding || !hops_left {
            return out;
        }
        self.relay.add_interest(cid, from);
        if self.relay.mark_forwarded(cid, from) {
            let interested = self.relay.interested_in(&cid).cloned().unwrap_or_default();
            let targets: Vec<PeerId> = self
                .neighbors
                .iter()
                .filter(|p| !interested.contains(p))
                .copied()
                .collect();
            let ttl = entry.ttl.map(|t| t - 1);
            out.extend(self.spread_wants(&[cid], &targets, ttl, now));
        }
        out
    }

    pub fn handle_block(&mut self, from: PeerId, block: &Block, now: Millis) -> Vec<TimedSend> {
        let cid = *block.cid();
        self.ledger.remove(from, &cid);
        if self.has_block(&cid) {
            return Vec::new();
        }
        self.blockstore.insert(cid, block.clone());

        let mut out = Vec::new();
        for peer in self.relay.take_interests(&cid) {
            if peer != from {
                out.push(self.immediate(peer, BitswapMessage::block(block.clone()), now));
            }
        }
        for session in &mut self.sessions {
            session.mark_received(&cid, now);
        }
        out.extend(self.cancel_wants(&cid, now));
        out
    }

    pub fn handle_have(&mut self, from: PeerId, cid: &Cid, now: Millis) -> Vec<TimedSend> {
        if self.has_block(cid) || self.ledger.want_block_outstanding(cid) {
            return Vec::new();
        }
        let relayed = self.relay.interested_in(cid).is_some();
        if !relayed && !self.session_wants(cid) {
            return Vec::new();
        }
        self.ledger
            .record(from, *cid, WantType::Block, DispatchState::Sent);
        let msg = BitswapMessage::from_entries(vec![WantlistEntry::want_block(*cid)])
            .expect("single entry");
        vec![self.immediate(from, msg, now)]
    }

    fn handle_dont_have(&mut self, from: PeerId, cid: &Cid) {
        if self.session_wants(cid) {
            self.dont_haves.entry(*cid).or_default().insert(from);
        }
    }

    pub fn handle_cancel(&mut self, from: PeerId, cid: &Cid, now: Millis) -> Vec<TimedSend> {
        if !self.relay.remove_interest(cid, from) {
            return Vec::new();
        }
        if self.session_wants(cid) || self.has_block(cid) {
            return Vec::new();
        }
        self.cancel_wants(cid, now)
    }

    /// Cancels wants for cids that are fulfilled or no longer wanted by
    /// anyone. Does nothing when all cancels already went out.
    ///
    /// A relayed want also counts as abandoned once the peer that triggered
    /// the forward has withdrawn and every peer still interested is one we
    /// asked ourselves. Such peers are co-relays of the same flood waiting on
    /// each other, and without this rule the cycle would never unwind.
    pub fn session_sweep(&mut self, now: Millis) -> Vec<TimedSend> {
        let stale: Vec<Cid> = self
            .ledger
            .outstanding_cids()
            .into_iter()
            .filter(|c| {
                self.has_block(c)
                    || (!self.session_wants(c)
                        && match self.relay.interested_in(c) {
                            None => true,
                            Some(peers) => self.is_orphaned_relay(c, peers),
                        })
            })
            .collect();
        stale
            .iter()
            .flat_map(|c| self.cancel_wants(c, now))
            .collect::<Vec<_>>()
    }

    /// Hands back a send scheduled earlier, in its current form. `None` when
    /// every want in it was withdrawn before its time came.
    pub fn release(&mut self, ticket: Ticket, now: Millis) -> Option<TimedSend> {
        self.ledger.release(ticket).map(|p| TimedSend {
            at: now,
            to: p.to,
            message: p.message,
            ticket: None,
        })
    }

    /// True when nothing is queued for later release.
    pub fn is_idle(&self) -> bool {
        self.ledger.pending_len() == 0
    }

    fn is_orphaned_relay(&self, cid: &Cid, interested: &BTreeSet<PeerId>) -> bool {
        let Some(origin) = self.relay.origin(cid) else {
            return false;
        };
        !interested.contains(&origin)
            && interested
                .iter()
                .all(|p| self.ledger.get(*p, cid).is_some())
    }

    fn cancel_wants(&mut self, cid: &Cid, now: Millis) -> Vec<TimedSend> {
        let mut targets = Vec::new();
        for (peer, _) in self.ledger.peers_wanting(cid) {
            if self.ledger.remove(peer, cid) == Some(DispatchState::Sent) {
                targets.push(peer);
            }
        }
        self.ledger.clear_want_block(cid);
        if targets.is_empty() {
            return Vec::new();
        }
        let schedule = schedule_spread(&self.config.strategy, &mut self.rng, &targets, now);
        schedule
            .into_iter()
            .map(|(to, at)| {
                let msg = BitswapMessage::from_entries(vec![WantlistEntry::cancel(*cid)])
                    .expect("single entry");
                self.schedule(to, msg, at, now)
            })
            .collect()
    }

    fn spread_wants(
        &mut self,
        cids: &[Cid],
        targets: &[PeerId],
        ttl: Option<u32>,
        now: Millis,
    ) -> Vec<TimedSend> {
        let mut per_target: BTreeMap<PeerId, Vec<Cid>> = BTreeMap::new();
        let mut live_targets = Vec::new();
        for &peer in targets {
            let fresh: Vec<Cid> = cids
                .iter()
                .filter(|c| !self.ledger.is_outstanding(peer, c, WantType::Have))
                .copied()
                .collect();
            if !fresh.is_empty() {
                per_target.insert(peer, fresh);
                live_targets.push(peer);
            }
        }
        let schedule = schedule_spread(&self.config.strategy, &mut self.rng, &live_targets, now);
        let mut out = Vec::with_capacity(schedule.len());
        for (to, at) in schedule {
            let cids = per_target.remove(&to).expect("scheduled target");
            let entries = cids
                .iter()
                .map(|c| WantlistEntry::want_have(*c).with_ttl(ttl))
                .collect();
            let msg = BitswapMessage::from_entries(entries).expect("distinct cids");
            let send = self.schedule(to, msg, at, now);
            let state = match send.ticket {
                Some(t) => DispatchState::Pending(t),
                None => DispatchState::Sent,
            };
            for c in cids {
                self.ledger.record(to, c, WantType::Have, state);
            }
            out.push(send);
        }
        out
    }

    fn schedule(
        &mut self,
        to: PeerId,
        message: BitswapMessage,
        at: Millis,
        now: Millis,
    ) -> TimedSend {
        let ticket = (at > now).then(|| self.ledger.hold(to, message.clone()));
        TimedSend {
            at,
            to,
            message,
            ticket,
        }
    }

    fn immediate(&self, to: PeerId, message: BitswapMessage, now: Millis) -> TimedSend {
        TimedSend {
            at: now,
            to,
            message,
            ticket: None,
        }
    }
}

#[cfg(test)]
mod tests;
