use std::collections::{BTreeMap, BTreeSet};

use crate::content::Cid;
use crate::message::{BitswapMessage, WantType};
use crate::node::PeerId;

/// Handle for a send that was scheduled for a later time and has not been put
/// on the wire yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ticket(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchState {
    Pending(Ticket),
    Sent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentWant {
    pub want_type: WantType,
    pub state: DispatchState,
}

#[derive(Debug, Clone)]
pub struct PendingSend {
    pub to: PeerId,
    pub message: BitswapMessage,
}

/// Wants this node has sent (or scheduled) to each peer, plus the queue of
/// trickled sends that have not been released yet.
#[derive(Debug, Clone, Default)]
pub struct PeerWantLedger {
    sent: BTreeMap<PeerId, BTreeMap<Cid, SentWant>>,
    pending: BTreeMap<Ticket, PendingSend>,
    want_block_outstanding: BTreeSet<Cid>,
    next_ticket: u64,
}

impl PeerWantLedger {
    /// True if a want of at least `want_type` strength is already recorded
    /// for `(peer, cid)`, whether released or still pending.
    pub fn is_outstanding(&self, peer: PeerId, cid: &Cid, want_type: WantType) -> bool {
        self.sent
            .get(&peer)
            .and_then(|m| m.get(cid))
            .is_some_and(|w| w.want_type >= want_type)
    }

    pub fn get(&self, peer: PeerId, cid: &Cid) -> Option<SentWant> {
        self.sent.get(&peer).and_then(|m| m.get(cid)).copied()
    }

    pub(crate) fn record(
        &mut self,
        peer: PeerId,
        cid: Cid,
        want_type: WantType,
        state: DispatchState,
    ) {
        self.sent
            .entry(peer)
            .or_default()
            .insert(cid, SentWant { want_type, state });
        if want_type == WantType::Block {
            self.want_block_outstanding.insert(cid);
        }
    }

    pub fn want_block_outstanding(&self, cid: &Cid) -> bool {
        self.want_block_outstanding.contains(cid)
    }

    /// Peers holding a recorded want for `cid`, in peer order.
    pub fn peers_wanting(&self, cid: &Cid) -> Vec<(PeerId, SentWant)> {
        self.sent
            .iter()
            .filter_map(|(p, m)| m.get(cid).map(|w| (*p, *w)))
            .collect()
    }

    pub fn outstanding_cids(&self) -> BTreeSet<Cid> {
        self.sent.values().flat_map(|m| m.keys().copied()).collect()
    }

    /// Forgets the want for `(peer, cid)`. A pending want is pulled out of its
    /// queued message. Returns the state the want was in.
    pub(crate) fn remove(&mut self, peer: PeerId, cid: &Cid) -> Option<DispatchState> {
        let per_peer = self.sent.get_mut(&peer)?;
        let want = per_peer.remove(cid)?;
        if per_peer.is_empty() {
            self.sent.remove(&peer);
        }
        if want.want_type == WantType::Block {
            self.want_block_outstanding.remove(cid);
        }
        if let DispatchState::Pending(ticket) = want.state {
            self.retract(ticket, cid);
        }
        Some(want.state)
    }

    pub(crate) fn clear_want_block(&mut self, cid: &Cid) {
        self.want_block_outstanding.remove(cid);
    }

    fn retract(&mut self, ticket: Ticket, cid: &Cid) {
        let Some(pending) = self.pending.remove(&ticket) else {
            return;
        };
        let to = pending.to;
        if let Some(message) = pending
            .message
            .retain_entries(|e| e.cancel || e.cid != *cid)
        {
            self.pending.insert(ticket, PendingSend { to, message });
        }
    }

    pub(crate) fn hold(&mut self, to: PeerId, message: BitswapMessage) -> Ticket {
        let ticket = Ticket(self.next_ticket);
        self.next_ticket += 1;
        self.pending.insert(ticket, PendingSend { to, message });
        ticket
    }

    /// Takes a queued send off the queue, marking its wants as sent. `None`
    /// if everything in it was retracted in the meantime.
    pub(crate) fn release(&mut self, ticket: Ticket) -> Option<PendingSend> {
        let pending = self.pending.remove(&ticket)?;
        if let Some(per_peer) = self.sent.get_mut(&pending.to) {
            for entry in pending.message.entries().iter().filter(|e| !e.cancel) {
                if let Some(w) = per_peer.get_mut(&entry.cid) {
                    if w.state == DispatchState::Pending(ticket) {
                        w.state = DispatchState::Sent;
                    }
                }
            }
        }
        Some(pending)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sent.is_empty() && self.pending.is_empty()
    }
}
