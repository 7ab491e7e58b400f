use std::collections::{BTreeMap, BTreeSet};

use crate::content::Cid;
use crate::node::PeerId;
use crate::Millis;

/// A fetch started by this node on its own behalf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientSession {
    pub id: u64,
    pub wanted: BTreeSet<Cid>,
    pub received: BTreeSet<Cid>,
    /// Always false; relayed wants live in [`RelaySession`].
    pub is_relay: bool,
    pub started_at: Millis,
    pub completed_at: Option<Millis>,
}

impl ClientSession {
    pub fn is_complete(&self) -> bool {
        self.received.len() == self.wanted.len()
    }

    pub fn is_waiting_for(&self, cid: &Cid) -> bool {
        self.wanted.contains(cid) && !self.received.contains(cid)
    }

    pub(crate) fn mark_received(&mut self, cid: &Cid, now: Millis) {
        if self.wanted.contains(cid) && self.received.insert(*cid) && self.is_complete() {
            self.completed_at = Some(now);
        }
    }
}

/// Wants this node carries on behalf of its neighbors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelaySession {
    interests: BTreeMap<Cid, BTreeSet<PeerId>>,
    forwarded: BTreeSet<Cid>,
    /// The peer whose want made us spread each forwarded cid.
    origins: BTreeMap<Cid, PeerId>,
}

impl RelaySession {
    pub fn interests(&self) -> &BTreeMap<Cid, BTreeSet<PeerId>> {
        &self.interests
    }

    pub fn interested_in(&self, cid: &Cid) -> Option<&BTreeSet<PeerId>> {
        self.interests.get(cid)
    }

    pub fn forwarded(&self) -> &BTreeSet<Cid> {
        &self.forwarded
    }

    pub fn origin(&self, cid: &Cid) -> Option<PeerId> {
        self.origins.get(cid).copied()
    }

    pub fn is_drained(&self) -> bool {
        self.interests.is_empty()
    }

    pub(crate) fn add_interest(&mut self, cid: Cid, peer: PeerId) {
        self.interests.entry(cid).or_default().insert(peer);
    }

    /// Removes one peer's interest. Returns true if that was the last one.
    pub(crate) fn remove_interest(&mut self, cid: &Cid, peer: PeerId) -> bool {
        let Some(peers) = self.interests.get_mut(cid) else {
            return false;
        };
        if !peers.remove(&peer) {
            return false;
        }
        if peers.is_empty() {
            self.interests.remove(cid);
            return true;
        }
        false
    }

    pub(crate) fn take_interests(&mut self, cid: &Cid) -> BTreeSet<PeerId> {
        self.interests.remove(cid).unwrap_or_default()
    }

    /// Marks `cid` as spread on behalf of `origin`. Returns false if it
    /// already was.
    pub(crate) fn mark_forwarded(&mut self, cid: Cid, origin: PeerId) -> bool {
        if !self.forwarded.insert(cid) {
            return false;
        }
        self.origins.insert(cid, origin);
        true
    }
}
