use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::content::Cid;
use crate::message::MessageKind;
use crate::node::PeerId;
use crate::simnet::Role;
use crate::Millis;

/// Leading cid bytes kept (hex encoded) in JSON-lines dumps.
pub const TRACE_CID_PREFIX_BYTES: usize = 8;

/// One part of one delivered message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Millis,
    pub sent_at: Millis,
    pub from: PeerId,
    pub to: PeerId,
    pub kind: MessageKind,
    pub cid: Cid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSnapshot {
    pub id: PeerId,
    pub role: Role,
    pub blocks_held: usize,
    /// Outstanding `(cid, peer)` pairs in the relay session.
    pub relay_interests: usize,
    pub forwarded: usize,
    pub outstanding_wants: usize,
    pub pending_sends: usize,
}

/// Everything a run produced, in delivery order.
#[derive(Debug, Clone)]
pub struct Trace {
    pub names: Vec<String>,
    pub roles: Vec<Role>,
    pub leech: PeerId,
    pub seed: PeerId,
    /// Block cids of the fetched file, root first.
    pub cids: Vec<Cid>,
    pub events: Vec<TraceEvent>,
    pub snapshots: Vec<NodeSnapshot>,
    pub started_at: Millis,
    pub completed_at: Option<Millis>,
    /// When the modeled provider lookup connected the leech to the seed.
    pub lookup_at: Option<Millis>,
    pub file_intact: bool,
    pub end_time: Millis,
    pub truncated: bool,
    pub messages_total: usize,
}

/// JSON-lines record of a [`TraceEvent`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub time: Millis,
    pub from: String,
    pub to: String,
    pub kind: MessageKind,
    pub cid: String,
}

impl Trace {
    pub fn root(&self) -> Cid {
        self.cids[0]
    }

    /// Time to fetch: first want emission to final block receipt.
    pub fn ttf(&self) -> Option<Millis> {
        self.completed_at.map(|t| t - self.started_at)
    }

    pub fn name(&self, id: PeerId) -> &str {
        self.names
            .get(id.0 as usize)
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn is_eavesdropper(&self, id: PeerId) -> bool {
        self.roles.get(id.0 as usize) == Some(&Role::Eavesdropper)
    }

    pub fn eavesdroppers(&self) -> BTreeSet<PeerId> {
        (0..self.roles.len() as u16)
            .map(PeerId)
            .filter(|&p| self.is_eavesdropper(p))
            .collect()
    }

    /// Number of message parts sent by `id`.
    pub fn outbound_from(&self, id: PeerId) -> usize {
        self.events.iter().filter(|e| e.from == id).count()
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// True when every node's relay session is empty and no send is queued.
    pub fn relays_drained(&self) -> bool {
        self.snapshots
            .iter()
            .all(|s| s.relay_interests == 0 && s.pending_sends == 0)
    }

    pub fn lines(&self) -> impl Iterator<Item = TraceLine> + '_ {
        self.events.iter().map(|e| TraceLine {
            time: e.time,
            from: self.name(e.from).to_string(),
            to: self.name(e.to).to_string(),
            kind: e.kind,
            cid: e.cid.prefix(TRACE_CID_PREFIX_BYTES),
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in self.lines() {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<TraceLine>> {
    let mut lines = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(lines)
}
