//! Bitswap wire messages: wantlist entries, block presences and blocks.
//!
//! Messages are in-memory values. [`BitswapMessage::to_canonical_json`]
//! renders one with sorted keys for trace dumps; block payloads are rendered
//! by cid and size only.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::content::{Block, Cid};
use crate::error::MessageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WantType {
    Have,
    Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WantlistEntry {
    pub cid: Cid,
    pub want_type: WantType,
    pub cancel: bool,
    pub send_dont_have: bool,
    /// Carried for wire fidelity; never used for ordering.
    pub priority: i32,
    /// Remaining hops when hop limiting is enabled.
    pub ttl: Option<u32>,
}

impl WantlistEntry {
    pub fn want_have(cid: Cid) -> Self {
        WantlistEntry {
            cid,
            want_type: WantType::Have,
            cancel: false,
            send_dont_have: true,
            priority: 1,
            ttl: None,
        }
    }

    pub fn want_block(cid: Cid) -> Self {
        WantlistEntry {
            want_type: WantType::Block,
            ..WantlistEntry::want_have(cid)
        }
    }

    pub fn cancel(cid: Cid) -> Self {
        WantlistEntry {
            cancel: true,
            send_dont_have: false,
            ..WantlistEntry::want_have(cid)
        }
    }

    pub fn with_ttl(mut self, ttl: Option<u32>) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn kind(&self) -> MessageKind {
        match (self.cancel, self.want_type) {
            (true, _) => MessageKind::Cancel,
            (false, WantType::Have) => MessageKind::WantHave,
            (false, WantType::Block) => MessageKind::WantBlock,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Have,
    DontHave,
}

/// Flat classification of each part of a message, used by traces and
/// observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum MessageKind {
    WantHave,
    WantBlock,
    Cancel,
    Have,
    DontHave,
    Block,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::WantHave => "WANT-HAVE",
            MessageKind::WantBlock => "WANT-BLOCK",
            MessageKind::Cancel => "CANCEL",
            MessageKind::Have => "HAVE",
            MessageKind::DontHave => "DONT-HAVE",
            MessageKind::Block => "BLOCK",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "WANT-HAVE" => MessageKind::WantHave,
            "WANT-BLOCK" => MessageKind::WantBlock,
            "CANCEL" => MessageKind::Cancel,
            "HAVE" => MessageKind::Have,
            "DONT-HAVE" => MessageKind::DontHave,
            "BLOCK" => MessageKind::Block,
            other => return Err(format!("unknown message kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitswapMessage {
    entries: Vec<WantlistEntry>,
    blocks: Vec<Block>,
    presences: Vec<(Cid, Presence)>,
}

impl BitswapMessage {
    pub fn new(
        entries: Vec<WantlistEntry>,
        blocks: Vec<Block>,
        presences: Vec<(Cid, Presence)>,
    ) -> Result<Self, MessageError> {
        let msg = BitswapMessage {
            entries,
            blocks,
            presences,
        };
        msg.validate()?;
        Ok(msg)
    }

    pub fn from_entries(entries: Vec<WantlistEntry>) -> Result<Self, MessageError> {
        Self::new(entries, Vec::new(), Vec::new())
    }

    pub fn block(block: Block) -> Self {
        BitswapMessage {
            entries: Vec::new(),
            blocks: vec![block],
            presences: Vec::new(),
        }
    }

    pub fn presence(cid: Cid, presence: Presence) -> Self {
        BitswapMessage {
            entries: Vec::new(),
            blocks: Vec::new(),
            presences: vec![(cid, presence)],
        }
    }

    pub fn validate(&self) -> Result<(), MessageError> {
        if self.is_empty() {
            return Err(MessageError::Empty);
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.cid) {
                return Err(MessageError::DuplicateEntry(e.cid));
            }
        }
        seen.clear();
        for (cid, _) in &self.presences {
            if !seen.insert(*cid) {
                return Err(MessageError::DuplicatePresence(*cid));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[WantlistEntry] {
        &self.entries
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn presences(&self) -> &[(Cid, Presence)] {
        &self.presences
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.blocks.is_empty() && self.presences.is_empty()
    }

    /// Drops wantlist entries rejected by `keep`. Returns `None` when nothing
    /// is left to send.
    pub(crate) fn retain_entries(
        mut self,
        keep: impl FnMut(&WantlistEntry) -> bool,
    ) -> Option<Self> {
        self.entries.retain(keep);
        (!self.is_empty()).then_some(self)
    }

    /// Every part of the message as `(kind, cid)` in wire order: entries,
    /// then presences, then blocks.
    pub fn parts(&self) -> impl Iterator<Item = (MessageKind, Cid)> + '_ {
        let entries = self.entries.iter().map(|e| (e.kind(), e.cid));
        let presences = self.presences.iter().map(|(cid, p)| {
            let kind = match p {
                Presence::Have => MessageKind::Have,
                Presence::DontHave => MessageKind::DontHave,
            };
            (kind, *cid)
        });
        let blocks = self.blocks.iter().map(|b| (MessageKind::Block, *b.cid()));
        entries.chain(presences).chain(blocks)
    }

    pub fn to_canonical_json(&self) -> String {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                json!({
                    "cid": e.cid.to_string(),
                    "want_type": e.want_type,
                    "cancel": e.cancel,
                    "send_dont_have": e.send_dont_have,
                    "priority": e.priority,
                    "ttl": e.ttl,
                })
            })
            .collect();
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|b| json!({ "cid": b.cid().to_string(), "size": b.size() }))
            .collect();
        let presences: Vec<_> = self
            .presences
            .iter()
            .map(|(cid, p)| json!({ "cid": cid.to_string(), "presence": p }))
            .collect();
        // serde_json's default map is a BTreeMap, so keys come out sorted
        json!({ "entries": entries, "blocks": blocks, "presences": presences }).to_string()
    }
}
