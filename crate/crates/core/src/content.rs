//! Content addressing: block identifiers and fixed-size chunking.

use std::fmt;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ContentError;

/// Length of a [`Cid`] digest in bytes (SHA-256).
pub const CID_LEN: usize = 32;

/// Content identifier: the SHA-256 digest of a block's bytes.
///
/// Ordering is byte-lexicographic so that maps keyed by `Cid` iterate
/// deterministically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cid([u8; CID_LEN]);

impl Cid {
    pub fn from_digest(digest: [u8; CID_LEN]) -> Self {
        Cid(digest)
    }

    pub fn as_bytes(&self) -> &[u8; CID_LEN] {
        &self.0
    }

    /// Lowercase hex of the first `n` digest bytes, used in trace dumps.
    pub fn prefix(&self, n: usize) -> String {
        hex::encode(&self.0[..n.min(CID_LEN)])
    }
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cid({})", self.prefix(6))
    }
}

impl Serialize for Cid {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Cid {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let digest: [u8; CID_LEN] = raw
            .try_into()
            .map_err(|_| serde::de::Error::custom("cid must be 32 bytes"))?;
        Ok(Cid(digest))
    }
}

/// Computes the identifier of a non-empty byte sequence.
pub fn cid_of(data: &[u8]) -> Result<Cid, ContentError> {
    if data.is_empty() {
        return Err(ContentError::EmptyData);
    }
    Ok(Cid(Sha256::digest(data).into()))
}

/// The smallest unit of data exchanged between peers.
#[derive(Clone, PartialEq, Eq)]
pub struct Block {
    cid: Cid,
    data: Bytes,
}

impl Block {
    pub fn new(data: impl Into<Bytes>) -> Result<Self, ContentError> {
        let data = data.into();
        let cid = cid_of(&data)?;
        Ok(Block { cid, data })
    }

    /// Rebuilds a block from a claimed identifier, rejecting a mismatch.
    pub fn with_cid(cid: Cid, data: impl Into<Bytes>) -> Result<Self, ContentError> {
        let block = Block::new(data)?;
        if block.cid != cid {
            return Err(ContentError::CidMismatch {
                expected: cid,
                actual: block.cid,
            });
        }
        Ok(block)
    }

    pub fn cid(&self) -> &Cid {
        &self.cid
    }

    pub fn data(&self) -> &Bytes {
        &self.data
    }

    pub fn size(&self) -> usize {
        self.data.len()
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Block")
            .field("cid", &self.cid)
            .field("size", &self.data.len())
            .finish()
    }
}

/// Splits `data` into consecutive blocks of `block_size` bytes; the last block
/// may be shorter. Empty input yields no blocks.
pub fn chunk_content(data: &[u8], block_size: usize) -> Result<Vec<Block>, ContentError> {
    if block_size == 0 {
        return Err(ContentError::ZeroBlockSize);
    }
    let shared = Bytes::copy_from_slice(data);
    (0..data.len())
        .step_by(block_size)
        .map(|start| {
            let end = (start + block_size).min(data.len());
            Block::new(shared.slice(start..end))
        })
        .collect()
}

/// Concatenates block payloads back into the original byte sequence.
pub fn reassemble<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> Vec<u8> {
    let mut out = Vec::new();
    for block in blocks {
        out.extend_from_slice(block.data());
    }
    out
}
