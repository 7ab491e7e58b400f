use std::path::PathBuf;

use thiserror::Error;

use crate::content::Cid;
use crate::node::PeerId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContentError {
    #[error("cannot address empty data")]
    EmptyData,
    #[error("block size must be at least one byte")]
    ZeroBlockSize,
    #[error("block data hashes to {actual}, expected {expected}")]
    CidMismatch { expected: Cid, actual: Cid },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("message carries no entries, blocks or presences")]
    Empty,
    #[error("duplicate wantlist entry for {0:?}")]
    DuplicateEntry(Cid),
    #[error("duplicate block presence for {0:?}")]
    DuplicatePresence(Cid),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("trickle batch must be at least 1")]
    ZeroBatch,
    #[error("diffusion mean delay must be positive, got {0}")]
    NonPositiveMean(f64),
}

/// A condition that can only arise from a bug in the driver or a peer
/// implementation; simulations abort on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("message from {from} which is not a neighbor of {node}")]
    NotANeighbor { node: PeerId, from: PeerId },
    #[error("malformed message from {from}: {source}")]
    Malformed {
        from: PeerId,
        #[source]
        source: MessageError,
    },
    #[error("{0} cannot be its own neighbor")]
    SelfNeighbor(PeerId),
    #[error("duplicate neighbor {0}")]
    DuplicateNeighbor(PeerId),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("delivery {from} -> {to} over a link that does not exist")]
    NotAnEdge { from: PeerId, to: PeerId },
    #[error("unknown node {0}")]
    UnknownNode(PeerId),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("out-of-order delivery on link {from} -> {to}")]
    FifoViolation { from: PeerId, to: PeerId },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Content(#[from] ContentError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("prediction accuracy of an empty run set is undefined")]
    EmptyPredictions,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
