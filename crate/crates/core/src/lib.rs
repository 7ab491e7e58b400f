//! Bitswap block exchange with request forwarding and source-obfuscating
//! spreading, plus a deterministic discrete-event simulator to measure what a
//! passive eavesdropper learns and what it costs in fetch time.
//!
//! The crate is organized bottom-up:
//!
//! - [`content`]: cids, blocks and chunking.
//! - [`message`]: wantlist entries, presences and blocks on the wire.
//! - [`spread`]: immediate, trickle and diffusion spreading schedules.
//! - [`node`]: the per-peer state machine (client sessions, relay session,
//!   want ledger).
//! - [`simnet`]: topology, event loop and traces.
//! - [`adversary`]: first-timestamp source estimation and accuracy.
//! - [`experiments`]: scenarios, sweeps and CSV/JSON results.
//!
//! ## Examples
//!
//! Each capability has a runnable example under `crates/core/examples/`:
//!
//! - **`content_chunking`** - chunk a file and address its blocks
//! - **`spreading_schedules`** - immediate, trickle and diffusion send times
//! - **`relay_by_hand`** - drive three nodes manually through a forwarded fetch
//! - **`single_fetch_trace`** - simulate one fetch and dump its JSON-lines trace
//! - **`eavesdropper_accuracy`** - first-timestamp accuracy versus trickle delay
//! - **`baseline_vs_forwarding`** - time to fetch with and without forwarding
//! - **`parameter_sweep`** - a small sweep written to `runs.csv` / `summary.csv`
//! - **`topology_export`** - the reference topology as an edge list
//!
//! ```bash
//! cargo run --release -p trickleswap --example eavesdropper_accuracy
//! ```
//!
//! The `trickleswap` binary wraps the experiment runner for command-line use.

pub mod adversary;
pub mod content;
pub mod error;
pub mod experiments;
pub mod message;
pub mod node;
pub mod simnet;
pub mod spread;

/// Simulated time in milliseconds.
pub type Millis = u64;

pub use content::{chunk_content, cid_of, Block, Cid};
pub use error::{
    ContentError, ExperimentError, MessageError, ProtocolError, SimError, StrategyError,
};
pub use message::{BitswapMessage, MessageKind, Presence, WantType, WantlistEntry};
pub use node::{NodeConfig, NodeState, PeerId, TimedSend};
pub use spread::{schedule_spread, SpreadingStrategy};
