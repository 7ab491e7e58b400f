use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{first_timestamp_estimate, observations, Estimate};
use crate::error::ExperimentError;
use crate::message::MessageKind;
use crate::node::{NodeConfig, PeerId};
use crate::simnet::{
    run_simulation, ProviderLookup, SimConfig, Topology, Trace, DEFAULT_BLOCK_SIZE,
    DEFAULT_LATENCY_MS, DEFAULT_MAX_TIME_MS,
};
use crate::spread::SpreadingStrategy;
use crate::Millis;

const FILE_STREAM: u64 = u64::MAX;
const TIE_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Stock Bitswap with a modeled provider lookup.
    Baseline,
    Forwarding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeechPosition {
    /// n5, two hops from the seed.
    Center,
    /// n0, four hops from the seed.
    Edge,
}

impl LeechPosition {
    pub fn node_name(self) -> &'static str {
        match self {
            LeechPosition::Center => "n5",
            LeechPosition::Edge => "n0",
        }
    }
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $text:literal),+ }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(format!("unknown value `{other}`")),
                }
            }
        }
    };
}

text_enum!(Mode { Mode::Baseline => "baseline", Mode::Forwarding => "forwarding" });
text_enum!(LeechPosition { LeechPosition::Center => "center", LeechPosition::Edge => "edge" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub leech: LeechPosition,
    pub latency_ms: Millis,
    /// Ignored in baseline mode, which always spreads immediately.
    pub strategy: SpreadingStrategy,
    pub eavesdroppers: usize,
    pub file_size: usize,
    pub runs: usize,
    pub seed: u64,
    /// Provider lookup cost in round trips (baseline only).
    pub dht_lookup_rtts: u32,
    pub block_size: usize,
    pub max_time_ms: Millis,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: Mode::Forwarding,
            leech: LeechPosition::Center,
            latency_ms: DEFAULT_LATENCY_MS,
            strategy: SpreadingStrategy::default(),
            eavesdroppers: 1,
            file_size: 150 * 1024,
            runs: default_runs(1),
            seed: 0,
            dht_lookup_rtts: 1,
            block_size: DEFAULT_BLOCK_SIZE,
            max_time_ms: DEFAULT_MAX_TIME_MS,
        }
    }
}

/// Runs per repetition used in the reference evaluation: 50, 40 and 30 for
/// 1, 4 and 7 eavesdroppers.
pub fn default_runs(eavesdroppers: usize) -> usize {
    match eavesdroppers {
        0 | 1 => 50,
        2..=4 => 40,
        _ => 30,
    }
}

impl ScenarioConfig {
    pub fn baseline() -> Self {
        ScenarioConfig {
            mode: Mode::Baseline,
            strategy: SpreadingStrategy::Immediate,
            ..ScenarioConfig::default()
        }
    }

    /// The strategy honest nodes actually run.
    pub fn effective_strategy(&self) -> SpreadingStrategy {
        match self.mode {
            Mode::Baseline => SpreadingStrategy::Immediate,
            Mode::Forwarding => self.strategy,
        }
    }

    pub fn trickle_delay(&self) -> Millis {
        self.effective_strategy().trickle_delay()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.file_size == 0 {
            return invalid("file size must be positive");
        }
        if self.block_size == 0 {
            return invalid("block size must be positive");
        }
        if self.eavesdroppers > u16::MAX as usize - 64 {
            return invalid("too many eavesdroppers");
        }
        self.strategy
            .validate()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }

    pub fn node_config(&self) -> NodeConfig {
        match self.mode {
            Mode::Baseline => NodeConfig::baseline(),
            Mode::Forwarding => NodeConfig::forwarding(self.strategy),
        }
    }

    pub fn topology(&self) -> Topology {
        Topology::reference()
            .with_latency(self.latency_ms)
            .attach_eavesdroppers(self.eavesdroppers)
    }

    pub fn leech_id(&self) -> PeerId {
        Topology::reference()
            .id_of(self.leech.node_name())
            .expect("reference topology names its leeches")
    }

    /// Simulation settings for run `run_id`.
    pub fn sim_config(&self, run_id: u64) -> SimConfig {
        let mut cfg = SimConfig::new(self.node_config(), run_seed(self.seed, run_id));
        cfg.block_size = self.block_size;
        cfg.max_time_ms = self.max_time_ms;
        if self.mode == Mode::Baseline {
            cfg.provider_lookup = Some(ProviderLookup {
                delay_ms: self.dht_lookup_rtts as Millis * 2 * self.latency_ms,
            });
        }
        cfg
    }

    /// Random file content for run `run_id`.
    pub fn run_file(&self, run_id: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(self.seed, run_id));
        rng.set_stream(FILE_STREAM);
        let mut data = vec![0u8; self.file_size];
        rng.fill_bytes(&mut data);
        data
    }
}

/// Seed of run `run_id` within a scenario seeded with `base`.
pub fn run_seed(base: u64, run_id: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(run_id);
    rng.next_u64()
}

/// First-timestamp estimate for a run, with ties broken from the run seed.
pub fn predict(trace: &Trace, run_seed: u64) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(TIE_STREAM);
    first_timestamp_estimate(&observations(trace), &trace.root(), rng.next_u64())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: u64,
    pub seed: u64,
    /// `None` when the leech did not get the whole file.
    pub ttf: Option<Millis>,
    pub predicted: Option<PeerId>,
    pub truth: PeerId,
    pub correct: bool,
    pub messages_total: usize,
    pub want_haves_total: usize,
    pub file_intact: bool,
    pub relay_drained: bool,
    /// Simulator invariant violation, if the run aborted.
    pub error: Option<String>,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.ttf.is_some() && self.file_intact
    }
}

/// Runs one simulation of the scenario. Simulator errors are folded into the
/// result.
pub fn run_once(cfg: &ScenarioConfig, run_id: u64) -> RunResult {
    let sim = cfg.sim_config(run_id);
    let truth = cfg.leech_id();
    let mut result = RunResult {
        run_id,
        seed: sim.seed,
        ttf: None,
        predicted: None,
        truth,
        correct: false,
        messages_total: 0,
        want_haves_total: 0,
        file_intact: false,
        relay_drained: false,
        error: None,
    };
    let trace = match run_simulation(&cfg.topology(), &sim, &cfg.run_file(run_id), truth) {
        Ok(t) => t,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let estimate = predict(&trace, sim.seed);
    result.ttf = trace.ttf().filter(|_| trace.file_intact);
    result.predicted = estimate.peer();
    result.correct = estimate == Estimate::Source(truth);
    result.messages_total = trace.messages_total;
    result.want_haves_total = trace.count(MessageKind::WantHave);
    result.file_intact = trace.file_intact;
    result.relay_drained = trace.relays_drained();
    result
}

/// Runs every repetition of the scenario on the current rayon pool. Results
/// are ordered by run id whatever the execution order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<RunResult>, ExperimentError> {
    cfg.validate()?;
    Ok((0..cfg.runs as u64)
        .into_par_iter()
        .map(|i| run_once(cfg, i))
        .collect())
}
