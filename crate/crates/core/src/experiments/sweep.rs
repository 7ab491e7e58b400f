use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{default_runs, run_once, LeechPosition, Mode, RunResult, ScenarioConfig};
use crate::error::ExperimentError;
use crate::simnet::{DEFAULT_BLOCK_SIZE, DEFAULT_MAX_TIME_MS};
use crate::spread::SpreadingStrategy;
use crate::Millis;

/// Coordinates of one sweep cell. Repetitions of a cell share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub mode: Mode,
    pub leech: LeechPosition,
    pub latency_ms: Millis,
    pub trickle_delay_ms: Millis,
    pub eavesdroppers: usize,
    pub file_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub latencies: Vec<Millis>,
    pub delays: Vec<Millis>,
    pub eavesdroppers: Vec<usize>,
    pub file_sizes: Vec<usize>,
    pub leeches: Vec<LeechPosition>,
    pub repetitions: usize,
    /// Runs per repetition; `None` picks the reference count for the
    /// eavesdropper number.
    pub runs: Option<usize>,
    pub batch: usize,
    /// Adds one stock Bitswap cell per (latency, file size, leech).
    pub include_baseline: bool,
    pub dht_lookup_rtts: u32,
    pub block_size: usize,
    pub max_time_ms: Millis,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid::reference()
    }
}

impl SweepGrid {
    /// Latencies of 50, 100 and 150 ms, trickle delays 0 to 300 ms in 50 ms
    /// steps, 1, 4 and 7 eavesdroppers, three file sizes, both leeches,
    /// three repetitions, plus baseline cells.
    pub fn reference() -> Self {
        SweepGrid {
            latencies: vec![50, 100, 150],
            delays: (0..=300).step_by(50).collect(),
            eavesdroppers: vec![1, 4, 7],
            file_sizes: vec![512, 150 * 1024, 1024 * 1024],
            leeches: vec![LeechPosition::Center, LeechPosition::Edge],
            repetitions: 3,
            runs: None,
            batch: 1,
            include_baseline: true,
            dht_lookup_rtts: 1,
            block_size: DEFAULT_BLOCK_SIZE,
            max_time_ms: DEFAULT_MAX_TIME_MS,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let empty = self.latencies.is_empty()
            || self.delays.is_empty()
            || self.eavesdroppers.is_empty()
            || self.file_sizes.is_empty()
            || self.leeches.is_empty()
            || self.repetitions == 0;
        if empty {
            return Err(ExperimentError::InvalidConfig("sweep grid is empty".into()));
        }
        if self.batch == 0 {
            return Err(ExperimentError::InvalidConfig(
                "trickle batch must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Every cell key in output order: forwarding cells first, then baseline.
    pub fn keys(&self) -> Vec<CellKey> {
        let mut keys = Vec::new();
        for &leech in &self.leeches {
            for &file_size in &self.file_sizes {
                for &eavesdroppers in &self.eavesdroppers {
                    for &latency_ms in &self.latencies {
                        for &trickle_delay_ms in &self.delays {
                            keys.push(CellKey {
                                mode: Mode::Forwarding,
                                leech,
                                latency_ms,
                                trickle_delay_ms,
                                eavesdroppers,
                                file_size,
                            });
                        }
                    }
                }
            }
        }
        if self.include_baseline {
            for &leech in &self.leeches {
                for &file_size in &self.file_sizes {
                    for &latency_ms in &self.latencies {
                        keys.push(CellKey {
                            mode: Mode::Baseline,
                            leech,
                            latency_ms,
                            trickle_delay_ms: 0,
                            eavesdroppers: 0,
                            file_size,
                        });
                    }
                }
            }
        }
        keys
    }

    /// Scenario of one repetition of one cell.
    pub fn scenario(&self, key: &CellKey, repetition: usize, base_seed: u64) -> ScenarioConfig {
        let strategy = match key.mode {
            Mode::Baseline => SpreadingStrategy::Immediate,
            Mode::Forwarding => SpreadingStrategy::Trickle {
                delay_ms: key.trickle_delay_ms,
                batch: self.batch,
            },
        };
        ScenarioConfig {
            mode: key.mode,
            leech: key.leech,
            latency_ms: key.latency_ms,
            strategy,
            eavesdroppers: key.eavesdroppers,
            file_size: key.file_size,
            runs: self.runs.unwrap_or_else(|| default_runs(key.eavesdroppers)),
            seed: cell_seed(base_seed, key, repetition),
            dht_lookup_rtts: self.dht_lookup_rtts,
            block_size: self.block_size,
            max_time_ms: self.max_time_ms,
        }
    }
}

/// Seed of one repetition of one cell, a hash of the base seed and the cell
/// coordinates.
pub fn cell_seed(base_seed: u64, key: &CellKey, repetition: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update([key.mode as u8, key.leech as u8]);
    for v in [
        key.latency_ms,
        key.trickle_delay_ms,
        key.eavesdroppers as u64,
        key.file_size as u64,
        repetition as u64,
    ] {
        h.update(v.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub key: CellKey,
    pub repetition: usize,
    pub config: ScenarioConfig,
    pub results: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub key: CellKey,
    pub runs: usize,
    pub completed: usize,
    pub failures: usize,
    pub mean_ttf_ms: Option<f64>,
    pub stddev_ttf_ms: Option<f64>,
    /// Correct predictions over all runs; `None` for a cell without runs or
    /// without eavesdroppers.
    pub accuracy: Option<f64>,
    pub mean_messages: Option<f64>,
}

impl CellSummary {
    pub fn from_results<'a>(
        key: CellKey,
        results: impl IntoIterator<Item = &'a RunResult>,
    ) -> Self {
        let results: Vec<&RunResult> = results.into_iter().collect();
        let ttfs: Vec<f64> = results
            .iter()
            .filter(|r| r.completed())
            .filter_map(|r| r.ttf)
            .map(|t| t as f64)
            .collect();
        let runs = results.len();
        let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let mean_ttf_ms = mean(&ttfs);
        let stddev_ttf_ms = mean_ttf_ms.map(|m| {
            if ttfs.len() < 2 {
                0.0
            } else {
                let ss: f64 = ttfs.iter().map(|t| (t - m).powi(2)).sum();
                (ss / (ttfs.len() - 1) as f64).sqrt()
            }
        });
        let messages: Vec<f64> = results.iter().map(|r| r.messages_total as f64).collect();
        CellSummary {
            key,
            runs,
            completed: ttfs.len(),
            failures: runs - ttfs.len(),
            mean_ttf_ms,
            stddev_ttf_ms,
            accuracy: (runs > 0 && key.eavesdroppers > 0)
                .then(|| results.iter().filter(|r| r.correct).count() as f64 / runs as f64),
            mean_messages: mean(&messages),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub base_seed: u64,
    /// Every executed repetition, ordered by cell then repetition.
    pub cells: Vec<CellRun>,
    /// One entry per cell key, pooling all repetitions.
    pub summaries: Vec<CellSummary>,
}

impl SweepSummary {
    pub fn get(&self, key: &CellKey) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.key == *key)
    }

    pub fn runs_of<'a>(&'a self, key: &'a CellKey) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.cells
            .iter()
            .filter(move |c| c.key == *key)
            .flat_map(|c| c.results.iter())
    }

    pub fn all_runs(&self) -> impl Iterator<Item = &RunResult> {
        self.cells.iter().flat_map(|c| c.results.iter())
    }

    pub fn total_runs(&self) -> usize {
        self.cells.iter().map(|c| c.results.len()).sum()
    }
}

/// Runs every cell and repetition of the grid on the current rayon pool.
/// Output order is fixed by the grid, so the thread count never changes it.
pub fn sweep(grid: &SweepGrid, base_seed: u64) -> Result<SweepSummary, ExperimentError> {
    grid.validate()?;
    let keys = grid.keys();
    let mut cells = Vec::new();
    for key in &keys {
        for rep in 0..grid.repetitions {
            let config = grid.scenario(key, rep, base_seed);
            config.validate()?;
            cells.push(CellRun {
                key: *key,
                repetition: rep,
                config,
                results: Vec::new(),
            });
        }
    }
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..cell.config.runs as u64).map(move |r| (c, r)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(c, r)| run_once(&cells[c].config, r))
        .collect();
    for (&(c, _), result) in jobs.iter().zip(results) {
        cells[c].results.push(result);
    }
    let summaries = keys
        .iter()
        .map(|key| {
            let runs = cells
                .iter()
                .filter(|c| c.key == *key)
                .flat_map(|c| c.results.iter());
            CellSummary::from_results(*key, runs)
        })
        .collect();
    Ok(SweepSummary {
        base_seed,
        cells,
        summaries,
    })
}

/// Runs a single scenario as a one-cell sweep so it can be written with
/// [`super::write_results`].
pub fn run_single(cfg: &ScenarioConfig) -> Result<SweepSummary, ExperimentError> {
    cfg.validate()?;
    let key = CellKey {
        mode: cfg.mode,
        leech: cfg.leech,
        latency_ms: cfg.latency_ms,
        trickle_delay_ms: cfg.trickle_delay(),
        eavesdroppers: cfg.eavesdroppers,
        file_size: cfg.file_size,
    };
    let results = super::run_scenario(cfg)?;
    let summary = CellSummary::from_results(key, &results);
    Ok(SweepSummary {
        base_seed: cfg.seed,
        cells: vec![CellRun {
            key,
            repetition: 0,
            config: cfg.clone(),
            results,
        }],
        summaries: vec![summary],
    })
}
