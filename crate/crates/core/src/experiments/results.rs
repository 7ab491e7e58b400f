use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::scenario::{LeechPosition, Mode, ScenarioConfig};
use super::sweep::{CellKey, SweepSummary};
use crate::error::ExperimentError;
use crate::Millis;

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_FILE: &str = "config.json";

/// One row of `runs.csv`. Empty `ttf_ms` marks a failed fetch and empty
/// `predicted` an abstaining estimator.
#[derive(Serialize)]
struct RunRow<'a> {
    mode: Mode,
    leech: LeechPosition,
    latency_ms: Millis,
    trickle_delay_ms: Millis,
    eavesdroppers: usize,
    file_size: usize,
    repetition: usize,
    run_id: u64,
    seed: u64,
    ttf_ms: Option<Millis>,
    predicted: Option<&'a str>,
    truth: &'a str,
    correct: bool,
    messages_total: usize,
    want_haves_total: usize,
    file_intact: bool,
    relay_drained: bool,
    error: Option<&'a str>,
}

/// One row of `summary.csv`; repetitions of a cell are pooled.
#[derive(Serialize)]
struct SummaryRow {
    mode: Mode,
    leech: LeechPosition,
    latency_ms: Millis,
    trickle_delay_ms: Millis,
    eavesdroppers: usize,
    file_size: usize,
    runs: usize,
    completed: usize,
    failures: usize,
    mean_ttf_ms: String,
    stddev_ttf_ms: String,
    accuracy: String,
    mean_messages: String,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    base_seed: u64,
    cells: Vec<CellEcho<'a>>,
}

#[derive(Serialize)]
struct CellEcho<'a> {
    key: &'a CellKey,
    repetition: usize,
    config: &'a ScenarioConfig,
}

fn fixed(v: Option<f64>, places: usize) -> String {
    v.map(|x| format!("{x:.places$}")).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `runs.csv`, `summary.csv` and `config.json` into `dir`, creating
/// it if needed. Identical summaries produce identical bytes.
pub fn write_results(summary: &SweepSummary, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let runs_path = dir.join(RUNS_FILE);
    let mut w = csv::Writer::from_path(&runs_path).map_err(csv_err(&runs_path))?;
    for cell in &summary.cells {
        let topo = cell.config.topology();
        for r in &cell.results {
            w.serialize(RunRow {
                mode: cell.key.mode,
                leech: cell.key.leech,
                latency_ms: cell.key.latency_ms,
                trickle_delay_ms: cell.key.trickle_delay_ms,
                eavesdroppers: cell.key.eavesdroppers,
                file_size: cell.key.file_size,
                repetition: cell.repetition,
                run_id: r.run_id,
                seed: r.seed,
                ttf_ms: r.ttf,
                predicted: r.predicted.map(|p| topo.name(p)),
                truth: topo.name(r.truth),
                correct: r.correct,
                messages_total: r.messages_total,
                want_haves_total: r.want_haves_total,
                file_intact: r.file_intact,
                relay_drained: r.relay_drained,
                error: r.error.as_deref(),
            })
            .map_err(csv_err(&runs_path))?;
        }
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: runs_path.clone(),
        source,
    })?;

    let summary_path = dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&summary_path).map_err(csv_err(&summary_path))?;
    for s in &summary.summaries {
        w.serialize(SummaryRow {
            mode: s.key.mode,
            leech: s.key.leech,
            latency_ms: s.key.latency_ms,
            trickle_delay_ms: s.key.trickle_delay_ms,
            eavesdroppers: s.key.eavesdroppers,
            file_size: s.key.file_size,
            runs: s.runs,
            completed: s.completed,
            failures: s.failures,
            mean_ttf_ms: fixed(s.mean_ttf_ms, 3),
            stddev_ttf_ms: fixed(s.stddev_ttf_ms, 3),
            accuracy: fixed(s.accuracy, 4),
            mean_messages: fixed(s.mean_messages, 3),
        })
        .map_err(csv_err(&summary_path))?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: summary_path.clone(),
        source,
    })?;

    let config_path = dir.join(CONFIG_FILE);
    let echo = ConfigEcho {
        base_seed: summary.base_seed,
        cells: summary
            .cells
            .iter()
            .map(|c| CellEcho {
                key: &c.key,
                repetition: c.repetition,
                config: &c.config,
            })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&echo).map_err(|source| ExperimentError::Json {
        path: config_path.clone(),
        source,
    })?;
    json.push(b'\n');
    fs::write(&config_path, json).map_err(|source| ExperimentError::Io {
        path: config_path.clone(),
        source,
    })?;

    Ok(vec![runs_path, summary_path, config_path])
}

/// Parses sizes such as `512`, `512B`, `150KiB` or `1MiB`.
pub fn parse_size(text: &str) -> Result<usize, String> {
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, unit) = t.split_at(split);
    let n: usize = digits
        .parse()
        .map_err(|_| format!("`{text}` is not a size"))?;
    let mult = match unit.trim() {
        "" | "B" => 1,
        "KiB" => 1024,
        "MiB" => 1024 * 1024,
        other => return Err(format!("unknown size unit `{other}` (use B, KiB or MiB)")),
    };
    n.checked_mul(mult)
        .ok_or_else(|| format!("`{text}` is too large"))
}

/// Inverse of [`parse_size`] for exact multiples.
pub fn format_size(bytes: usize) -> String {
    const MIB: usize = 1024 * 1024;
    if bytes >= MIB && bytes.is_multiple_of(MIB) {
        format!("{}MiB", bytes / MIB)
    } else if bytes >= 1024 && bytes.is_multiple_of(1024) {
        format!("{}KiB", bytes / 1024)
    } else {
        format!("{bytes}B")
    }
}
