//! A small grid sweep written to `runs.csv`, `summary.csv` and `config.json`.
//!
//! Usage: `parameter_sweep [out_dir]`

use std::path::PathBuf;

use trickleswap::experiments::{sweep, write_results, LeechPosition, SweepGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "sweep-results".into())
        .into();

    let grid = SweepGrid {
        latencies: vec![100],
        delays: vec![0, 150, 300],
        eavesdroppers: vec![1, 4],
        file_sizes: vec![512],
        leeches: vec![LeechPosition::Center],
        repetitions: 2,
        runs: Some(20),
        ..SweepGrid::reference()
    };
    let summary = sweep(&grid, 42)?;

    for s in &summary.summaries {
        println!(
            "{:>10} d={:<3} e={} ttf={:>7.1} acc={}",
            s.key.mode,
            s.key.trickle_delay_ms,
            s.key.eavesdroppers,
            s.mean_ttf_ms.unwrap_or(f64::NAN),
            s.accuracy.map_or("-".into(), |a| format!("{a:.2}")),
        );
    }
    for path in write_results(&summary, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
