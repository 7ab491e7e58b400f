//! Mean time to fetch for stock Bitswap (with a provider lookup) against
//! forwarding with several trickle delays.

use trickleswap::experiments::{run_scenario, LeechPosition, Mode, ScenarioConfig};
use trickleswap::SpreadingStrategy;

fn mean_ttf(cfg: &ScenarioConfig) -> Result<f64, Box<dyn std::error::Error>> {
    let runs = run_scenario(cfg)?;
    let ttfs: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.ttf)
        .map(|t| t as f64)
        .collect();
    Ok(ttfs.iter().sum::<f64>() / ttfs.len().max(1) as f64)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for leech in [LeechPosition::Center, LeechPosition::Edge] {
        for latency_ms in [50, 100, 150] {
            let common = ScenarioConfig {
                leech,
                latency_ms,
                eavesdroppers: 0,
                file_size: 512,
                runs: 20,
                seed: 42,
                ..ScenarioConfig::default()
            };
            let base = mean_ttf(&ScenarioConfig {
                mode: Mode::Baseline,
                ..common.clone()
            })?;
            print!("{leech:>6} L={latency_ms:<3} baseline {base:>6.0}");
            for delay in [0, 50, 150, 300] {
                let fwd = mean_ttf(&ScenarioConfig {
                    strategy: SpreadingStrategy::trickle(delay),
                    ..common.clone()
                })?;
                print!("  d={delay}: {fwd:>6.0}");
            }
            println!();
        }
    }
    Ok(())
}
