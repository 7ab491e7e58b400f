//! How often a first-timestamp eavesdropper names the leech as the trickle
//! delay grows.

use trickleswap::experiments::{run_scenario, LeechPosition, ScenarioConfig};
use trickleswap::SpreadingStrategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:>8} {:>6} {:>5} {:>9}",
        "leech", "spies", "delay", "accuracy"
    );
    for leech in [LeechPosition::Center, LeechPosition::Edge] {
        for eavesdroppers in [1, 7] {
            for delay in [0, 100, 300] {
                let cfg = ScenarioConfig {
                    leech,
                    eavesdroppers,
                    strategy: SpreadingStrategy::trickle(delay),
                    file_size: 512,
                    runs: 100,
                    seed: 42,
                    ..ScenarioConfig::default()
                };
                let runs = run_scenario(&cfg)?;
                let hits = runs.iter().filter(|r| r.correct).count();
                let acc = hits as f64 / runs.len() as f64;
                println!("{leech:>8} {eavesdroppers:>6} {delay:>5} {acc:>9.2}");
            }
        }
    }
    Ok(())
}
