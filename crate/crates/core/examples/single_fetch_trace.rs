//! Simulate one fetch on the reference topology and print its JSON-lines trace.
//!
//! Usage: `single_fetch_trace [trickle_delay_ms] [run_id]`

use std::io;

use trickleswap::experiments::{predict, ScenarioConfig};
use trickleswap::simnet::run_simulation;
use trickleswap::SpreadingStrategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let delay: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(100);
    let run_id: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(0);

    let cfg = ScenarioConfig {
        strategy: SpreadingStrategy::trickle(delay),
        file_size: 512,
        seed: 42,
        ..ScenarioConfig::default()
    };
    let topo = cfg.topology();
    let sim = cfg.sim_config(run_id);
    let trace = run_simulation(&topo, &sim, &cfg.run_file(run_id), cfg.leech_id())?;

    trace.write_jsonl(io::stdout().lock())?;

    let guess = predict(&trace, sim.seed)
        .peer()
        .map(|p| topo.name(p).to_string());
    eprintln!(
        "ttf {:?} ms, {} messages, eavesdropper guess {:?} (truth {})",
        trace.ttf(),
        trace.messages_total,
        guess,
        topo.name(trace.leech),
    );
    Ok(())
}
