//! When each neighbor receives a broadcast under the three spreading strategies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trickleswap::{schedule_spread, PeerId, SpreadingStrategy};

fn main() {
    let targets: Vec<PeerId> = (1..=6).map(PeerId).collect();
    let strategies = [
        SpreadingStrategy::Immediate,
        SpreadingStrategy::trickle(100),
        SpreadingStrategy::Trickle {
            delay_ms: 100,
            batch: 2,
        },
        SpreadingStrategy::Diffusion {
            mean_delay_ms: 100.0,
        },
    ];

    for strategy in strategies {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = schedule_spread(&strategy, &mut rng, &targets, 1_000);
        let shown: Vec<String> = plan.iter().map(|(p, t)| format!("{p}@{t}")).collect();
        println!("{strategy:?}\n  {}", shown.join("  "));
    }
}
