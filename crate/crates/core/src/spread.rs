//! Source-obfuscation spreading: when each target of a broadcast gets its copy.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::StrategyError;
use crate::node::PeerId;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpreadingStrategy {
    /// Every target receives the message at once (stock Bitswap).
    Immediate,
    /// Targets are shuffled, then released in rounds of `batch` peers with
    /// `delay_ms` between rounds. The first round goes out immediately.
    Trickle { delay_ms: Millis, batch: usize },
    /// Each target gets an independent exponentially distributed delay,
    /// rounded to the nearest millisecond.
    Diffusion { mean_delay_ms: f64 },
}

impl Default for SpreadingStrategy {
    fn default() -> Self {
        SpreadingStrategy::Trickle {
            delay_ms: 100,
            batch: 1,
        }
    }
}

impl SpreadingStrategy {
    pub fn trickle(delay_ms: Millis) -> Self {
        SpreadingStrategy::Trickle { delay_ms, batch: 1 }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        match *self {
            SpreadingStrategy::Immediate => Ok(()),
            SpreadingStrategy::Trickle { batch: 0, .. } => Err(StrategyError::ZeroBatch),
            SpreadingStrategy::Trickle { .. } => Ok(()),
            SpreadingStrategy::Diffusion { mean_delay_ms }
                if mean_delay_ms.is_nan() || mean_delay_ms <= 0.0 =>
            {
                Err(StrategyError::NonPositiveMean(mean_delay_ms))
            }
            SpreadingStrategy::Diffusion { .. } => Ok(()),
        }
    }

    /// Trickle delay, or zero for the other strategies.
    pub fn trickle_delay(&self) -> Millis {
        match *self {
            SpreadingStrategy::Trickle { delay_ms, .. } => delay_ms,
            _ => 0,
        }
    }
}

/// Assigns a send time to every target. Each target appears exactly once in
/// the output, which is ordered by dispatch (trickle order for `Trickle`,
/// input order otherwise).
///
/// `Immediate` does not touch the generator, so stock Bitswap runs consume no
/// randomness.
pub fn schedule_spread<R: Rng + ?Sized>(
    strategy: &SpreadingStrategy,
    rng: &mut R,
    targets: &[PeerId],
    now: Millis,
) -> Vec<(PeerId, Millis)> {
    match *strategy {
        SpreadingStrategy::Immediate => targets.iter().map(|&p| (p, now)).collect(),
        SpreadingStrategy::Trickle { delay_ms, batch } => {
            let batch = batch.max(1) as u64;
            let mut order = targets.to_vec();
            order.shuffle(rng);
            order
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p, now + (i as u64 / batch) * delay_ms))
                .collect()
        }
        SpreadingStrategy::Diffusion { mean_delay_ms } => {
            let exp = Exp::new(1.0 / mean_delay_ms).expect("validated mean");
            targets
                .iter()
                .map(|&p| {
                    let d: f64 = exp.sample(rng);
                    (p, now + d.round() as u64)
                })
                .collect()
        }
    }
}
