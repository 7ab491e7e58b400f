//! Passive eavesdroppers and the first-timestamp source estimator.
//!
//! Colluding eavesdroppers pool their logs. The estimator names the sender of
//! the earliest WANT-HAVE for the target cid as the requester; exact ties are
//! broken uniformly at random from a caller-supplied seed.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::content::Cid;
use crate::error::ExperimentError;
use crate::message::MessageKind;
use crate::node::PeerId;
use crate::simnet::{Role, Topology, Trace, TraceLine, TRACE_CID_PREFIX_BYTES};
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub observer: PeerId,
    pub sender: PeerId,
    pub cid: Cid,
    pub kind: MessageKind,
    pub time: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimate {
    Source(PeerId),
    /// No WANT-HAVE for the target was observed.
    Abstain,
}

impl Estimate {
    pub fn peer(self) -> Option<PeerId> {
        match self {
            Estimate::Source(p) => Some(p),
            Estimate::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub run_id: u64,
    pub predicted: Option<PeerId>,
    pub truth: PeerId,
    pub correct: bool,
}

impl Prediction {
    pub fn new(run_id: u64, estimate: Estimate, truth: PeerId) -> Self {
        let predicted = estimate.peer();
        Prediction {
            run_id,
            predicted,
            truth,
            correct: predicted == Some(truth),
        }
    }
}

/// Everything the eavesdroppers of a simulated run received.
pub fn observations(trace: &Trace) -> Vec<Observation> {
    trace
        .events
        .iter()
        .filter(|e| trace.is_eavesdropper(e.to))
        .map(|e| Observation {
            observer: e.to,
            sender: e.from,
            cid: e.cid,
            kind: e.kind,
            time: e.time,
        })
        .collect()
}

/// Rebuilds observations of `target` from a JSON-lines trace dump. Lines are
/// matched to `target` by cid prefix; lines naming unknown nodes are skipped.
pub fn observations_from_lines(
    lines: &[TraceLine],
    topo: &Topology,
    target: &Cid,
) -> Vec<Observation> {
    let prefix = target.prefix(TRACE_CID_PREFIX_BYTES);
    lines
        .iter()
        .filter(|l| l.cid == prefix)
        .filter_map(|l| {
            let observer = topo.id_of(&l.to)?;
            let sender = topo.id_of(&l.from)?;
            (topo.role(observer) == Some(Role::Eavesdropper)).then_some(Observation {
                observer,
                sender,
                cid: *target,
                kind: l.kind,
                time: l.time,
            })
        })
        .collect()
}

pub fn first_timestamp_estimate(
    observations: &[Observation],
    target: &Cid,
    tie_seed: u64,
) -> Estimate {
    let wants = observations
        .iter()
        .filter(|o| o.kind == MessageKind::WantHave && o.cid == *target);
    let Some(first) = wants.clone().map(|o| o.time).min() else {
        return Estimate::Abstain;
    };
    let tied: Vec<PeerId> = wants
        .filter(|o| o.time == first)
        .map(|o| o.sender)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if tied.len() == 1 {
        return Estimate::Source(tied[0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    Estimate::Source(tied[rng.random_range(0..tied.len())])
}

/// Share of correct predictions; abstentions count as wrong.
pub fn prediction_accuracy(predictions: &[Prediction]) -> Result<f64, ExperimentError> {
    if predictions.is_empty() {
        return Err(ExperimentError::EmptyPredictions);
    }
    let correct = predictions.iter().filter(|p| p.correct).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Writes `run_id,predicted,truth,correct` rows; an abstention leaves
/// `predicted` empty.
pub fn write_predictions_csv<W: Write>(
    out: W,
    predictions: &[Prediction],
    name: impl Fn(PeerId) -> String,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "predicted", "truth", "correct"])?;
    for p in predictions {
        w.write_record([
            p.run_id.to_string(),
            p.predicted.map(&name).unwrap_or_default(),
            name(p.truth),
            p.correct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::cid_of;
    use proptest::prelude::*;

    fn obs(observer: u16, sender: u16, time: Millis, cid: Cid) -> Observation {
        Observation {
            observer: PeerId(observer),
            sender: PeerId(sender),
            cid,
            kind: MessageKind::WantHave,
            time,
        }
    }

    fn root() -> Cid {
        cid_of(b"root").unwrap()
    }

    #[test]
    fn earliest_want_wins() {
        let log = [obs(11, 5, 60, root()), obs(11, 2, 210, root())];
        assert_eq!(
            first_timestamp_estimate(&log, &root(), 0),
            Estimate::Source(PeerId(5))
        );
    }

    #[test]
    fn empty_log_abstains() {
        assert_eq!(first_timestamp_estimate(&[], &root(), 0), Estimate::Abstain);
    }

    #[test]
    fn logs_of_colluding_observers_are_merged() {
        let log = [obs(11, 5, 60, root()), obs(12, 0, 55, root())];
        assert_eq!(
            first_timestamp_estimate(&log, &root(), 0),
            Estimate::Source(PeerId(0))
        );
    }

    #[test]
    fn other_cids_and_kinds_are_ignored() {
        let other = cid_of(b"other").unwrap();
        let mut cancel = obs(11, 3, 1, root());
        cancel.kind = MessageKind::Cancel;
        let log = [cancel, obs(11, 4, 2, other), obs(11, 7, 90, root())];
        assert_eq!(
            first_timestamp_estimate(&log, &root(), 0),
            Estimate::Source(PeerId(7))
        );
    }

    #[test]
    fn ties_are_broken_by_seed_and_cover_both_senders() {
        let log = [obs(11, 1, 100, root()), obs(12, 2, 100, root())];
        let picks: BTreeSet<_> = (0..64)
            .map(|s| first_timestamp_estimate(&log, &root(), s))
            .collect();
        assert_eq!(picks.len(), 2);
        assert_eq!(
            first_timestamp_estimate(&log, &root(), 9),
            first_timestamp_estimate(&log, &root(), 9)
        );
        // the same sender seen twice at once is not a tie
        let dup = [obs(11, 1, 100, root()), obs(12, 1, 100, root())];
        for s in 0..8 {
            assert_eq!(
                first_timestamp_estimate(&dup, &root(), s),
                Estimate::Source(PeerId(1))
            );
        }
    }

    #[test]
    fn accuracy_examples() {
        let make = |correct: usize, total: usize| -> Vec<Prediction> {
            (0..total)
                .map(|i| {
                    let est = if i < correct {
                        Estimate::Source(PeerId(5))
                    } else {
                        Estimate::Source(PeerId(2))
                    };
                    Prediction::new(i as u64, est, PeerId(5))
                })
                .collect()
        };
        assert!((prediction_accuracy(&make(20, 50)).unwrap() - 0.40).abs() < 1e-12);
        assert!((prediction_accuracy(&make(24, 30)).unwrap() - 0.80).abs() < 1e-12);
        assert_eq!(prediction_accuracy(&make(7, 7)).unwrap(), 1.0);
        assert!(matches!(
            prediction_accuracy(&[]),
            Err(ExperimentError::EmptyPredictions)
        ));
        let abstained = [Prediction::new(0, Estimate::Abstain, PeerId(5))];
        assert_eq!(prediction_accuracy(&abstained).unwrap(), 0.0);
    }

    #[test]
    fn predictions_csv() {
        let preds = [
            Prediction::new(0, Estimate::Source(PeerId(5)), PeerId(5)),
            Prediction::new(1, Estimate::Abstain, PeerId(5)),
        ];
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, &preds, |p| format!("n{}", p.0)).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "run_id,predicted,truth,correct\n0,n5,n5,true\n1,,n5,false\n"
        );
    }

    fn log_strategy() -> impl Strategy<Value = Vec<(u16, u16, Millis)>> {
        proptest::collection::vec((11u16..14, 0u16..11, 0u64..50), 0..25)
    }

    fn build(raw: &[(u16, u16, Millis)]) -> Vec<Observation> {
        raw.iter().map(|&(o, s, t)| obs(o, s, t, root())).collect()
    }

    proptest! {
        #[test]
        fn invariant_under_time_shift(raw in log_strategy(), shift in 0u64..10_000, seed: u64) {
            let log = build(&raw);
            let shifted: Vec<_> = log.iter().map(|o| Observation { time: o.time + shift, ..*o }).collect();
            prop_assert_eq!(
                first_timestamp_estimate(&log, &root(), seed),
                first_timestamp_estimate(&shifted, &root(), seed)
            );
        }

        #[test]
        fn matches_naive_sorted_scan(raw in log_strategy(), seed: u64) {
            let log = build(&raw);
            let mut sorted: Vec<(Millis, usize)> = log.iter().enumerate().map(|(i, o)| (o.time, i)).collect();
            sorted.sort();
            let got = first_timestamp_estimate(&log, &root(), seed);
            match sorted.first() {
                None => prop_assert_eq!(got, Estimate::Abstain),
                Some(&(t, _)) => {
                    let tied: BTreeSet<PeerId> = sorted
                        .iter()
                        .take_while(|(u, _)| *u == t)
                        .map(|&(_, i)| log[i].sender)
                        .collect();
                    prop_assert!(tied.contains(&got.peer().unwrap()));
                    if tied.len() == 1 {
                        prop_assert_eq!(got, Estimate::Source(log[sorted[0].1].sender));
                    }
                }
            }
        }

        #[test]
        fn merged_estimate_is_earliest_of_per_observer_estimates(raw in log_strategy(), seed: u64) {
            let log = build(&raw);
            let merged = first_timestamp_estimate(&log, &root(), seed);
            let per_observer_min = (11u16..14)
                .filter_map(|o| log.iter().filter(|x| x.observer == PeerId(o)).map(|x| x.time).min())
                .min();
            match merged {
                Estimate::Abstain => prop_assert!(per_observer_min.is_none()),
                Estimate::Source(p) => {
                    let t = per_observer_min.unwrap();
                    prop_assert!(log.iter().any(|x| x.sender == p && x.time == t));
                }
            }
        }
    }
}
