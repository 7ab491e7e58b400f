use super::*;
use crate::content::cid_of;
use crate::message::MessageKind;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn peers(ids: &[u16]) -> Vec<PeerId> {
    ids.iter().map(|&i| PeerId(i)).collect()
}

fn node(id: u16, neighbors: &[u16], config: NodeConfig) -> NodeState {
    NodeState::new(PeerId(id), peers(neighbors), config, 7).unwrap()
}

fn immediate_forwarder() -> NodeConfig {
    NodeConfig::forwarding(SpreadingStrategy::Immediate)
}

fn block_of(size: usize, fill: u8) -> Block {
    Block::new(vec![fill; size]).unwrap()
}

fn kinds(sends: &[TimedSend]) -> Vec<(PeerId, MessageKind)> {
    sends
        .iter()
        .flat_map(|s| s.message.parts().map(move |(k, _)| (s.to, k)))
        .collect()
}

fn want_have_msg(cid: Cid) -> BitswapMessage {
    BitswapMessage::from_entries(vec![WantlistEntry::want_have(cid)]).unwrap()
}

fn cancel_msg(cid: Cid) -> BitswapMessage {
    BitswapMessage::from_entries(vec![WantlistEntry::cancel(cid)]).unwrap()
}

#[test]
fn rejects_bad_neighbor_lists() {
    assert!(NodeState::new(PeerId(1), peers(&[1, 2]), NodeConfig::default(), 0).is_err());
    assert!(NodeState::new(PeerId(1), peers(&[2, 2]), NodeConfig::default(), 0).is_err());
}

#[test]
fn rejects_messages_from_strangers() {
    let mut n = node(0, &[1], NodeConfig::default());
    let err = n
        .handle_message(PeerId(9), &want_have_msg(cid_of(b"x").unwrap()), 0)
        .unwrap_err();
    assert!(matches!(err, ProtocolError::NotANeighbor { .. }));
}

#[test]
fn want_content_immediate_reaches_every_neighbor_now() {
    let mut leech = node(0, &[1, 2, 3], NodeConfig::baseline());
    let cid = cid_of(b"file").unwrap();
    let sends = leech.want_content(&[cid], 40);
    assert_eq!(sends.len(), 3);
    assert!(sends.iter().all(|s| s.at == 40 && s.ticket.is_none()));
    assert_eq!(
        kinds(&sends),
        vec![
            (PeerId(1), MessageKind::WantHave),
            (PeerId(2), MessageKind::WantHave),
            (PeerId(3), MessageKind::WantHave)
        ]
    );
    assert!(sends.iter().all(|s| s.message.entries()[0].send_dont_have));
}

#[test]
fn want_content_for_held_block_sends_nothing() {
    let mut leech = node(0, &[1, 2, 3], NodeConfig::default());
    let block = block_of(10, 1);
    leech.insert_block(block.clone());
    assert!(leech.want_content(&[*block.cid()], 0).is_empty());
    assert_eq!(leech.sessions()[0].completed_at, Some(0));
}

#[test]
fn want_content_trickles_in_generator_order() {
    // neighbors 1..=3 are honest, 11 is an eavesdropper link
    let neighbors = [1, 2, 3, 11];
    let mut leech = node(
        5,
        &neighbors,
        NodeConfig::forwarding(SpreadingStrategy::trickle(100)),
    );
    let cid = cid_of(b"root").unwrap();
    let sends = leech.want_content(&[cid], 0);

    // independent replay of the node's generator: same seed and stream,
    // one shuffle of the neighbor list
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    rng.set_stream(5);
    let mut expected = peers(&neighbors);
    expected.shuffle(&mut rng);

    let got: Vec<(PeerId, Millis)> = sends.iter().map(|s| (s.to, s.at)).collect();
    let want: Vec<(PeerId, Millis)> = expected
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, 100 * i as u64))
        .collect();
    assert_eq!(got, want);
    assert!(sends[0].ticket.is_none());
    assert!(sends[1..].iter().all(|s| s.ticket.is_some()));
}

#[test]
fn small_block_answered_with_the_block() {
    let mut seed = node(10, &[7, 8, 9], NodeConfig::default());
    let block = block_of(512, 3);
    seed.insert_block(block.clone());
    let out = seed
        .handle_message(PeerId(8), &want_have_msg(*block.cid()), 5)
        .unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(8), MessageKind::Block)]);
    assert_eq!(out[0].message.blocks()[0], block);
    assert_eq!(out[0].at, 5);
}

#[test]
fn large_block_answered_with_have() {
    let mut seed = node(10, &[7, 8, 9], NodeConfig::default());
    let block = block_of(150 * 1024, 3);
    seed.insert_block(block.clone());
    let out = seed
        .handle_message(PeerId(7), &want_have_msg(*block.cid()), 5)
        .unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(7), MessageKind::Have)]);
}

#[test]
fn threshold_is_strict() {
    let mut seed = node(10, &[7], NodeConfig::default());
    let block = block_of(1024, 3);
    seed.insert_block(block.clone());
    let out = seed
        .handle_message(PeerId(7), &want_have_msg(*block.cid()), 0)
        .unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(7), MessageKind::Have)]);
}

#[test]
fn cancel_without_interest_is_a_noop() {
    let mut n = node(3, &[0, 1], immediate_forwarder());
    let before = format!("{:?}", n);
    let out = n
        .handle_message(PeerId(0), &cancel_msg(cid_of(b"q").unwrap()), 9)
        .unwrap();
    assert!(out.is_empty());
    assert_eq!(before, format!("{:?}", n));
}

#[test]
fn forwarder_relays_first_want_and_declines() {
    let mut relay = node(3, &[0, 1, 2, 6], immediate_forwarder());
    let cid = cid_of(b"c").unwrap();
    let out = relay
        .handle_message(PeerId(2), &want_have_msg(cid), 100)
        .unwrap();
    assert_eq!(
        kinds(&out),
        vec![
            (PeerId(2), MessageKind::DontHave),
            (PeerId(0), MessageKind::WantHave),
            (PeerId(1), MessageKind::WantHave),
            (PeerId(6), MessageKind::WantHave)
        ]
    );
    assert_eq!(
        relay.relay_session().interested_in(&cid).unwrap(),
        &[PeerId(2)].into()
    );
    assert!(relay.relay_session().forwarded().contains(&cid));
}

#[test]
fn second_requester_is_recorded_without_respreading() {
    let mut relay = node(3, &[0, 1, 2, 6], immediate_forwarder());
    let cid = cid_of(b"c").unwrap();
    relay
        .handle_message(PeerId(2), &want_have_msg(cid), 100)
        .unwrap();
    let out = relay
        .handle_message(PeerId(0), &want_have_msg(cid), 150)
        .unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(0), MessageKind::DontHave)]);
    assert_eq!(
        relay.relay_session().interested_in(&cid).unwrap(),
        &[PeerId(0), PeerId(2)].into()
    );

    let out = relay
        .handle_message(PeerId(2), &want_have_msg(cid), 160)
        .unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(2), MessageKind::DontHave)]);
    assert_eq!(relay.relay_session().interested_in(&cid).unwrap().len(), 2);
}

#[test]
fn baseline_node_only_declines() {
    let mut n = node(3, &[0, 1, 2], NodeConfig::baseline());
    let cid = cid_of(b"c").unwrap();
    let out = n.handle_message(PeerId(0), &want_have_msg(cid), 0).unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(0), MessageKind::DontHave)]);
    assert!(n.relay_session().is_drained());
    assert!(n.relay_session().forwarded().is_empty());
}

#[test]
fn relay_delivers_block_to_every_interested_peer() {
    let mut relay = node(3, &[0, 1, 2, 6], immediate_forwarder());
    let block = block_of(2048, 9);
    let cid = *block.cid();
    relay
        .handle_message(PeerId(0), &want_have_msg(cid), 0)
        .unwrap();
    relay
        .handle_message(PeerId(1), &want_have_msg(cid), 0)
        .unwrap();
    // 2 and 6 got our relayed want; 2 answers with the block
    let out = relay
        .handle_message(PeerId(2), &BitswapMessage::block(block.clone()), 50)
        .unwrap();
    let k = kinds(&out);
    assert!(k.contains(&(PeerId(0), MessageKind::Block)));
    assert!(k.contains(&(PeerId(1), MessageKind::Block)));
    assert_eq!(
        k.iter().filter(|(_, k)| *k == MessageKind::Block).count(),
        2
    );
    // the outstanding want at 6 is cancelled, none goes back to 2
    assert!(k.contains(&(PeerId(6), MessageKind::Cancel)));
    assert!(!k.contains(&(PeerId(2), MessageKind::Cancel)));
    assert!(relay.relay_session().is_drained());
    assert!(relay.has_block(&cid));
}

#[test]
fn unsolicited_block_is_stored_silently() {
    let mut n = node(3, &[0, 1], immediate_forwarder());
    let block = block_of(20, 1);
    let out = n
        .handle_message(PeerId(0), &BitswapMessage::block(block.clone()), 0)
        .unwrap();
    assert!(out.is_empty());
    assert!(n.has_block(block.cid()));
}

#[test]
fn duplicate_block_is_idempotent() {
    let mut relay = node(3, &[0, 1, 2], immediate_forwarder());
    let block = block_of(2048, 9);
    relay
        .handle_message(PeerId(0), &want_have_msg(*block.cid()), 0)
        .unwrap();
    let first = relay
        .handle_message(PeerId(1), &BitswapMessage::block(block.clone()), 10)
        .unwrap();
    assert!(!first.is_empty());
    let again = relay
        .handle_message(PeerId(2), &BitswapMessage::block(block.clone()), 20)
        .unwrap();
    assert!(again.is_empty());
    assert_eq!(relay.blockstore().len(), 1);
}

#[test]
fn final_block_completes_session_and_trickles_cancels() {
    let config = NodeConfig::forwarding(SpreadingStrategy::trickle(100));
    let mut leech = node(5, &[2, 4, 6, 8], config);
    let block = block_of(4096, 2);
    let cid = *block.cid();
    let sends = leech.want_content(&[cid], 0);
    // release every trickled want so they count as on the wire
    for s in &sends {
        if let Some(t) = s.ticket {
            leech.release(t, s.at).unwrap();
        }
    }
    let out = leech
        .handle_message(PeerId(8), &BitswapMessage::block(block), 400)
        .unwrap();
    assert_eq!(leech.sessions()[0].completed_at, Some(400));
    let cancels: Vec<_> = out.iter().map(|s| (s.to, s.at)).collect();
    let mut targets: Vec<_> = cancels.iter().map(|(p, _)| *p).collect();
    targets.sort();
    assert_eq!(targets, peers(&[2, 4, 6]));
    let mut offsets: Vec<_> = cancels.iter().map(|(_, t)| t - 400).collect();
    offsets.sort();
    assert_eq!(offsets, vec![0, 100, 200]);
    assert!(out.iter().all(|s| s.message.entries()[0].cancel));
}

#[test]
fn pending_wants_are_withdrawn_once_fulfilled() {
    let config = NodeConfig::forwarding(SpreadingStrategy::trickle(100));
    let mut leech = node(5, &[2, 4, 6, 8], config);
    let block = block_of(100, 2);
    let sends = leech.want_content(&[*block.cid()], 0);
    let first = sends[0].to;
    let out = leech
        .handle_message(first, &BitswapMessage::block(block), 50)
        .unwrap();
    // only the first want was on the wire and it was answered by the block
    assert!(out.is_empty());
    for s in &sends[1..] {
        assert!(leech.release(s.ticket.unwrap(), s.at).is_none());
    }
    assert!(leech.ledger().is_empty());
    assert!(leech.is_idle());
}

#[test]
fn have_triggers_single_want_block() {
    let mut leech = node(5, &[2, 4, 6, 8], NodeConfig::baseline());
    let cid = cid_of(b"big").unwrap();
    leech.want_content(&[cid], 0);
    let have = BitswapMessage::presence(cid, Presence::Have);
    let out = leech.handle_message(PeerId(8), &have, 200).unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(8), MessageKind::WantBlock)]);
    assert_eq!(out[0].at, 200);
    let out = leech.handle_message(PeerId(4), &have, 210).unwrap();
    assert!(out.is_empty());
    assert!(leech.ledger().want_block_outstanding(&cid));
}

#[test]
fn have_for_unwanted_cid_is_ignored() {
    let mut n = node(5, &[2, 4], immediate_forwarder());
    let have = BitswapMessage::presence(cid_of(b"nope").unwrap(), Presence::Have);
    assert!(n.handle_message(PeerId(2), &have, 0).unwrap().is_empty());
}

#[test]
fn relay_fetches_on_have() {
    let mut relay = node(8, &[5, 7, 10], immediate_forwarder());
    let cid = cid_of(b"big").unwrap();
    relay
        .handle_message(PeerId(5), &want_have_msg(cid), 0)
        .unwrap();
    let have = BitswapMessage::presence(cid, Presence::Have);
    let out = relay.handle_message(PeerId(10), &have, 200).unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(10), MessageKind::WantBlock)]);
}

#[test]
fn last_cancel_propagates_upstream() {
    let mut relay = node(3, &[0, 1, 2, 6], immediate_forwarder());
    let cid = cid_of(b"c").unwrap();
    relay
        .handle_message(PeerId(0), &want_have_msg(cid), 0)
        .unwrap();
    let out = relay
        .handle_message(PeerId(0), &cancel_msg(cid), 100)
        .unwrap();
    assert!(relay.relay_session().is_drained());
    assert_eq!(
        kinds(&out),
        vec![
            (PeerId(1), MessageKind::Cancel),
            (PeerId(2), MessageKind::Cancel),
            (PeerId(6), MessageKind::Cancel)
        ]
    );
    assert!(relay.ledger().is_empty());
}

#[test]
fn cancel_with_remaining_interest_stays_local() {
    let mut relay = node(3, &[0, 1, 2, 6], immediate_forwarder());
    let cid = cid_of(b"c").unwrap();
    relay
        .handle_message(PeerId(0), &want_have_msg(cid), 0)
        .unwrap();
    relay
        .handle_message(PeerId(1), &want_have_msg(cid), 0)
        .unwrap();
    let out = relay
        .handle_message(PeerId(0), &cancel_msg(cid), 100)
        .unwrap();
    assert!(out.is_empty());
    assert_eq!(
        relay.relay_session().interested_in(&cid).unwrap(),
        &[PeerId(1)].into()
    );
}

#[test]
fn sweep_unwinds_relay_left_with_only_co_relays() {
    let mut relay = node(3, &[0, 1, 2], immediate_forwarder());
    let cid = cid_of(b"c").unwrap();
    relay
        .handle_message(PeerId(0), &want_have_msg(cid), 0)
        .unwrap();
    relay
        .handle_message(PeerId(1), &want_have_msg(cid), 50)
        .unwrap();
    assert_eq!(relay.relay_session().origin(&cid), Some(PeerId(0)));
    // the trigger is still waiting: nothing to unwind
    assert!(relay.session_sweep(60).is_empty());

    assert!(relay
        .handle_message(PeerId(0), &cancel_msg(cid), 100)
        .unwrap()
        .is_empty());
    let out = relay.session_sweep(500);
    assert_eq!(
        kinds(&out),
        vec![
            (PeerId(1), MessageKind::Cancel),
            (PeerId(2), MessageKind::Cancel)
        ]
    );
    assert!(relay.session_sweep(510).is_empty());
    // n1 withdraws in turn once its own trigger is gone
    assert!(relay
        .handle_message(PeerId(1), &cancel_msg(cid), 600)
        .unwrap()
        .is_empty());
    assert!(relay.relay_session().is_drained());
    assert!(relay.ledger().is_empty());
}

#[test]
fn sweep_counts_queued_wants_as_asked() {
    let mut relay = node(
        3,
        &[0, 1, 2],
        NodeConfig::forwarding(SpreadingStrategy::trickle(1000)),
    );
    let cid = cid_of(b"c").unwrap();
    let out = relay
        .handle_message(PeerId(0), &want_have_msg(cid), 0)
        .unwrap();
    let sent_now = out
        .iter()
        .find(|s| s.ticket.is_none() && s.message.entries().len() == 1)
        .unwrap()
        .to;
    let queued = out.iter().find(|s| s.ticket.is_some()).unwrap().to;
    relay
        .handle_message(queued, &want_have_msg(cid), 10)
        .unwrap();
    relay
        .handle_message(PeerId(0), &cancel_msg(cid), 20)
        .unwrap();
    let out = relay.session_sweep(500);
    assert_eq!(kinds(&out), vec![(sent_now, MessageKind::Cancel)]);
    assert_eq!(relay.ledger().pending_len(), 0);
}

#[test]
fn sweep_cancels_wants_fulfilled_out_of_band() {
    let mut n = node(9, &[7], NodeConfig::baseline());
    let block = block_of(64, 5);
    assert!(n.session_sweep(0).is_empty());
    n.want_content(&[*block.cid()], 0);
    assert!(n.session_sweep(10).is_empty());
    n.insert_block(block.clone());
    let out = n.session_sweep(500);
    assert_eq!(kinds(&out), vec![(PeerId(7), MessageKind::Cancel)]);
    assert!(n.session_sweep(1000).is_empty());
}

#[test]
fn hop_limit_bounds_forwarding() {
    let config = NodeConfig {
        hop_limit: Some(3),
        ..immediate_forwarder()
    };
    let cid = cid_of(b"ttl").unwrap();
    let mut leech = node(0, &[1], config.clone());
    let sends = leech.want_content(&[cid], 0);
    assert_eq!(sends[0].message.entries()[0].ttl, Some(3));

    let mut relay = node(1, &[0, 2], config.clone());
    let out = relay
        .handle_message(PeerId(0), &sends[0].message, 10)
        .unwrap();
    let fwd = out.iter().find(|s| s.to == PeerId(2)).unwrap();
    assert_eq!(fwd.message.entries()[0].ttl, Some(2));

    let mut last = node(2, &[1, 3], config);
    let spent = BitswapMessage::from_entries(vec![WantlistEntry::want_have(cid).with_ttl(Some(1))])
        .unwrap();
    let out = last.handle_message(PeerId(1), &spent, 20).unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(1), MessageKind::DontHave)]);
    assert!(last.relay_session().is_drained());
}

#[test]
fn add_peer_sends_open_wants() {
    let mut leech = node(5, &[2, 4], NodeConfig::baseline());
    let cid = cid_of(b"x").unwrap();
    leech.want_content(&[cid], 0);
    let out = leech.add_peer(PeerId(10), 400).unwrap();
    assert_eq!(kinds(&out), vec![(PeerId(10), MessageKind::WantHave)]);
    assert_eq!(out[0].at, 400);
    assert!(leech.add_peer(PeerId(10), 400).is_err());
}

fn render(sends: &[TimedSend]) -> Vec<String> {
    sends
        .iter()
        .map(|s| format!("{} {} {}", s.at, s.to, s.message.to_canonical_json()))
        .collect()
}

#[derive(Debug, Clone)]
enum Event {
    WantHave(u16),
    Cancel(u16),
}

fn event_strategy() -> impl Strategy<Value = Event> {
    prop_oneof![
        (0u16..6).prop_map(Event::WantHave),
        (0u16..6).prop_map(Event::Cancel),
    ]
}

proptest! {
    #[test]
    fn forward_once_and_no_echo(events in proptest::collection::vec(event_strategy(), 1..30), delay in 0u64..200) {
        let config = NodeConfig::forwarding(SpreadingStrategy::trickle(delay));
        let mut relay = node(9, &[0, 1, 2, 3, 4, 5], config);
        let cid = cid_of(b"prop").unwrap();
        let mut spreads = 0;
        let mut want_targets = BTreeSet::new();
        for (i, ev) in events.iter().enumerate() {
            let now = i as u64 * 10;
            let out = match ev {
                Event::WantHave(p) => {
                    let interested_before: BTreeSet<PeerId> = relay
                        .relay_session()
                        .interested_in(&cid)
                        .cloned()
                        .unwrap_or_default();
                    let out = relay.handle_message(PeerId(*p), &want_have_msg(cid), now).unwrap();
                    let wants: Vec<_> = out
                        .iter()
                        .filter(|s| s.message.parts().any(|(k, _)| k == MessageKind::WantHave))
                        .collect();
                    if !wants.is_empty() {
                        spreads += 1;
                    }
                    for s in wants {
                        prop_assert!(s.to != PeerId(*p));
                        prop_assert!(!interested_before.contains(&s.to));
                        prop_assert!(want_targets.insert(s.to), "duplicate want to {}", s.to);
                    }
                    out
                }
                Event::Cancel(p) => relay.handle_message(PeerId(*p), &cancel_msg(cid), now).unwrap(),
            };
            prop_assert!(out.iter().all(|s| s.at >= now));
        }
        prop_assert!(spreads <= 1);
    }

    #[test]
    fn identical_inputs_give_identical_schedules(seed: u64, delay in 0u64..300) {
        let make = || {
            NodeState::new(PeerId(5), peers(&[2, 4, 6, 8, 11]), NodeConfig::forwarding(SpreadingStrategy::trickle(delay)), seed).unwrap()
        };
        let cid = cid_of(b"det").unwrap();
        let block = block_of(2000, 1);
        let mut a = make();
        let mut b = make();
        let run = |n: &mut NodeState| {
            let mut all = n.want_content(&[cid, *block.cid()], 0);
            all.extend(n.handle_message(PeerId(2), &want_have_msg(cid), 30).unwrap());
            all.extend(n.handle_message(PeerId(4), &BitswapMessage::block(block.clone()), 90).unwrap());
            render(&all)
        };
        prop_assert_eq!(run(&mut a), run(&mut b));
    }
}
