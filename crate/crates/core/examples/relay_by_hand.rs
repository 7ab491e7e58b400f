//! Drive a leech, a relay and a seed through one forwarded fetch without the
//! simulator, printing every message that would go on the wire.
//!
//! Topology: leech p0 -- relay p1 -- seed p2.

use std::collections::VecDeque;

use trickleswap::{Block, NodeConfig, NodeState, PeerId, SpreadingStrategy, TimedSend};

const LATENCY: u64 = 100;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NodeConfig::forwarding(SpreadingStrategy::Immediate);
    let mut nodes = [
        NodeState::new(PeerId(0), vec![PeerId(1)], cfg.clone(), 1)?,
        NodeState::new(PeerId(1), vec![PeerId(0), PeerId(2)], cfg.clone(), 1)?,
        NodeState::new(PeerId(2), vec![PeerId(1)], cfg, 1)?,
    ];

    let block = Block::new(vec![7u8; 4096])?;
    let cid = *block.cid();
    nodes[2].insert_block(block);

    let mut wire: VecDeque<(PeerId, TimedSend)> = nodes[0]
        .want_content(&[cid], 0)
        .into_iter()
        .map(|s| (PeerId(0), s))
        .collect();

    while let Some((from, send)) = wire.pop_front() {
        let arrive = send.at + LATENCY;
        let parts: Vec<String> = send.message.parts().map(|(k, _)| k.to_string()).collect();
        println!("t={arrive:>4}  {from} -> {}  {}", send.to, parts.join(", "));
        let to = send.to;
        let replies = nodes[to.0 as usize].handle_message(from, &send.message, arrive)?;
        wire.extend(replies.into_iter().map(|s| (to, s)));
    }

    println!("leech has block: {}", nodes[0].has_block(&cid));
    println!("relay drained:   {}", nodes[1].relay_session().is_drained());
    Ok(())
}
