use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::node::PeerId;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Seed,
    Leech,
    Forwarder,
    Eavesdropper,
}

impl Role {
    pub fn is_honest(self) -> bool {
        self != Role::Eavesdropper
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub id: PeerId,
    pub name: String,
    pub role: Role,
}

/// Undirected graph with one latency shared by every link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    nodes: Vec<NodeInfo>,
    edges: BTreeSet<(PeerId, PeerId)>,
    latency_ms: Millis,
}

pub const DEFAULT_LATENCY_MS: Millis = 100;

const REFERENCE_EDGES: [(&str, &str); 21] = [
    ("n0", "n1"),
    ("n0", "n2"),
    ("n0", "n3"),
    ("n1", "n2"),
    ("n1", "n3"),
    ("n1", "n4"),
    ("n2", "n3"),
    ("n2", "n5"),
    ("n3", "n6"),
    ("n4", "n5"),
    ("n4", "n6"),
    ("n4", "n7"),
    ("n5", "n6"),
    ("n5", "n8"),
    ("n6", "n9"),
    ("n7", "n8"),
    ("n7", "n9"),
    ("n7", "s"),
    ("n8", "n9"),
    ("n8", "s"),
    ("n9", "s"),
];

fn ordered(a: PeerId, b: PeerId) -> (PeerId, PeerId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    pub fn new(latency_ms: Millis) -> Self {
        Topology {
            nodes: Vec::new(),
            edges: BTreeSet::new(),
            latency_ms,
        }
    }

    /// The eleven-peer reference network: forwarders `n0`..`n9` and the
    /// seed `s`, with ids 0..=9 and 10.
    pub fn reference() -> Self {
        let mut topo = Topology::new(DEFAULT_LATENCY_MS);
        for i in 0..10 {
            topo.add_node(format!("n{i}"), Role::Forwarder);
        }
        topo.add_node("s", Role::Seed);
        for (a, b) in REFERENCE_EDGES {
            let a = topo.id_of(a).expect("reference node");
            let b = topo.id_of(b).expect("reference node");
            topo.add_edge(a, b).expect("reference edge");
        }
        topo
    }

    pub fn with_latency(mut self, latency_ms: Millis) -> Self {
        self.latency_ms = latency_ms;
        self
    }

    pub fn add_node(&mut self, name: impl Into<String>, role: Role) -> PeerId {
        let id = PeerId(self.nodes.len() as u16);
        self.nodes.push(NodeInfo {
            id,
            name: name.into(),
            role,
        });
        id
    }

    pub fn add_edge(&mut self, a: PeerId, b: PeerId) -> Result<bool, SimError> {
        if a == b {
            return Err(SimError::Topology(format!("self loop at {}", self.name(a))));
        }
        self.check(a)?;
        self.check(b)?;
        Ok(self.edges.insert(ordered(a, b)))
    }

    fn check(&self, id: PeerId) -> Result<(), SimError> {
        if (id.0 as usize) < self.nodes.len() {
            Ok(())
        } else {
            Err(SimError::UnknownNode(id))
        }
    }

    /// Adds `k` eavesdroppers `e0`.. each linked to every honest node.
    pub fn attach_eavesdroppers(&self, k: usize) -> Self {
        let mut topo = self.clone();
        let honest = self.honest_ids();
        for i in 0..k {
            let e = topo.add_node(format!("e{i}"), Role::Eavesdropper);
            for &h in &honest {
                topo.edges.insert(ordered(h, e));
            }
        }
        topo
    }

    /// Marks `leech` as the requesting peer; it must currently be a forwarder.
    pub fn set_leech(&mut self, leech: PeerId) -> Result<(), SimError> {
        self.check(leech)?;
        let node = &mut self.nodes[leech.0 as usize];
        if node.role != Role::Forwarder {
            return Err(SimError::Setup(format!(
                "{} is a {:?} and cannot be the leech",
                node.name, node.role
            )));
        }
        node.role = Role::Leech;
        Ok(())
    }

    pub fn latency_ms(&self) -> Millis {
        self.latency_ms
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (PeerId, PeerId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn name(&self, id: PeerId) -> &str {
        self.nodes
            .get(id.0 as usize)
            .map(|n| n.name.as_str())
            .unwrap_or("?")
    }

    pub fn role(&self, id: PeerId) -> Option<Role> {
        self.nodes.get(id.0 as usize).map(|n| n.role)
    }

    pub fn id_of(&self, name: &str) -> Option<PeerId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn has_edge(&self, a: PeerId, b: PeerId) -> bool {
        self.edges.contains(&ordered(a, b))
    }

    pub fn neighbors(&self, id: PeerId) -> Vec<PeerId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == id, b == id) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn honest_ids(&self) -> Vec<PeerId> {
        self.nodes
            .iter()
            .filter(|n| n.role.is_honest())
            .map(|n| n.id)
            .collect()
    }

    pub fn eavesdropper_ids(&self) -> Vec<PeerId> {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Eavesdropper)
            .map(|n| n.id)
            .collect()
    }

    pub fn seed(&self) -> Option<PeerId> {
        self.nodes
            .iter()
            .find(|n| n.role == Role::Seed)
            .map(|n| n.id)
    }

    /// Breadth-first hop count over honest links only.
    pub fn hop_distance(&self, from: PeerId, to: PeerId) -> Option<usize> {
        let n = self.nodes.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[from.0 as usize] = 0;
        queue.push_back(from);
        while let Some(u) = queue.pop_front() {
            if u == to {
                return Some(dist[u.0 as usize]);
            }
            for v in self.neighbors(u) {
                if self.role(v).is_some_and(Role::is_honest) && dist[v.0 as usize] == usize::MAX {
                    dist[v.0 as usize] = dist[u.0 as usize] + 1;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Checks the structural assumptions the simulator relies on: a single
    /// seed, a connected honest subgraph, and eavesdroppers linked to every
    /// honest node and to nothing else.
    pub fn validate(&self) -> Result<(), SimError> {
        let seeds = self.nodes.iter().filter(|n| n.role == Role::Seed).count();
        if seeds != 1 {
            return Err(SimError::Topology(format!(
                "expected one seed, found {seeds}"
            )));
        }
        let honest = self.honest_ids();
        if let Some(&first) = honest.first() {
            for &h in &honest[1..] {
                if self.hop_distance(first, h).is_none() {
                    return Err(SimError::Topology(format!(
                        "{} is unreachable from {}",
                        self.name(h),
                        self.name(first)
                    )));
                }
            }
        }
        for e in self.eavesdropper_ids() {
            for v in self.neighbors(e) {
                if !self.role(v).is_some_and(Role::is_honest) {
                    return Err(SimError::Topology(format!(
                        "eavesdroppers {} and {} are linked",
                        self.name(e),
                        self.name(v)
                    )));
                }
            }
            if let Some(&h) = honest.iter().find(|&&h| !self.has_edge(e, h)) {
                return Err(SimError::Topology(format!(
                    "eavesdropper {} has no link to {}",
                    self.name(e),
                    self.name(h)
                )));
            }
        }
        Ok(())
    }

    /// One `a b latency_ms` line per link, sorted by node id.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{} {} {}", self.name(a), self.name(b), self.latency_ms);
        }
        out
    }
}
