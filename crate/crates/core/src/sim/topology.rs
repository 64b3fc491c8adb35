//! Topology description and the built network it produces.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::link::Link;
use super::name::PrefixTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Consumer,
    Router,
    Producer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
    /// Traffic profile name, consumers only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// Served prefixes, producers only; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefixes: Vec<String>,
}

impl NodeSpec {
    pub fn consumer(name: &str, profile: &str) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Consumer,
            profile: Some(profile.into()),
            prefixes: Vec::new(),
        }
    }

    pub fn router(name: &str) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Router,
            profile: None,
            prefixes: Vec::new(),
        }
    }

    pub fn producer(name: &str) -> Self {
        NodeSpec {
            name: name.into(),
            kind: NodeKind::Producer,
            profile: None,
            prefixes: Vec::new(),
        }
    }
}

/// Propagation delay in milliseconds: fixed, or drawn once from `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelayMs {
    Fixed(f64),
    Range([f64; 2]),
}

fn default_queue() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub bandwidth_mbps: f64,
    pub delay_ms: DelayMs,
    #[serde(default = "default_queue")]
    pub queue_packets: usize,
}

impl LinkSpec {
    pub fn new(a: &str, b: &str, bandwidth_mbps: f64, delay_ms: DelayMs) -> Self {
        LinkSpec {
            a: a.into(),
            b: b.into(),
            bandwidth_mbps,
            delay_ms,
            queue_packets: default_queue(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
}

impl TopologySpec {
    /// Three-level tree: a producer behind a gateway, three edge routers and
    /// eight consumers. Consumers 1-3, 4-6 and 7-8 attach to edge routers 1, 2
    /// and 3; consumers in `attackers` (1-based) get the `attack` profile.
    pub fn tree(attackers: &[usize]) -> Self {
        let mut nodes = vec![
            NodeSpec::producer("provider"),
            NodeSpec::router("gateway"),
            NodeSpec::router("router1"),
            NodeSpec::router("router2"),
            NodeSpec::router("router3"),
        ];
        let other = DelayMs::Range([3.0, 5.0]);
        let mut links = vec![LinkSpec::new("provider", "gateway", 500.0, DelayMs::Fixed(20.0))];
        for r in 1..=3 {
            links.push(LinkSpec::new("gateway", &format!("router{r}"), 50.0, other));
        }
        for c in 1..=8usize {
            let name = format!("consumer{c}");
            let profile = if attackers.contains(&c) { "attack" } else { "regular" };
            nodes.push(NodeSpec::consumer(&name, profile));
            let edge = match c {
                1..=3 => 1,
                4..=6 => 2,
                _ => 3,
            };
            links.push(LinkSpec::new(&name, &format!("router{edge}"), 50.0, other));
        }
        TopologySpec { nodes, links }
    }

    /// consumer - router - producer, for smoke tests.
    pub fn chain() -> Self {
        TopologySpec {
            nodes: vec![
                NodeSpec::consumer("consumer", "regular"),
                NodeSpec::router("router"),
                NodeSpec::producer("producer"),
            ],
            links: vec![
                LinkSpec::new("consumer", "router", 50.0, DelayMs::Fixed(4.0)),
                LinkSpec::new("router", "producer", 500.0, DelayMs::Fixed(20.0)),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    /// Outgoing directed link.
    pub link: usize,
    pub peer: usize,
    /// Face index of this link at the peer.
    pub peer_face: u16,
}

#[derive(Debug)]
pub struct Network {
    pub nodes: Vec<NodeSpec>,
    pub faces: Vec<Vec<Face>>,
    pub links: Vec<Link>,
    /// `fib[node][prefix]` = egress face towards a producer of the prefix.
    pub fib: Vec<Vec<Option<u16>>>,
    index: HashMap<String, usize>,
}

impl Network {
    /// Wire up `spec`; ranged delays are drawn with a generator seeded by
    /// `seed`, in link order.
    pub fn build(spec: &TopologySpec, prefixes: &PrefixTable, seed: u64) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if n.name.is_empty() || index.insert(n.name.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate or empty node name {:?}", n.name)));
            }
            if n.kind != NodeKind::Consumer && n.profile.is_some() {
                return Err(Error::config(format!("node {:?}: only consumers take a profile", n.name)));
            }
            if n.kind == NodeKind::Consumer && n.profile.is_none() {
                return Err(Error::config(format!("consumer {:?} has no profile", n.name)));
            }
            for p in &n.prefixes {
                if n.kind != NodeKind::Producer {
                    return Err(Error::config(format!("node {:?}: only producers serve prefixes", n.name)));
                }
                if prefixes.id(p).is_none() {
                    return Err(Error::config(format!("node {:?} serves unknown prefix {p:?}", n.name)));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11_4b5);
        let mut faces = vec![Vec::new(); spec.nodes.len()];
        let mut links = Vec::new();
        for l in &spec.links {
            let lookup = |n: &str| {
                index
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::config(format!("link references unknown node {n:?}")))
            };
            let (a, b) = (lookup(&l.a)?, lookup(&l.b)?);
            if a == b {
                return Err(Error::config(format!("self-link on {:?}", l.a)));
            }
            if !(l.bandwidth_mbps > 0.0 && l.bandwidth_mbps.is_finite()) || l.queue_packets == 0 {
                return Err(Error::config(format!("link {}-{}: bandwidth and queue must be positive", l.a, l.b)));
            }
            let delay_ms = match l.delay_ms {
                DelayMs::Fixed(d) if d >= 0.0 && d.is_finite() => d,
                DelayMs::Range([lo, hi]) if 0.0 <= lo && lo <= hi && hi.is_finite() => {
                    if lo == hi {
                        lo
                    } else {
                        rng.gen_range(lo..=hi)
                    }
                }
                _ => return Err(Error::config(format!("link {}-{}: invalid delay", l.a, l.b))),
            };
            let delay_ns = super::secs_to_ns(delay_ms / 1e3);
            let bps = l.bandwidth_mbps * 1e6;
            let (fa, fb) = (faces[a].len() as u16, faces[b].len() as u16);
            faces[a].push(Face {
                link: links.len(),
                peer: b,
                peer_face: fb,
            });
            links.push(Link::new(bps, delay_ns, l.queue_packets));
            faces[b].push(Face {
                link: links.len(),
                peer: a,
                peer_face: fa,
            });
            links.push(Link::new(bps, delay_ns, l.queue_packets));
        }
        for (i, n) in spec.nodes.iter().enumerate() {
            if n.kind == NodeKind::Consumer && faces[i].is_empty() {
                return Err(Error::config(format!("consumer {:?} is not connected", n.name)));
            }
        }
        let fib = compute_fib(&spec.nodes, &faces, prefixes);
        Ok(Network {
            nodes: spec.nodes.clone(),
            faces,
            links,
            fib,
            index,
        })
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn serves(&self, node: usize, prefix: u16, prefixes: &PrefixTable) -> bool {
        let n = &self.nodes[node];
        n.kind == NodeKind::Producer && (n.prefixes.is_empty() || n.prefixes.iter().any(|p| prefixes.id(p) == Some(prefix)))
    }

    /// Follow FIB entries from `from`; returns the producer reached, if any.
    pub fn route(&self, from: usize, prefix: u16, prefixes: &PrefixTable) -> Option<usize> {
        let mut at = from;
        for _ in 0..=self.nodes.len() {
            if self.serves(at, prefix, prefixes) {
                return Some(at);
            }
            let face = self.fib[at][prefix as usize]?;
            at = self.faces[at][face as usize].peer;
        }
        None
    }
}

/// Breadth-first search outward from the producers of each prefix; each
/// node's next hop is the face to its BFS parent. Producers are not transit
/// nodes.
fn compute_fib(nodes: &[NodeSpec], faces: &[Vec<Face>], prefixes: &PrefixTable) -> Vec<Vec<Option<u16>>> {
    let mut fib = vec![vec![None; prefixes.len()]; nodes.len()];
    for p in 0..prefixes.len() {
        let name = prefixes.prefix(p as u16);
        let mut seen = vec![false; nodes.len()];
        let mut queue = VecDeque::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.kind == NodeKind::Producer && (n.prefixes.is_empty() || n.prefixes.iter().any(|x| x == name)) {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(u) = queue.pop_front() {
            for f in &faces[u] {
                let v = f.peer;
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                fib[v][p] = Some(f.peer_face);
                if nodes[v].kind == NodeKind::Router {
                    queue.push_back(v);
                }
            }
        }
    }
    fib
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefixes() -> PrefixTable {
        PrefixTable::new(&["/a".into(), "/b".into()]).unwrap()
    }

    #[test]
    fn tree_has_thirteen_nodes_and_full_reachability() {
        let spec = TopologySpec::tree(&[2, 4, 7]);
        let net = Network::build(&spec, &prefixes(), 1).unwrap();
        assert_eq!(net.len(), 13);
        let provider = net.node_index("provider").unwrap();
        for c in 1..=8 {
            let i = net.node_index(&format!("consumer{c}")).unwrap();
            for p in 0..2 {
                assert_eq!(net.route(i, p, &prefixes()), Some(provider));
            }
        }
        let attack: Vec<_> = spec
            .nodes
            .iter()
            .filter(|n| n.profile.as_deref() == Some("attack"))
            .map(|n| n.name.as_str())
            .collect();
        assert_eq!(attack, ["consumer2", "consumer4", "consumer7"]);
    }

    #[test]
    fn ranged_delays_are_seeded_and_in_range() {
        let spec = TopologySpec::tree(&[]);
        let a = Network::build(&spec, &prefixes(), 5).unwrap();
        let b = Network::build(&spec, &prefixes(), 5).unwrap();
        for (x, y) in a.links.iter().zip(&b.links) {
            assert_eq!(x.delay_ns, y.delay_ns);
        }
        assert_eq!(a.links[0].delay_ns, 20_000_000);
        for l in &a.links[2..] {
            assert!((3_000_000..=5_000_000).contains(&l.delay_ns));
        }
        // Both directions share one draw.
        assert_eq!(a.links[2].delay_ns, a.links[3].delay_ns);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        let mut spec = TopologySpec::chain();
        spec.links[0].b = "nowhere".into();
        assert!(Network::build(&spec, &prefixes(), 0).is_err());
        let mut spec = TopologySpec::chain();
        spec.nodes[1].name = "consumer".into();
        assert!(Network::build(&spec, &prefixes(), 0).is_err());
        let mut spec = TopologySpec::chain();
        spec.nodes[0].profile = None;
        assert!(Network::build(&spec, &prefixes(), 0).is_err());
    }

    #[test]
    fn per_prefix_producers() {
        let mut spec = TopologySpec::chain();
        spec.nodes[2].prefixes = vec!["/a".into()];
        let net = Network::build(&spec, &prefixes(), 0).unwrap();
        assert_eq!(net.route(0, 0, &prefixes()), Some(2));
        assert_eq!(net.route(0, 1, &prefixes()), None);
    }
}
