//! Event loop, node behaviour and per-second metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::cs::ContentStore;
use super::name::{ContentKey, PrefixTable};
use super::pit::{PitInsert, PitTable};
use super::topology::{Network, NodeKind, TopologySpec};
use super::traffic::{is_nonexistent, regular_key, AttackGenerator, TrafficProfile, ZipfSampler};
use super::{secs_to_ns, NS_PER_S};
use crate::detector::{Alarm, AnyDetector, DetectorConfig, EpochRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Measured scenario length in whole seconds.
    pub duration_s: u32,
    /// Regular-traffic-only lead-in before scenario time 0, whole seconds.
    /// Lets caches settle and detector histories fill.
    pub warmup_s: u32,
    pub seed: u64,
    pub cs_capacity: usize,
    pub pit_capacity: usize,
    pub pit_timeout_s: f64,
    pub interest_bytes: u32,
    pub data_payload_bytes: u32,
    pub data_header_bytes: u32,
    /// Consumer retransmission timer.
    pub retransmit_timeout_s: f64,
    /// Retransmissions before a request is abandoned. The default is high
    /// enough that requests are retried until satisfied within a run.
    pub max_retries: u8,
    /// Nodes that run a detector.
    pub detector_nodes: Vec<String>,
    pub detector: Option<DetectorConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: 60,
            warmup_s: 15,
            seed: 1,
            cs_capacity: 1000,
            pit_capacity: 15_000,
            pit_timeout_s: 2.0,
            interest_bytes: 50,
            data_payload_bytes: 1024,
            data_header_bytes: 50,
            retransmit_timeout_s: 1.0,
            max_retries: u8::MAX,
            detector_nodes: vec!["gateway".into()],
            detector: Some(DetectorConfig::default()),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_s == 0 {
            return Err(Error::config("duration must be at least one second"));
        }
        if !(self.pit_timeout_s > 0.0 && self.retransmit_timeout_s > 0.0) {
            return Err(Error::config("timeouts must be positive"));
        }
        if self.interest_bytes == 0 || self.data_payload_bytes + self.data_header_bytes == 0 {
            return Err(Error::config("packet sizes must be positive"));
        }
        if let Some(d) = &self.detector {
            d.validate()?;
            if d.epoch_s != 1.0 {
                return Err(Error::config("the simulator closes detector epochs every second"));
            }
        }
        Ok(())
    }
}

/// One row per node per second; fields that do not apply to a node are
/// left empty. For consumers `interests_in` counts interests issued and
/// `data_out` data received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub time_s: u32,
    pub node: String,
    pub cache_hit_rate: Option<f64>,
    pub pit_available_rate: Option<f64>,
    pub avg_rtt_ms: Option<f64>,
    pub interests_in: u64,
    pub data_out: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SimCounters {
    pub events: u64,
    pub interests_issued: u64,
    pub attack_interests: u64,
    pub retransmissions: u64,
    pub satisfied: u64,
    pub unsatisfied: u64,
    pub cs_hits: u64,
    pub pit_full_drops: u64,
    pub pit_expired: u64,
    pub link_drops: u64,
    pub no_route: u64,
    pub unsolicited_data: u64,
    pub unanswered: u64,
    pub warmup_alarms: u64,
}

#[derive(Debug)]
pub struct SimOutput {
    pub metrics: Vec<MetricsRow>,
    /// Alarms raised in scenario epochs, timestamped in scenario seconds.
    pub alarms: Vec<Alarm>,
    /// Detector epoch records; `epoch` counts from the start of warm-up.
    pub detection_trace: Vec<EpochRecord>,
    pub counters: SimCounters,
    /// Detector state size in bits at the end of the run, per detector node.
    pub detector_footprint_bits: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PacketKind {
    Interest,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Packet {
    kind: PacketKind,
    key: ContentKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Tick,
    Issue { node: u32 },
    Arrive { node: u32, face: u16, packet: Packet },
    Timeout { node: u32, key: ContentKey, token: u64 },
}

#[derive(Debug, PartialEq, Eq)]
struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct RouterSecond {
    lookups: u64,
    hits: u64,
    interests_in: u64,
    data_out: u64,
    pit_peak: usize,
}

#[derive(Debug)]
struct Router {
    cs: ContentStore,
    pit: PitTable,
    detector: Option<usize>,
    second: RouterSecond,
}

#[derive(Debug)]
struct Pending {
    first_issue: u64,
    attempt: u8,
    // Identifies the live retransmission timer.
    token: u64,
    // Issue times of later requests for the same name while pending.
    waiters: Vec<u64>,
}

#[derive(Debug)]
enum Behaviour {
    Regular {
        zipf: ZipfSampler,
        gap: Exp<f64>,
        outstanding: HashMap<ContentKey, Pending>,
    },
    Attacker {
        generator: AttackGenerator,
        interval_ns: u64,
        end_ns: u64,
    },
    Idle,
}

#[derive(Debug, Default, Clone, Copy)]
struct ConsumerSecond {
    issued: u64,
    data_in: u64,
    rtt_sum_ns: u128,
    rtt_count: u64,
}

#[derive(Debug)]
struct Consumer {
    behaviour: Behaviour,
    next_token: u64,
    rng: ChaCha8Rng,
    second: ConsumerSecond,
}

#[derive(Debug)]
enum NodeState {
    Consumer(Consumer),
    Router(Router),
    Producer,
}

/// Links, event queue and packet sizes: everything a node needs to send.
struct Transport {
    net: Network,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    interest_bytes: u32,
    data_bytes: u32,
    link_drops: u64,
}

impl Transport {
    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
    }

    fn send(&mut self, now: u64, node: usize, face: u16, packet: Packet) {
        let f = self.net.faces[node][face as usize];
        let bytes = match packet.kind {
            PacketKind::Interest => self.interest_bytes,
            PacketKind::Data => self.data_bytes,
        };
        match self.net.links[f.link].transmit(now, bytes) {
            Some(at) => self.schedule(
                at,
                Event::Arrive {
                    node: f.peer as u32,
                    face: f.peer_face,
                    packet,
                },
            ),
            None => self.link_drops += 1,
        }
    }
}

pub struct Simulation {
    config: SimConfig,
    prefixes: PrefixTable,
    transport: Transport,
    nodes: Vec<NodeState>,
    detectors: Vec<(String, AnyDetector)>,
    counters: SimCounters,
    metrics: Vec<MetricsRow>,
    alarms: Vec<Alarm>,
    name_buf: String,
}

fn node_seed(seed: u64, node: usize) -> u64 {
    let mut z = seed ^ (node as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Simulation {
    pub fn new(
        topology: &TopologySpec,
        profiles: &BTreeMap<String, TrafficProfile>,
        prefixes: &[String],
        config: SimConfig,
    ) -> Result<Self> {
        config.validate()?;
        let prefixes = PrefixTable::new(prefixes)?;
        let net = Network::build(topology, &prefixes, config.seed)?;
        let warmup_ns = config.warmup_s as u64 * NS_PER_S;
        let end_ns = warmup_ns + config.duration_s as u64 * NS_PER_S;

        let mut detectors = Vec::new();
        if let Some(dc) = &config.detector {
            for name in &config.detector_nodes {
                let i = net
                    .node_index(name)
                    .ok_or_else(|| Error::config(format!("detector placed on unknown node {name:?}")))?;
                if net.nodes[i].kind != NodeKind::Router {
                    return Err(Error::config(format!("detector node {name:?} is not a router")));
                }
                let cfg = DetectorConfig {
                    threshold: crate::threshold::ThresholdConfig {
                        rng_seed: dc.threshold.rng_seed ^ node_seed(config.seed, i),
                        ..dc.threshold
                    },
                    ..*dc
                };
                let det = AnyDetector::build(&cfg)?.with_time_origin(-(config.warmup_s as f64));
                detectors.push((name.clone(), det));
            }
        }

        let mut nodes = Vec::with_capacity(net.len());
        let mut attacker_index = 0u64;
        let mut initial = Vec::new();
        for (i, spec) in net.nodes.iter().enumerate() {
            let state = match spec.kind {
                NodeKind::Producer => NodeState::Producer,
                NodeKind::Router => NodeState::Router(Router {
                    cs: ContentStore::new(config.cs_capacity),
                    pit: PitTable::new(config.pit_capacity, secs_to_ns(config.pit_timeout_s)),
                    detector: detectors.iter().position(|(n, _)| *n == spec.name),
                    second: RouterSecond::default(),
                }),
                NodeKind::Consumer => {
                    let pname = spec.profile.as_deref().unwrap_or_default();
                    let profile = profiles
                        .get(pname)
                        .ok_or_else(|| Error::config(format!("consumer {:?}: unknown profile {pname:?}", spec.name)))?;
                    profile.validate()?;
                    let behaviour = match profile {
                        TrafficProfile::Regular { alpha, rate, catalog } if *rate > 0.0 => {
                            initial.push((0, i));
                            Behaviour::Regular {
                                zipf: ZipfSampler::new(*alpha, *catalog)?,
                                gap: Exp::new(*rate).map_err(|e| Error::config(format!("rate: {e}")))?,
                                outstanding: HashMap::new(),
                            }
                        }
                        TrafficProfile::Lda { rate, prefix, .. } | TrafficProfile::Fla { rate, prefix, .. }
                            if *rate > 0.0 =>
                        {
                            let pid = prefixes
                                .id(prefix)
                                .ok_or_else(|| Error::config(format!("attack prefix {prefix:?} is not configured")))?;
                            let (_, start, end) = profile.attack_interval(config.duration_s as f64).unwrap_or_default();
                            let generator = AttackGenerator::new(profile, pid, attacker_index);
                            attacker_index += 1;
                            initial.push((warmup_ns + secs_to_ns(start), i));
                            Behaviour::Attacker {
                                generator,
                                interval_ns: secs_to_ns(1.0 / rate).max(1),
                                end_ns: warmup_ns + secs_to_ns(end),
                            }
                        }
                        _ => Behaviour::Idle,
                    };
                    NodeState::Consumer(Consumer {
                        behaviour,
                        rng: ChaCha8Rng::seed_from_u64(node_seed(config.seed, i)),
                        next_token: 0,
                        second: ConsumerSecond::default(),
                    })
                }
            };
            nodes.push(state);
        }

        let mut transport = Transport {
            net,
            queue: BinaryHeap::new(),
            seq: 0,
            interest_bytes: config.interest_bytes,
            data_bytes: config.data_payload_bytes + config.data_header_bytes,
            link_drops: 0,
        };
        // Ticks first so that they precede same-instant packet events.
        let mut t = NS_PER_S;
        while t <= end_ns {
            transport.schedule(t, Event::Tick);
            t += NS_PER_S;
        }
        for (at, node) in initial {
            transport.schedule(at, Event::Issue { node: node as u32 });
        }

        Ok(Simulation {
            config,
            prefixes,
            transport,
            nodes,
            detectors,
            counters: SimCounters::default(),
            metrics: Vec::new(),
            alarms: Vec::new(),
            name_buf: String::new(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.transport.net
    }

    pub fn run(mut self) -> SimOutput {
        let end_ns = (self.config.warmup_s as u64 + self.config.duration_s as u64) * NS_PER_S;
        let mut second = 0u32;
        while let Some(Scheduled { time, event, .. }) = self.transport.queue.pop() {
            if time > end_ns {
                break;
            }
            self.counters.events += 1;
            match event {
                Event::Tick => {
                    self.close_second(second, time);
                    second += 1;
                }
                Event::Issue { node } => self.issue(node as usize, time),
                Event::Arrive { node, face, packet } => self.arrive(node as usize, face, packet, time),
                Event::Timeout { node, key, token } => self.timeout(node as usize, key, token, time),
            }
        }
        self.finish()
    }

    fn issue(&mut self, node: usize, now: u64) {
        let NodeState::Consumer(c) = &mut self.nodes[node] else {
            return;
        };
        let prefixes = self.prefixes.len();
        let retransmit_ns = secs_to_ns(self.config.retransmit_timeout_s);
        match &mut c.behaviour {
            Behaviour::Regular {
                zipf,
                gap,
                outstanding,
            } => {
                let key = regular_key(zipf.sample(&mut c.rng), prefixes);
                c.second.issued += 1;
                self.counters.interests_issued += 1;
                if let Some(p) = outstanding.get_mut(&key) {
                    p.waiters.push(now);
                } else {
                    c.next_token += 1;
                    let token = c.next_token;
                    outstanding.insert(
                        key,
                        Pending {
                            first_issue: now,
                            attempt: 0,
                            token,
                            waiters: Vec::new(),
                        },
                    );
                    self.transport.send(now, node, 0, Packet {
                        kind: PacketKind::Interest,
                        key,
                    });
                    self.transport.schedule(now + retransmit_ns, Event::Timeout {
                        node: node as u32,
                        key,
                        token,
                    });
                }
                let next = ((gap.sample(&mut c.rng) * NS_PER_S as f64).round() as u64).max(1);
                self.transport.schedule(now + next, Event::Issue { node: node as u32 });
            }
            Behaviour::Attacker {
                generator,
                interval_ns,
                end_ns,
            } => {
                if now >= *end_ns {
                    return;
                }
                let t_s = (now as f64 - (self.config.warmup_s as u64 * NS_PER_S) as f64) / NS_PER_S as f64;
                let key = generator.next_key(t_s);
                c.second.issued += 1;
                self.counters.attack_interests += 1;
                self.transport.send(now, node, 0, Packet {
                    kind: PacketKind::Interest,
                    key,
                });
                let next = now + *interval_ns;
                self.transport.schedule(next, Event::Issue { node: node as u32 });
            }
            Behaviour::Idle => {}
        }
    }

    fn timeout(&mut self, node: usize, key: ContentKey, token: u64, now: u64) {
        let NodeState::Consumer(c) = &mut self.nodes[node] else {
            return;
        };
        let Behaviour::Regular { outstanding, .. } = &mut c.behaviour else {
            return;
        };
        let Some(p) = outstanding.get_mut(&key) else {
            return;
        };
        if p.token != token {
            return;
        }
        if p.attempt >= self.config.max_retries {
            let p = outstanding.remove(&key).expect("present");
            self.counters.unsatisfied += 1 + p.waiters.len() as u64;
            return;
        }
        p.attempt += 1;
        c.next_token += 1;
        p.token = c.next_token;
        let token = p.token;
        self.counters.retransmissions += 1;
        self.transport.send(now, node, 0, Packet {
            kind: PacketKind::Interest,
            key,
        });
        self.transport.schedule(now + secs_to_ns(self.config.retransmit_timeout_s), Event::Timeout {
            node: node as u32,
            key,
            token,
        });
    }

    fn arrive(&mut self, node: usize, face: u16, packet: Packet, now: u64) {
        match &mut self.nodes[node] {
            NodeState::Router(r) => match packet.kind {
                PacketKind::Interest => {
                    r.second.interests_in += 1;
                    if let Some(d) = r.detector {
                        self.prefixes.render_into(packet.key, &mut self.name_buf);
                        self.detectors[d].1.observe_interest(&self.name_buf);
                    }
                    r.second.lookups += 1;
                    if r.cs.lookup(packet.key) {
                        r.second.hits += 1;
                        r.second.data_out += 1;
                        self.counters.cs_hits += 1;
                        self.transport.send(now, node, face, Packet {
                            kind: PacketKind::Data,
                            key: packet.key,
                        });
                        return;
                    }
                    let Some(out) = self.transport.net.fib[node][packet.key.prefix() as usize] else {
                        self.counters.no_route += 1;
                        return;
                    };
                    match r.pit.insert(packet.key, face, now) {
                        PitInsert::Created | PitInsert::Duplicate => {
                            r.second.pit_peak = r.second.pit_peak.max(r.pit.len());
                            self.transport.send(now, node, out, packet);
                        }
                        PitInsert::Aggregated => {}
                        PitInsert::Full => {
                            r.second.pit_peak = r.pit.len();
                            self.counters.pit_full_drops += 1;
                        }
                    }
                }
                PacketKind::Data => match r.pit.satisfy(packet.key, now) {
                    Some(entry) => {
                        r.cs.insert(packet.key);
                        for f in entry.faces {
                            r.second.data_out += 1;
                            self.transport.send(now, node, f, packet);
                        }
                    }
                    None => self.counters.unsolicited_data += 1,
                },
            },
            NodeState::Producer => {
                if packet.kind != PacketKind::Interest {
                    return;
                }
                if is_nonexistent(packet.key) || !self.transport.net.serves(node, packet.key.prefix(), &self.prefixes) {
                    self.counters.unanswered += 1;
                    return;
                }
                self.transport.send(now, node, face, Packet {
                    kind: PacketKind::Data,
                    key: packet.key,
                });
            }
            NodeState::Consumer(c) => {
                if packet.kind != PacketKind::Data {
                    return;
                }
                c.second.data_in += 1;
                if let Behaviour::Regular { outstanding, .. } = &mut c.behaviour {
                    if let Some(p) = outstanding.remove(&packet.key) {
                        for issued in std::iter::once(p.first_issue).chain(p.waiters) {
                            c.second.rtt_sum_ns += (now - issued) as u128;
                            c.second.rtt_count += 1;
                            self.counters.satisfied += 1;
                        }
                    }
                }
            }
        }
    }

    fn close_second(&mut self, second: u32, now: u64) {
        let record = second >= self.config.warmup_s;
        let time_s = second.wrapping_sub(self.config.warmup_s);
        for (i, state) in self.nodes.iter_mut().enumerate() {
            let name = &self.transport.net.nodes[i].name;
            match state {
                NodeState::Router(r) => {
                    r.pit.purge(now);
                    let s = std::mem::take(&mut r.second);
                    let cap = r.pit.capacity();
                    if record {
                        self.metrics.push(MetricsRow {
                            time_s,
                            node: name.clone(),
                            cache_hit_rate: (s.lookups > 0).then(|| s.hits as f64 / s.lookups as f64),
                            pit_available_rate: Some(if cap == 0 {
                                0.0
                            } else {
                                (cap - s.pit_peak.min(cap)) as f64 / cap as f64
                            }),
                            avg_rtt_ms: None,
                            interests_in: s.interests_in,
                            data_out: s.data_out,
                        });
                    }
                    r.second.pit_peak = r.pit.len();
                }
                NodeState::Consumer(c) => {
                    let s = std::mem::take(&mut c.second);
                    if record {
                        self.metrics.push(MetricsRow {
                            time_s,
                            node: name.clone(),
                            cache_hit_rate: None,
                            pit_available_rate: None,
                            avg_rtt_ms: (s.rtt_count > 0).then(|| s.rtt_sum_ns as f64 / s.rtt_count as f64 / 1e6),
                            interests_in: s.issued,
                            data_out: s.data_in,
                        });
                    }
                }
                NodeState::Producer => {}
            }
        }
        for (_, d) in &mut self.detectors {
            for a in d.end_epoch() {
                if a.wall_time > 0.0 {
                    self.alarms.push(a);
                } else {
                    self.counters.warmup_alarms += 1;
                }
            }
        }
    }

    fn finish(mut self) -> SimOutput {
        for state in &self.nodes {
            if let NodeState::Router(r) = state {
                self.counters.pit_expired += r.pit.expired;
            }
        }
        self.counters.link_drops = self.transport.link_drops;
        let mut detection_trace = Vec::new();
        let mut footprints = Vec::new();
        for (name, d) in &mut self.detectors {
            detection_trace.extend(d.take_trace());
            footprints.push((name.clone(), d.memory_footprint()));
        }
        SimOutput {
            metrics: self.metrics,
            alarms: self.alarms,
            detection_trace,
            counters: self.counters,
            detector_footprint_bits: footprints,
        }
    }
}
