//! Discrete-event churn engine.
//!
//! Joins arrive as a Poisson process of total rate `lambda_f * N0`; every alive
//! node fails at rate `lambda_f` and stabilizes at rate `lambda_s = r *
//! lambda_f`, a fraction `alpha` of which act on the successor list. Exactly one
//! event is applied per step, chosen with probability proportional to its rate
//! at the current population.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use std::collections::BTreeSet;

use crate::observatory::GroundTruth;
use crate::protocol::{self, LookupTrace, NodeState, ProtocolError, RingOracle, RingView};
use crate::ring::{Key, KeySpace};
use crate::{invalid, Error};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChurnConfig {
    /// `log2 K`
    pub key_bits: u32,
    /// Target population `N0`.
    pub nodes: usize,
    /// Successor-list length `S`.
    pub successors: usize,
    /// Failure rate per node per unit time.
    pub lambda_f: f64,
    /// `lambda_s / lambda_f`. When `lambda_f == 0` it is read as the absolute
    /// stabilization rate per node.
    pub r: f64,
    pub alpha: f64,
    pub seed: u64,
    pub warmup_events: u64,
    pub measure_events: u64,
    pub snapshot_every: u64,
    pub probes_per_snapshot: usize,
    /// Broken-ring repairs allowed before the trial is abandoned.
    pub repair_budget: u64,
}

impl ChurnConfig {
    /// Defaults: warm-up of `10 N0` events, one snapshot every `N0` events with
    /// ten probes each, a measurement window of a hundred snapshots.
    pub fn new(key_bits: u32, nodes: usize, successors: usize, r: f64, alpha: f64, seed: u64) -> Self {
        let n = nodes as u64;
        Self {
            key_bits,
            nodes,
            successors,
            lambda_f: 1.0,
            r,
            alpha,
            seed,
            warmup_events: 10 * n,
            measure_events: 100 * n,
            snapshot_every: n.max(1),
            probes_per_snapshot: 10,
            repair_budget: 10 * n.max(1),
        }
    }

    pub fn space(&self) -> Result<KeySpace, Error> {
        KeySpace::new(self.key_bits)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let space = self.space()?;
        if self.nodes < 2 || self.nodes as u64 >= space.size() {
            return Err(invalid("nodes", format!("need 2 <= N0 < K = {}", space.size())));
        }
        if self.successors == 0 {
            return Err(invalid("successors", "successor list must hold at least one entry"));
        }
        if !(self.lambda_f >= 0.0 && self.lambda_f.is_finite()) {
            return Err(invalid("lambda_f", "must be finite and non-negative"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("r", "must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie strictly between 0 and 1"));
        }
        if self.snapshot_every == 0 {
            return Err(invalid("snapshot_every", "must be positive"));
        }
        Ok(())
    }

    pub fn stabilization_rate(&self) -> f64 {
        if self.lambda_f > 0.0 {
            self.r * self.lambda_f
        } else {
            self.r
        }
    }

    /// Per-kind event rates at population `n`, in [`EventKind::ALL`] order.
    pub fn rates(&self, n: usize) -> [f64; 4] {
        let n = n as f64;
        let ls = self.stabilization_rate();
        [self.lambda_f * self.nodes as f64, self.lambda_f * n, self.alpha * ls * n, (1.0 - self.alpha) * ls * n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Join,
    Failure,
    SuccessorStabilization,
    FingerStabilization,
}

impl EventKind {
    pub const ALL: [EventKind; 4] =
        [EventKind::Join, EventKind::Failure, EventKind::SuccessorStabilization, EventKind::FingerStabilization];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    /// Joining key, failing node, or stabilizing node.
    pub subject: Key,
    /// Bootstrap contact of a join.
    pub contact: Option<Key>,
    /// Finger chosen by a finger stabilization, 1-based.
    pub finger: Option<usize>,
}

/// Running tallies used by the engine self-checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLedger {
    pub observed: [u64; 4],
    /// Sum over events of the probability of each kind.
    pub expected: [f64; 4],
    /// Sum over events of `p (1 - p)`.
    pub variance: [f64; 4],
    /// Integral of `N(t) dt`.
    pub population_time: f64,
    pub elapsed: f64,
}

impl EventLedger {
    pub fn mean_population(&self) -> f64 {
        self.population_time / self.elapsed
    }
}

/// The simulated ring: every alive node, the clock and the random stream.
pub struct SimState {
    space: KeySpace,
    successor_len: usize,
    nodes: IndexMap<Key, NodeState>,
    order: BTreeSet<Key>,
    rng: ChaCha8Rng,
    pub clock: f64,
    pub events: u64,
    pub breakup_events: u64,
    pub skipped_events: u64,
    pub ledger: EventLedger,
}

impl SimState {
    pub fn space(&self) -> KeySpace {
        self.space
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        self.order.iter().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeState> {
        self.order.iter().map(|k| &self.nodes[k])
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            space: self.space,
            clock: self.clock,
            event_index: self.events,
            nodes: self.nodes().cloned().collect(),
        }
    }

    fn random_alive(&mut self) -> Key {
        let i = self.rng.gen_range(0..self.nodes.len());
        *self.nodes.get_index(i).expect("index in range").0
    }

    fn random_vacant(&mut self) -> Key {
        loop {
            let k = Key(self.rng.gen_range(0..self.space.size()));
            if !self.nodes.contains_key(&k) {
                return k;
            }
        }
    }

    /// Re-seeds `key`'s successor list from ground truth.
    fn repair(&mut self, key: Key) {
        let truth = GroundTruth::new(self.space, self.order.iter().copied());
        if let Some(node) = self.nodes.get_mut(&key) {
            node.successors = truth.converged_state(key, self.successor_len).successors;
        }
    }
}

impl RingView for SimState {
    fn space(&self) -> KeySpace {
        self.space
    }

    fn is_alive(&self, key: Key) -> bool {
        self.nodes.contains_key(&key)
    }

    fn node(&self, key: Key) -> Option<&NodeState> {
        self.nodes.get(&key)
    }
}

impl RingOracle for SimState {
    fn node_mut(&mut self, key: Key) -> Option<&mut NodeState> {
        self.nodes.get_mut(&key)
    }

    fn insert(&mut self, node: NodeState) {
        self.order.insert(node.key);
        self.nodes.insert(node.key, node);
    }
}

/// Populates every key independently with probability `N0 / K` and sets all
/// pointers to ground truth. Draws with fewer than two nodes are redrawn.
pub fn init_ring(cfg: &ChurnConfig) -> Result<SimState, Error> {
    cfg.validate()?;
    let space = cfg.space()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.nodes as f64 / space.size() as f64;
    let keys = loop {
        let keys = sample_population(&mut rng, space.size(), p);
        if keys.len() >= 2 {
            break keys;
        }
    };
    let truth = GroundTruth::new(space, keys.iter().copied());
    let nodes = truth.keys().iter().map(|&k| (k, truth.converged_state(k, cfg.successors))).collect();
    Ok(SimState {
        space,
        successor_len: cfg.successors,
        nodes,
        order: keys.into_iter().collect(),
        rng,
        clock: 0.0,
        events: 0,
        breakup_events: 0,
        skipped_events: 0,
        ledger: EventLedger::default(),
    })
}

/// Bernoulli(p) on every key in `0..size`, by geometric skips.
fn sample_population(rng: &mut ChaCha8Rng, size: u64, p: f64) -> Vec<Key> {
    let mut keys = Vec::new();
    if p >= 1.0 {
        return (0..size).map(Key).collect();
    }
    let log_q = (1.0 - p).ln();
    let mut pos: u64 = 0;
    loop {
        let u: f64 = rng.gen();
        // number of empty keys before the next populated one
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (size - pos) as f64 {
            break;
        }
        pos += skip as u64;
        keys.push(Key(pos));
        pos += 1;
        if pos >= size {
            break;
        }
    }
    keys
}

/// Draws the next event and the time until it happens.
pub fn next_event(state: &mut SimState, cfg: &ChurnConfig) -> (Event, f64) {
    let n = state.alive_count();
    let rates = cfg.rates(n);
    let total: f64 = rates.iter().sum();
    let e: f64 = Exp1.sample(&mut state.rng);
    let dt = e / total;

    let ledger = &mut state.ledger;
    for (i, rate) in rates.iter().enumerate() {
        let p = rate / total;
        ledger.expected[i] += p;
        ledger.variance[i] += p * (1.0 - p);
    }
    ledger.population_time += n as f64 * dt;
    ledger.elapsed += dt;

    let mut u = state.rng.gen::<f64>() * total;
    let mut kind = EventKind::FingerStabilization;
    for (k, rate) in EventKind::ALL.iter().zip(rates) {
        if u < rate {
            kind = *k;
            break;
        }
        u -= rate;
    }
    state.ledger.observed[kind.index()] += 1;

    let event = match kind {
        EventKind::Join => {
            let subject = state.random_vacant();
            let contact = state.random_alive();
            Event { kind, subject, contact: Some(contact), finger: None }
        }
        EventKind::Failure | EventKind::SuccessorStabilization => {
            Event { kind, subject: state.random_alive(), contact: None, finger: None }
        }
        EventKind::FingerStabilization => {
            let subject = state.random_alive();
            let finger = state.rng.gen_range(1..=state.space.bits() as usize);
            Event { kind, subject, contact: None, finger: Some(finger) }
        }
    };
    (event, dt)
}

/// Applies one event. Broken-ring signals are counted and repaired here.
pub fn apply_event(state: &mut SimState, event: &Event) {
    state.events += 1;
    match event.kind {
        EventKind::Join => {
            let contact = event.contact.expect("join carries a contact");
            let s = state.successor_len;
            let mut attempt = protocol::join(state, event.subject, contact, s);
            if let Err(ProtocolError::BrokenRing { node }) = attempt {
                state.breakup_events += 1;
                state.repair(node);
                attempt = protocol::join(state, event.subject, contact, s);
            }
            if let Err(e) = attempt {
                if let ProtocolError::BrokenRing { node } = e {
                    state.breakup_events += 1;
                    state.repair(node);
                }
                state.skipped_events += 1;
            }
        }
        EventKind::Failure => {
            if state.nodes.len() <= 1 {
                state.skipped_events += 1;
                return;
            }
            state.nodes.swap_remove(&event.subject);
            state.order.remove(&event.subject);
        }
        EventKind::SuccessorStabilization => {
            if let Err(ProtocolError::BrokenRing { node }) = protocol::fix_successors(state, event.subject) {
                state.breakup_events += 1;
                state.repair(node);
            }
        }
        EventKind::FingerStabilization => {
            let finger = event.finger.expect("finger stabilization carries an index");
            if let Err(ProtocolError::BrokenRing { node }) = protocol::fix_fingers(state, event.subject, finger) {
                state.breakup_events += 1;
                state.repair(node);
            }
        }
    }
}

/// Advances the clock and applies one event.
pub fn step(state: &mut SimState, cfg: &ChurnConfig) -> Event {
    let (event, dt) = next_event(state, cfg);
    state.clock += dt;
    apply_event(state, &event);
    event
}

/// Frozen copy of the ring at one instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub space: KeySpace,
    pub clock: f64,
    pub event_index: u64,
    /// Alive nodes, sorted by key.
    nodes: Vec<NodeState>,
}

impl Snapshot {
    pub fn from_nodes(space: KeySpace, nodes: impl IntoIterator<Item = NodeState>) -> Self {
        let mut nodes: Vec<NodeState> = nodes.into_iter().collect();
        nodes.sort_by_key(|n| n.key);
        nodes.dedup_by_key(|n| n.key);
        Self { space, clock: 0.0, event_index: 0, nodes }
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_sorted(self.space, self.nodes.iter().map(|n| n.key).collect())
    }
}

impl RingView for Snapshot {
    fn space(&self) -> KeySpace {
        self.space
    }

    fn is_alive(&self, key: Key) -> bool {
        self.nodes.binary_search_by_key(&key, |n| n.key).is_ok()
    }

    fn node(&self, key: Key) -> Option<&NodeState> {
        self.nodes.binary_search_by_key(&key, |n| n.key).ok().map(|i| &self.nodes[i])
    }
}

/// A measurement lookup: uniform alive source, uniform target key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probe {
    pub source: Key,
    pub target: Key,
    pub trace: LookupTrace,
}

/// Receives every snapshot of the measurement window with its probes.
pub trait TrialObserver {
    fn observe(&mut self, snapshot: &Snapshot, probes: &[Probe]);
}

impl<F: FnMut(&Snapshot, &[Probe])> TrialObserver for F {
    fn observe(&mut self, snapshot: &Snapshot, probes: &[Probe]) {
        self(snapshot, probes)
    }
}

/// Runs `count` read-only lookups against `snapshot`.
pub fn run_probes(snapshot: &Snapshot, count: usize, rng: &mut impl Rng) -> Vec<Probe> {
    (0..count)
        .map(|_| {
            let source = snapshot.nodes[rng.gen_range(0..snapshot.nodes.len())].key;
            let target = Key(rng.gen_range(0..snapshot.space.size()));
            let trace = protocol::find_successor(snapshot, source, target);
            Probe { source, target, trace }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub events: u64,
    pub snapshots: u64,
    pub breakup_events: u64,
    pub skipped_events: u64,
    /// Set when the repair budget ran out; the observer saw partial results.
    pub aborted: bool,
    pub ledger: EventLedger,
}

/// Warm-up, then a measurement window with periodic snapshots and probes.
pub fn run_trial<O: TrialObserver + ?Sized>(cfg: &ChurnConfig, observer: &mut O) -> Result<TrialReport, Error> {
    let mut state = init_ring(cfg)?;
    let mut probe_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    probe_rng.set_stream(1);
    let mut snapshots = 0;
    let mut aborted = false;
    let total = cfg.warmup_events + cfg.measure_events;
    for i in 1..=total {
        step(&mut state, cfg);
        if state.breakup_events > cfg.repair_budget {
            aborted = true;
            break;
        }
        if i > cfg.warmup_events && (i - cfg.warmup_events).is_multiple_of(cfg.snapshot_every) {
            let snap = state.snapshot();
            let probes = run_probes(&snap, cfg.probes_per_snapshot, &mut probe_rng);
            observer.observe(&snap, &probes);
            snapshots += 1;
        }
    }
    Ok(TrialReport {
        events: state.events,
        snapshots,
        breakup_events: state.breakup_events,
        skipped_events: state.skipped_events,
        aborted,
        ledger: state.ledger.clone(),
    })
}
