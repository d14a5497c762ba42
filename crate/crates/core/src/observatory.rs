//! Measurement: ground truth, pointer census, probe bookkeeping and
//! aggregation across trials.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{Probe, Snapshot, TrialObserver};
use crate::protocol::{LookupTrace, NodeState, RingView};
use crate::ring::{Key, KeySpace};
use crate::Error;

/// The correct ring implied by a set of alive keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    space: KeySpace,
    keys: Vec<Key>,
}

impl GroundTruth {
    pub fn new(space: KeySpace, keys: impl IntoIterator<Item = Key>) -> Self {
        let mut keys: Vec<Key> = keys.into_iter().collect();
        keys.sort_unstable();
        keys.dedup();
        Self::from_sorted(space, keys)
    }

    /// `keys` must be sorted and free of duplicates.
    pub fn from_sorted(space: KeySpace, keys: Vec<Key>) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        Self { space, keys }
    }

    pub fn space(&self) -> KeySpace {
        self.space
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// First alive key at or after `k`, wrapping. Panics on an empty ring.
    pub fn successor_of(&self, k: Key) -> Key {
        let i = self.keys.partition_point(|&x| x < k);
        self.keys[i % self.keys.len()]
    }

    /// The `k`-th alive key strictly after `n`, wrapping; `k >= 1`.
    pub fn kth_successor(&self, n: Key, k: usize) -> Key {
        let i = self.keys.partition_point(|&x| x <= n);
        self.keys[(i + k - 1) % self.keys.len()]
    }

    /// Last alive key strictly before `n`, wrapping.
    pub fn predecessor_of(&self, n: Key) -> Key {
        let i = self.keys.partition_point(|&x| x < n);
        let len = self.keys.len();
        self.keys[(i + len - 1) % len]
    }

    /// The state a node at `n` reaches on a ring with no churn.
    pub fn converged_state(&self, n: Key, successor_len: usize) -> NodeState {
        let bits = self.space.bits() as usize;
        let mut node = NodeState::empty(n, successor_len, bits);
        node.predecessor = Some(self.predecessor_of(n));
        for (i, s) in node.successors.iter_mut().enumerate() {
            *s = Some(self.kth_successor(n, i + 1));
        }
        for (i, f) in node.fingers.iter_mut().enumerate() {
            let start = self.space.finger_start(n, i + 1).expect("index within 1..=M");
            *f = Some(self.successor_of(start));
        }
        node
    }

    /// Clockwise distance from every alive key to the next one.
    pub fn gaps(&self) -> Vec<u64> {
        let len = self.keys.len();
        (0..len)
            .map(|i| {
                let d = self.space.distance(self.keys[(i + 1) % len], self.keys[i]).0;
                if d == 0 {
                    self.space.size()
                } else {
                    d
                }
            })
            .collect()
    }
}

/// Hits out of a number of observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub hits: u64,
    pub total: u64,
}

impl Tally {
    pub fn record(&mut self, hit: bool) {
        self.hits += hit as u64;
        self.total += 1;
    }

    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.hits as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.hits += other.hits;
        self.total += other.total;
    }
}

/// Per-index pointer statistics over one or more snapshots.
///
/// `w[k-1]`, `d[k-1]` are the wrong and dead `k`-th successors, `f[k-1]` the
/// dead `k`-th fingers and `p_bu[n-1]` the nodes whose first `n` successors
/// are all dead. Nil entries count as dead.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PointerCensus {
    pub w: Vec<Tally>,
    pub d: Vec<Tally>,
    pub f: Vec<Tally>,
    pub p_bu: Vec<Tally>,
}

impl PointerCensus {
    pub fn merge(&mut self, other: &PointerCensus) {
        fn merge_vec(into: &mut Vec<Tally>, from: &[Tally]) {
            if into.len() < from.len() {
                into.resize(from.len(), Tally::default());
            }
            for (a, b) in into.iter_mut().zip(from) {
                a.merge(b);
            }
        }
        merge_vec(&mut self.w, &other.w);
        merge_vec(&mut self.d, &other.d);
        merge_vec(&mut self.f, &other.f);
        merge_vec(&mut self.p_bu, &other.p_bu);
    }
}

/// Counts wrong and dead pointers in one snapshot.
///
/// Successor index `k` is skipped for nodes whose true `k`-th successor is
/// the node itself.
pub fn census(snapshot: &Snapshot) -> PointerCensus {
    let truth = snapshot.ground_truth();
    let s = snapshot.nodes().iter().map(|n| n.successors.len()).max().unwrap_or(0);
    let m = snapshot.space.bits() as usize;
    let mut c = PointerCensus {
        w: vec![Tally::default(); s],
        d: vec![Tally::default(); s],
        f: vec![Tally::default(); m],
        p_bu: vec![Tally::default(); s],
    };
    let dead = |p: Option<Key>| p.is_none_or(|k| !snapshot.is_alive(k));
    for node in snapshot.nodes() {
        let mut all_dead = true;
        for k in 1..=s {
            let entry = node.successor(k);
            let is_dead = dead(entry);
            let truth_k = truth.kth_successor(node.key, k);
            if truth_k != node.key {
                c.w[k - 1].record(is_dead || entry != Some(truth_k));
                c.d[k - 1].record(is_dead);
            }
            all_dead &= is_dead;
            c.p_bu[k - 1].record(all_dead);
        }
        for k in 1..=m {
            c.f[k - 1].record(dead(node.finger(k)));
        }
    }
    c
}

/// Whether a lookup for `target` returned the key's true owner.
pub fn probe_consistency(truth: &GroundTruth, trace: &LookupTrace, target: Key) -> bool {
    trace.result == Some(truth.successor_of(target))
}

/// Lookup-probe totals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProbeTally {
    /// Probes that returned an owner.
    pub resolved: u64,
    pub inconsistent: u64,
    /// Probes that hit a broken ring.
    pub broken: u64,
    pub hops: u64,
    pub timeouts: u64,
}

impl ProbeTally {
    pub fn record(&mut self, truth: &GroundTruth, probe: &Probe) {
        if probe.trace.result.is_none() {
            self.broken += 1;
            return;
        }
        self.resolved += 1;
        self.inconsistent += !probe_consistency(truth, &probe.trace, probe.target) as u64;
        self.hops += probe.trace.hops as u64;
        self.timeouts += probe.trace.timeouts as u64;
    }

    pub fn inconsistency(&self) -> f64 {
        self.inconsistent as f64 / self.resolved as f64
    }

    pub fn mean_cost(&self) -> f64 {
        (self.hops + self.timeouts) as f64 / self.resolved as f64
    }

    pub fn mean_hops(&self) -> f64 {
        self.hops as f64 / self.resolved as f64
    }

    pub fn merge(&mut self, other: &ProbeTally) {
        self.resolved += other.resolved;
        self.inconsistent += other.inconsistent;
        self.broken += other.broken;
        self.hops += other.hops;
        self.timeouts += other.timeouts;
    }
}

/// Measured quantities, named as in result files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Wrong `k`-th successor.
    W,
    /// Dead `k`-th successor.
    D,
    /// Dead `k`-th finger.
    F,
    /// First `n` successors all dead.
    PBu,
    Inconsistency,
    /// Mean lookup cost, hops plus timeouts.
    Lookup,
}

impl Quantity {
    pub const ALL: [Quantity; 6] =
        [Quantity::W, Quantity::D, Quantity::F, Quantity::PBu, Quantity::Inconsistency, Quantity::Lookup];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::W => "w",
            Quantity::D => "d",
            Quantity::F => "f",
            Quantity::PBu => "p_bu",
            Quantity::Inconsistency => "inconsistency",
            Quantity::Lookup => "lookup",
        }
    }

    /// Whether the quantity is indexed by `k` or `n`.
    pub fn indexed(self) -> bool {
        matches!(self, Quantity::W | Quantity::D | Quantity::F | Quantity::PBu)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Quantity::ALL.into_iter().find(|q| q.name() == s).ok_or_else(|| Error::UnknownQuantity(s.to_string()))
    }
}

/// A quantity name with an optional index: `w1`, `p_bu2`, `fk` (all k), `lookup`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selector {
    pub quantity: Quantity,
    pub index: Option<usize>,
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if let Ok(quantity) = s.parse() {
            return Ok(Selector { quantity, index: None });
        }
        let unknown = || Error::UnknownQuantity(s.to_string());
        if let Some(base) = s.strip_suffix('k').or_else(|| s.strip_suffix('n')) {
            let quantity: Quantity = base.parse().map_err(|_| unknown())?;
            return if quantity.indexed() { Ok(Selector { quantity, index: None }) } else { Err(unknown()) };
        }
        let split = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (base, digits) = s.split_at(split);
        let quantity: Quantity = base.parse().map_err(|_| unknown())?;
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if !quantity.indexed() || index == 0 {
            return Err(unknown());
        }
        Ok(Selector { quantity, index: Some(index) })
    }
}

/// Everything one trial measured, accumulated over its snapshots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialMeasurement {
    pub census: PointerCensus,
    pub probes: ProbeTally,
    pub snapshots: u64,
}

impl TrialMeasurement {
    /// Per-trial value of every quantity: pooled fractions for pointer
    /// statistics, probe means for lookups. Pairs are `(hits, total)`.
    pub fn values(&self) -> BTreeMap<(Quantity, usize), (f64, u64, u64)> {
        let mut out = BTreeMap::new();
        for (q, tallies) in [
            (Quantity::W, &self.census.w),
            (Quantity::D, &self.census.d),
            (Quantity::F, &self.census.f),
            (Quantity::PBu, &self.census.p_bu),
        ] {
            for (i, t) in tallies.iter().enumerate() {
                out.insert((q, i + 1), (t.fraction(), t.hits, t.total));
            }
        }
        let p = &self.probes;
        out.insert((Quantity::Inconsistency, 0), (p.inconsistency(), p.inconsistent, p.resolved));
        out.insert((Quantity::Lookup, 0), (p.mean_cost(), p.hops + p.timeouts, p.resolved));
        out
    }
}

impl TrialObserver for TrialMeasurement {
    fn observe(&mut self, snapshot: &Snapshot, probes: &[Probe]) {
        self.census.merge(&census(snapshot));
        let truth = snapshot.ground_truth();
        for probe in probes {
            self.probes.record(&truth, probe);
        }
        self.snapshots += 1;
    }
}

/// Parameters that identify a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub key_bits: u32,
    pub nodes: usize,
    pub successors: usize,
    pub r: f64,
    pub alpha: f64,
}

/// One trial's values at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub point: Point,
    pub seed: u64,
    pub measurement: TrialMeasurement,
    pub aborted: bool,
}

/// Mean and standard error of one quantity across trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub quantity: Quantity,
    pub index: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; NaN for a single trial.
    pub stderr: f64,
    /// Trials with a defined value.
    pub trials: usize,
    /// Hits pooled over all trials.
    pub hits: u64,
    /// Observations pooled over all trials.
    pub count: u64,
}

/// Unweighted mean over trials of every quantity. Trials must agree on the
/// point; trials with no observations of a quantity do not contribute to it.
pub fn aggregate(trials: &[TrialResult]) -> Result<Vec<Summary>, Error> {
    let first = trials.first().ok_or(Error::NoTrials)?;
    let p = first.point;
    for t in trials {
        let q = t.point;
        if q.key_bits != p.key_bits {
            return Err(Error::MismatchedTrials("K"));
        }
        if q.nodes != p.nodes {
            return Err(Error::MismatchedTrials("N"));
        }
        if q.successors != p.successors {
            return Err(Error::MismatchedTrials("S"));
        }
        if q.r != p.r {
            return Err(Error::MismatchedTrials("r"));
        }
        if q.alpha != p.alpha {
            return Err(Error::MismatchedTrials("alpha"));
        }
    }
    let mut pooled: BTreeMap<(Quantity, usize), (Vec<f64>, u64, u64)> = BTreeMap::new();
    for t in trials {
        for (key, (value, hits, total)) in t.measurement.values() {
            let e = pooled.entry(key).or_default();
            if value.is_finite() {
                e.0.push(value);
            }
            e.1 += hits;
            e.2 += total;
        }
    }
    Ok(pooled
        .into_iter()
        .map(|((quantity, index), (values, hits, count))| {
            let (mean, stderr) = mean_stderr(&values);
            Summary { quantity, index, mean, stderr, trials: values.len(), hits, count }
        })
        .collect())
}

/// Mean and standard error of the mean; NaN where undefined.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
