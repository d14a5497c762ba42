//! Steady-state fluid-model predictions.
//!
//! Everything here is a pure function of [`TheoryParams`]. Probabilities are
//! reported as [`Estimate`]s: the raw formula value, the value clamped to
//! `[0, 1]`, and whether the formula is inside its region of validity.

use serde::{Deserialize, Serialize};

use crate::{invalid, Error};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// `log2 K`, also the number of fingers.
    pub key_bits: u32,
    pub nodes: usize,
    pub successors: usize,
    pub r: f64,
    pub alpha: f64,
}

impl TheoryParams {
    pub fn new(key_bits: u32, nodes: usize, successors: usize, r: f64, alpha: f64) -> Result<Self, Error> {
        let p = Self { key_bits, nodes, successors, r, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.key_bits == 0 || self.key_bits > crate::KeySpace::MAX_BITS {
            return Err(Error::InvalidKeySpace(self.key_bits));
        }
        if self.nodes == 0 || self.nodes as u64 >= self.size() {
            return Err(invalid("nodes", format!("need 1 <= N < K = {}", self.size())));
        }
        if self.successors == 0 {
            return Err(invalid("successors", "must be at least 1"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("r", "must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie strictly between 0 and 1"));
        }
        Ok(())
    }

    pub fn size(&self) -> u64 {
        1u64 << self.key_bits
    }

    pub fn fingers(&self) -> usize {
        self.key_bits as usize
    }

    /// Probability that a key is unpopulated, `(K - N) / K`.
    pub fn rho(&self) -> f64 {
        (self.size() - self.nodes as u64) as f64 / self.size() as f64
    }

    /// Successor stabilizations per failure, `alpha r`.
    pub fn successor_rate(&self) -> f64 {
        self.alpha * self.r
    }
}

/// A predicted probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Formula value before clamping.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub value: f64,
    /// False outside the formula's region of validity.
    pub valid: bool,
}

impl Estimate {
    pub fn new(raw: f64, valid: bool) -> Self {
        let in_range = (0.0..=1.0).contains(&raw);
        Self { raw, value: raw.clamp(0.0, 1.0), valid: valid && in_range }
    }

    pub fn exact(raw: f64) -> Self {
        Self::new(raw, true)
    }
}

/// Probability that a gap between consecutive nodes is `x` keys long.
pub fn interval_pmf(x: u64, p: &TheoryParams) -> Result<f64, Error> {
    if x < 1 {
        return Err(Error::DistanceOutOfRange(x));
    }
    let rho = p.rho();
    Ok(rho.powf((x - 1) as f64) * (1.0 - rho))
}

/// Probability of at least one node among `x` consecutive keys.
pub fn at_least_one(x: u64, p: &TheoryParams) -> f64 {
    1.0 - p.rho().powf(x as f64)
}

/// Probability that the first node after a key sits `i` keys further on.
pub fn first_node_at(i: u64, p: &TheoryParams) -> f64 {
    let rho = p.rho();
    rho.powf(i as f64) * (1.0 - rho)
}

/// The same, conditioned on a node among the `x` keys; `0 <= i < x`.
pub fn first_node_given_some(i: u64, x: u64, p: &TheoryParams) -> f64 {
    first_node_at(i, p) / at_least_one(x, p)
}

/// Probability that a node and at least `depth` of its immediate
/// predecessors share their `finger`-th finger.
pub fn p_share(depth: usize, finger: usize, p: &TheoryParams) -> f64 {
    share_table(depth, p)[finger - 1]
}

/// `p_share(depth, k)` for every `k` in `1..=M`.
///
/// The `depth` predecessors together span `D` keys with negative binomial
/// probability; they share when `D < 2^(k-1)` and none of the `D` keys just
/// before the node's finger start is populated.
pub fn share_table(depth: usize, p: &TheoryParams) -> Vec<f64> {
    assert!(depth >= 1);
    let m = p.fingers();
    let rho = p.rho();
    if depth == 1 {
        return (1..=m).map(|k| rho / (1.0 + rho) * (1.0 - rho.powf(2f64.powi(k as i32) - 2.0))).collect();
    }
    let j = depth as f64;
    let mut out = Vec::with_capacity(m);
    // term(D) = C(D-1, j-1) (1-rho)^j rho^(2D-j), starting at D = j
    let mut term = ((1.0 - rho) * rho).powi(depth as i32);
    let mut sum = 0.0;
    let mut d = depth as u64;
    for k in 1..=m {
        let limit = 1u64 << (k - 1);
        while d < limit {
            sum += term;
            term *= d as f64 / (d as f64 - j + 1.0) * rho * rho;
            d += 1;
            if term == 0.0 {
                d = u64::MAX;
            }
        }
        out.push(sum);
    }
    out
}

/// Probability that a joining node copies its successor's `k`-th finger as
/// its own `k`-th finger. The closed form holds for `k >= 3`; smaller
/// indices return an invalid zero.
pub fn p_join(k: usize, p: &TheoryParams) -> Estimate {
    if k < 3 {
        return Estimate::new(0.0, false);
    }
    let rho = p.rho();
    let span = 2f64.powi(k as i32 - 2);
    let miss = 1.0 - rho.powf(span - 2.0);
    let raw = rho * miss + (1.0 - rho) * miss - (1.0 - rho) * rho * (span - 2.0) * rho.powf(span - 3.0);
    Estimate::exact(raw)
}

/// Successor-pointer predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessorPredictions {
    /// Wrong `k`-th successor, `k` in `1..=S`.
    pub w: Vec<Estimate>,
    /// Dead `k`-th successor, `k * w1 / 2`.
    pub d: Vec<Estimate>,
    /// Leading-order dead `k`-th successor, `k / (alpha r)`.
    pub d_leading: Vec<Estimate>,
    /// Lookup inconsistency `w1 - d1`.
    pub inconsistency: Estimate,
}

pub fn successor_predictions(p: &TheoryParams) -> SuccessorPredictions {
    let ar = p.successor_rate();
    let w1 = 2.0 / (3.0 + ar);
    let d1 = w1 / 2.0;
    let w = (1..=p.successors)
        .map(|k| {
            if k == 1 {
                Estimate::exact(w1)
            } else {
                let k = k as f64;
                Estimate::new(k * (k + 1.0) / ar, k <= p.r.sqrt())
            }
        })
        .collect();
    let d = (1..=p.successors).map(|k| Estimate::exact(k as f64 * d1)).collect();
    let d_leading = (1..=p.successors).map(|k| Estimate::exact(k as f64 / ar)).collect();
    SuccessorPredictions { w, d, d_leading, inconsistency: Estimate::exact(w1 - d1) }
}

/// Probability that the first `n` successors of a node are all dead,
/// `(n+1)! / (2 (alpha r)^n)`.
pub fn breakup_probability(n: usize, p: &TheoryParams) -> Result<Estimate, Error> {
    if n == 0 || n > p.successors {
        return Err(invalid("n", format!("must lie in 1..={}", p.successors)));
    }
    let factorial: f64 = (2..=n + 1).map(|i| i as f64).product();
    Ok(Estimate::exact(factorial / (2.0 * p.successor_rate().powi(n as i32))))
}

/// Dead-finger predictions for `k` in `1..=M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerPredictions {
    /// Smaller root of the steady-state quadratic.
    pub exact: Vec<Estimate>,
    /// First order in `1/r`.
    pub leading: Vec<Estimate>,
    /// Replication factor: sharing probabilities for depths 1 to 3, summed.
    pub replication: Vec<f64>,
}

impl FingerPredictions {
    /// Large-`k` value, taken at the last finger.
    pub fn plateau(&self) -> f64 {
        self.exact.last().map_or(0.0, |e| e.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.exact.iter().map(|e| e.value).collect()
    }
}

pub fn finger_predictions(p: &TheoryParams) -> FingerPredictions {
    let m = p.fingers();
    let shares: Vec<Vec<f64>> = (1..=3).map(|j| share_table(j, p)).collect();
    let replication: Vec<f64> = (0..m).map(|k| shares.iter().map(|s| s[k]).sum()).collect();
    let stab = p.r * (1.0 - p.alpha) / m as f64;
    let mut exact = Vec::with_capacity(m);
    let mut leading = Vec::with_capacity(m);
    for k in 1..=m {
        let rep = 1.0 + replication[k - 1];
        let join = p_join(k, p).value;
        let b = 2.0 * rep - join + stab;
        let disc = b * b - 4.0 * rep * rep;
        let lead = rep / stab;
        leading.push(Estimate::exact(lead));
        if disc < 0.0 {
            exact.push(Estimate::new(lead, false));
        } else {
            exact.push(Estimate::exact((b - disc.sqrt()) / (2.0 * rep)));
        }
    }
    FingerPredictions { exact, leading, replication }
}

/// Probability that a lookup whose `k`-th finger is dead falls back to
/// finger `k - i`, for `i` in `1..=k`; the last entry is the probability
/// that no lower finger is usable. `dead[j-1]` is the dead fraction of
/// finger `j`.
pub fn h_probabilities(k: usize, p: &TheoryParams, dead: &[f64]) -> Vec<f64> {
    assert!(k >= 1 && dead.len() >= k - 1);
    let xi = 2f64.powi(k as i32 - 1);
    let mut out = Vec::with_capacity(k);
    let mut unusable = 1.0;
    for i in 1..k {
        let a = 1.0 - p.rho().powf(xi / 2f64.powi(i as i32));
        let f = dead[k - i - 1];
        out.push(a * (1.0 - f) * unusable);
        unusable *= 1.0 - a + a * f;
    }
    out.push(unusable);
    out
}

/// Expected cost of reaching a key `t` keys away, for every `t` in `1..K`.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupSolution {
    /// `costs[t]`; `costs[0]` is zero.
    costs: Vec<f64>,
}

impl LookupSolution {
    pub fn cost(&self, t: u64) -> Result<f64, Error> {
        if t == 0 || t as usize >= self.costs.len() {
            return Err(Error::DistanceOutOfRange(t));
        }
        Ok(self.costs[t as usize])
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs[1..]
    }

    /// `sum C_t / K` over `t` in `1..K`.
    pub fn mean(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }
}

/// Costs computed so far. Reading a distance that has not been computed
/// yet panics, which pins down the evaluation order.
struct CostTable {
    costs: Vec<f64>,
    /// `prefix[x] = C_x + rho prefix[x-1]`, `prefix[0] = 0`.
    prefix: Vec<f64>,
    rho: f64,
}

impl CostTable {
    fn cost(&self, t: u64) -> f64 {
        assert!((t as usize) < self.costs.len(), "cost at distance {t} read before it was computed");
        self.costs[t as usize]
    }

    fn prefix(&self, x: u64) -> f64 {
        assert!((x as usize) < self.prefix.len(), "prefix at distance {x} read before it was computed");
        self.prefix[x as usize]
    }

    fn push(&mut self, c: f64) {
        let last = *self.prefix.last().expect("prefix starts at zero");
        self.costs.push(c);
        self.prefix.push(c + self.rho * last);
    }
}

/// Cost of reaching the adjacent key: walk the successor list past dead
/// entries, one timeout each.
pub fn adjacent_cost(dead_successors: &[f64]) -> f64 {
    let mut reach = 1.0;
    let mut cost = 0.0;
    for (j, &d) in dead_successors.iter().enumerate() {
        cost += (j + 1) as f64 * reach * (1.0 - d);
        reach *= d;
    }
    cost
}

/// Solves the lookup-cost recursion for every distance up to `K - 1`.
///
/// A target `t` in `(2^(k-1), 2^k]` is reached through finger `k`, whose
/// start sits `xi = 2^(k-1)` keys away, leaving `m = t - xi`. Either no node
/// sits in the `m` keys before the target (cost `C_xi`), or the first one is
/// alive and takes one hop, or it is dead, costs a timeout, and the lookup
/// falls back to a lower finger. Sums over the geometric first-node
/// distribution are read off a running prefix of `rho`-discounted costs, so
/// each distance costs `O(M)`.
pub fn solve_lookup(p: &TheoryParams, dead_fingers: &[f64], dead_successors: &[f64]) -> Result<LookupSolution, Error> {
    solve_lookup_to(p, dead_fingers, dead_successors, p.size() - 1)
}

pub fn solve_lookup_to(
    p: &TheoryParams,
    dead_fingers: &[f64],
    dead_successors: &[f64],
    max_distance: u64,
) -> Result<LookupSolution, Error> {
    p.validate()?;
    let m_fingers = p.fingers();
    if dead_fingers.len() < m_fingers {
        return Err(invalid("dead_fingers", format!("need {m_fingers} entries")));
    }
    if max_distance == 0 || max_distance >= p.size() {
        return Err(Error::DistanceOutOfRange(max_distance));
    }
    let rho = p.rho();
    let a = |x: u64| 1.0 - rho.powf(x as f64);
    let mut table = CostTable {
        costs: Vec::with_capacity(max_distance as usize + 1),
        prefix: Vec::with_capacity(max_distance as usize + 1),
        rho,
    };
    table.costs.push(0.0);
    table.prefix.push(0.0);
    table.push(adjacent_cost(dead_successors));

    for k in 1..=m_fingers {
        let xi = 1u64 << (k - 1);
        if xi + 1 > max_distance {
            break;
        }
        let f = dead_fingers[k - 1];
        let h = h_probabilities(k, p, dead_fingers);
        // (h_k(i), span of finger k-i, rho^span) for i in 1..k
        let fallbacks: Vec<(f64, u64, f64)> = (1..k)
            .map(|i| {
                let span = xi >> i;
                (h[i - 1], span, rho.powf(span as f64))
            })
            .collect();
        let c_xi = table.cost(xi);
        for m in 1..=xi.min(max_distance - xi) {
            let t = xi + m;
            let am = a(m);
            let mut cost = c_xi * (1.0 - am);
            cost += (1.0 - f) * (am + (1.0 - rho) * table.prefix(m));
            let mut fallback = 1.0;
            for (i, &(hi, span, rho_span)) in fallbacks.iter().enumerate() {
                let reach = xi - span + m;
                debug_assert!(reach < t);
                let window = table.prefix(reach) - rho_span * table.prefix(reach - span);
                fallback += hi * ((i + 1) as f64 + (1.0 - rho) / a(span) * window);
            }
            cost += f * am * fallback;
            table.push(cost);
        }
    }
    Ok(LookupSolution { costs: table.costs })
}

/// Expected cost of reaching a key `t` keys away.
pub fn lookup_cost(t: u64, p: &TheoryParams, dead_fingers: &[f64], dead_successors: &[f64]) -> Result<f64, Error> {
    if t == 0 || t >= p.size() {
        return Err(Error::DistanceOutOfRange(t));
    }
    solve_lookup_to(p, dead_fingers, dead_successors, t)?.cost(t)
}

/// Mean lookup cost from the full recursion, plus the churn-free cost and the
/// quadratic fit in the plateau dead-finger fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LookupPrediction {
    pub mean: f64,
    pub zero_churn: f64,
    /// `zero_churn (1 + f + 3 f^2)`.
    pub fit: f64,
    pub plateau_dead_finger: f64,
}

pub fn mean_lookup(
    p: &TheoryParams,
    fingers: &FingerPredictions,
    successors: &SuccessorPredictions,
) -> Result<LookupPrediction, Error> {
    let f = fingers.values();
    let d: Vec<f64> = successors.d.iter().map(|e| e.value).collect();
    let mean = solve_lookup(p, &f, &d)?.mean();
    let zero_churn = zero_churn_lookup(p)?;
    let plateau = fingers.plateau();
    Ok(LookupPrediction {
        mean,
        zero_churn,
        fit: zero_churn * (1.0 + plateau + 3.0 * plateau * plateau),
        plateau_dead_finger: plateau,
    })
}

/// Mean lookup cost with no dead pointers.
pub fn zero_churn_lookup(p: &TheoryParams) -> Result<f64, Error> {
    let m = p.fingers();
    Ok(solve_lookup(p, &vec![0.0; m], &vec![0.0; p.successors])?.mean())
}

/// Every prediction for one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub params: TheoryParams,
    pub successors: SuccessorPredictions,
    /// `P_bu(n)` for `n` in `1..=S`.
    pub p_bu: Vec<Estimate>,
    pub fingers: FingerPredictions,
    pub lookup: LookupPrediction,
}

impl PredictionSet {
    pub fn compute(p: &TheoryParams) -> Result<Self, Error> {
        p.validate()?;
        let successors = successor_predictions(p);
        let fingers = finger_predictions(p);
        let p_bu = (1..=p.successors).map(|n| breakup_probability(n, p)).collect::<Result<_, _>>()?;
        let lookup = mean_lookup(p, &fingers, &successors)?;
        Ok(Self { params: *p, successors, p_bu, fingers, lookup })
    }
}
