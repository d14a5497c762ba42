//! Parameter sweeps, result files and theory-versus-simulation reports.
//!
//! An experiment is described by a TOML file:
//!
//! ```toml
//! key_bits = 20          # K = 2^20
//! successors = 6
//! nodes = [1000]
//! r = [200.0, 500.0, 1000.0, 2000.0]
//! alpha = [0.25, 0.5, 0.75]
//! trials = 100
//! seed_base = 0
//! # optional: lambda_f, warmup_events, measure_events, snapshot_every,
//! # probes_per_snapshot, repair_budget, out
//! ```
//!
//! Results are written one CSV file per quantity (`w.csv`, `d.csv`, `f.csv`,
//! `p_bu.csv`, `inconsistency.csv`, `lookup.csv`), each holding theory rows
//! and simulation rows for every grid point.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_trial, ChurnConfig};
use crate::observatory::{aggregate, Point, Quantity, Selector, Summary, TrialMeasurement, TrialResult};
use crate::theory::{zero_churn_lookup, PredictionSet, TheoryParams};
use crate::{invalid, Error};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "defaults::key_bits")]
    pub key_bits: u32,
    #[serde(default = "defaults::successors")]
    pub successors: usize,
    #[serde(default = "defaults::nodes")]
    pub nodes: Vec<usize>,
    #[serde(default = "defaults::r")]
    pub r: Vec<f64>,
    #[serde(default = "defaults::alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "defaults::lambda_f")]
    pub lambda_f: f64,
    /// Events before measuring; defaults to five finger relaxation times.
    pub warmup_events: Option<u64>,
    /// Events measured; defaults to twenty finger relaxation times.
    pub measure_events: Option<u64>,
    /// Events between snapshots; defaults to a quarter relaxation time.
    pub snapshot_every: Option<u64>,
    #[serde(default = "defaults::probes")]
    pub probes_per_snapshot: usize,
    pub repair_budget: Option<u64>,
    #[serde(default = "defaults::out")]
    pub out: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn key_bits() -> u32 {
        20
    }
    pub fn successors() -> usize {
        6
    }
    pub fn nodes() -> Vec<usize> {
        vec![1000]
    }
    pub fn r() -> Vec<f64> {
        vec![200.0, 500.0, 1000.0, 2000.0]
    }
    pub fn alpha() -> Vec<f64> {
        vec![0.25, 0.5, 0.75]
    }
    pub fn trials() -> usize {
        100
    }
    pub fn lambda_f() -> f64 {
        1.0
    }
    pub fn probes() -> usize {
        200
    }
    pub fn out() -> PathBuf {
        PathBuf::from("results")
    }
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        for (name, empty) in
            [("nodes", self.nodes.is_empty()), ("r", self.r.is_empty()), ("alpha", self.alpha.is_empty())]
        {
            if empty {
                return Err(invalid(name, "grid axis is empty"));
            }
        }
        for point in self.points() {
            self.config(&point, 0).validate()?;
            theory_params(&point).validate()?;
        }
        Ok(())
    }

    /// Grid points in `N`, then `alpha`, then `r` order.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &nodes in &self.nodes {
            for &alpha in &self.alpha {
                for &r in &self.r {
                    out.push(Point { key_bits: self.key_bits, nodes, successors: self.successors, r, alpha });
                }
            }
        }
        out
    }

    /// Engine configuration of one trial.
    pub fn config(&self, point: &Point, trial: usize) -> ChurnConfig {
        let mut cfg = ChurnConfig::new(
            point.key_bits,
            point.nodes,
            point.successors,
            point.r,
            point.alpha,
            self.seed_base + trial as u64,
        );
        cfg.lambda_f = self.lambda_f;
        let tau = relaxation_events(&cfg);
        cfg.warmup_events = self.warmup_events.unwrap_or(5 * tau);
        cfg.measure_events = self.measure_events.unwrap_or(20 * tau);
        cfg.snapshot_every = self.snapshot_every.unwrap_or((tau / 4).max(1));
        cfg.probes_per_snapshot = self.probes_per_snapshot;
        if let Some(budget) = self.repair_budget {
            cfg.repair_budget = budget;
        }
        cfg
    }
}

/// Events in one relaxation time of a single finger: the inverse of the
/// per-finger stabilization rate, in units of total events.
pub fn relaxation_events(cfg: &ChurnConfig) -> u64 {
    let ls = cfg.stabilization_rate();
    let per_time = (2.0 * cfg.lambda_f + ls) * cfg.nodes as f64;
    let finger_rate = (1.0 - cfg.alpha) * ls / cfg.key_bits as f64;
    (per_time / finger_rate).ceil() as u64
}

pub fn theory_params(point: &Point) -> TheoryParams {
    TheoryParams {
        key_bits: point.key_bits,
        nodes: point.nodes,
        successors: point.successors,
        r: point.r,
        alpha: point.alpha,
    }
}

/// Origin of a result row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Primary prediction.
    Theory,
    /// Leading order in `1/r`.
    TheoryLeading,
    /// `A (1 + f + 3 f^2)` lookup fit.
    TheoryFit,
    /// Lookup cost without churn.
    TheoryZeroChurn,
    Sim,
}

/// One row of a result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub source: Source,
    pub index: usize,
    pub key_bits: u32,
    pub nodes: usize,
    pub successors: usize,
    pub r: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed_base: u64,
    pub mean: f64,
    pub stderr: Option<f64>,
    pub hits: Option<u64>,
    pub count: Option<u64>,
    pub valid: bool,
    /// Trials abandoned after exhausting their repair budget.
    pub aborted: usize,
}

impl Record {
    pub fn point(&self) -> Point {
        Point { key_bits: self.key_bits, nodes: self.nodes, successors: self.successors, r: self.r, alpha: self.alpha }
    }

    fn same_point(&self, other: &Record) -> bool {
        self.point() == other.point()
    }
}

/// Everything measured and predicted at one grid point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: Point,
    pub predictions: PredictionSet,
    pub trials: Vec<TrialResult>,
    pub summaries: Vec<Summary>,
}

impl PointResult {
    pub fn summary(&self, quantity: Quantity, index: usize) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.quantity == quantity && s.index == index)
    }

    pub fn aborted(&self) -> usize {
        self.trials.iter().filter(|t| t.aborted).count()
    }
}

/// Runs one trial and measures it.
pub fn run_one(cfg: &ChurnConfig, point: Point) -> Result<TrialResult, Error> {
    let mut measurement = TrialMeasurement::default();
    let report = run_trial(cfg, &mut measurement)?;
    Ok(TrialResult { point, seed: cfg.seed, measurement, aborted: report.aborted })
}

/// Runs every trial of every grid point on at most `jobs` threads. Results
/// come back in (point, trial) order whatever the scheduling.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<PointResult>, Error> {
    spec.validate()?;
    let points = spec.points();
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..spec.trials).map(move |t| (p, t))).collect();
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::Spec(e.to_string()))?;
    let results: Vec<TrialResult> = pool.install(|| {
        tasks.par_iter().map(|&(p, t)| run_one(&spec.config(&points[p], t), points[p])).collect::<Result<_, _>>()
    })?;
    let mut by_point: Vec<Vec<TrialResult>> = vec![Vec::new(); points.len()];
    for (&(p, _), result) in tasks.iter().zip(results) {
        by_point[p].push(result);
    }
    points
        .into_iter()
        .zip(by_point)
        .map(|(point, trials)| {
            let predictions = predictions_for(spec, &point)?;
            let summaries = aggregate(&trials)?;
            Ok(PointResult { point, predictions, trials, summaries })
        })
        .collect()
}

/// Predictions at a point. Without churn every pointer prediction is zero
/// and the lookup cost is the churn-free cost.
pub fn predictions_for(spec: &ExperimentSpec, point: &Point) -> Result<PredictionSet, Error> {
    let params = theory_params(point);
    let mut set = PredictionSet::compute(&params)?;
    if spec.lambda_f == 0.0 {
        let zero = |e: &mut crate::theory::Estimate| *e = crate::theory::Estimate::exact(0.0);
        let s = &mut set.successors;
        s.w.iter_mut().chain(&mut s.d).chain(&mut s.d_leading).for_each(zero);
        zero(&mut s.inconsistency);
        set.p_bu.iter_mut().for_each(zero);
        set.fingers.exact.iter_mut().chain(&mut set.fingers.leading).for_each(zero);
        let a = zero_churn_lookup(&params)?;
        set.lookup.mean = a;
        set.lookup.fit = a;
        set.lookup.zero_churn = a;
        set.lookup.plateau_dead_finger = 0.0;
    }
    Ok(set)
}

/// Flattens predictions and summaries into result rows, grouped by quantity.
pub fn records(spec: &ExperimentSpec, results: &[PointResult]) -> BTreeMap<Quantity, Vec<Record>> {
    let mut out: BTreeMap<Quantity, Vec<Record>> = BTreeMap::new();
    for res in results {
        let p = res.point;
        let row = |source, index, mean: f64, valid| Record {
            source,
            index,
            key_bits: p.key_bits,
            nodes: p.nodes,
            successors: p.successors,
            r: p.r,
            alpha: p.alpha,
            trials: res.trials.len(),
            seed_base: spec.seed_base,
            mean,
            stderr: None,
            hits: None,
            count: None,
            valid,
            aborted: res.aborted(),
        };
        let pr = &res.predictions;
        let mut push = |q: Quantity, r: Record| out.entry(q).or_default().push(r);
        for (k, e) in pr.successors.w.iter().enumerate() {
            push(Quantity::W, row(Source::Theory, k + 1, e.value, e.valid));
        }
        for (k, e) in pr.successors.d.iter().enumerate() {
            push(Quantity::D, row(Source::Theory, k + 1, e.value, e.valid));
        }
        for (k, e) in pr.successors.d_leading.iter().enumerate() {
            push(Quantity::D, row(Source::TheoryLeading, k + 1, e.value, e.valid));
        }
        for (k, e) in pr.fingers.exact.iter().enumerate() {
            push(Quantity::F, row(Source::Theory, k + 1, e.value, e.valid));
        }
        for (k, e) in pr.fingers.leading.iter().enumerate() {
            push(Quantity::F, row(Source::TheoryLeading, k + 1, e.value, e.valid));
        }
        for (n, e) in pr.p_bu.iter().enumerate() {
            push(Quantity::PBu, row(Source::Theory, n + 1, e.value, e.valid));
        }
        let inc = pr.successors.inconsistency;
        push(Quantity::Inconsistency, row(Source::Theory, 0, inc.value, inc.valid));
        push(Quantity::Lookup, row(Source::Theory, 0, pr.lookup.mean, true));
        push(Quantity::Lookup, row(Source::TheoryFit, 0, pr.lookup.fit, true));
        push(Quantity::Lookup, row(Source::TheoryZeroChurn, 0, pr.lookup.zero_churn, true));
        for s in &res.summaries {
            let mut r = row(Source::Sim, s.index, s.mean, true);
            r.trials = s.trials;
            r.stderr = Some(s.stderr);
            r.hits = Some(s.hits);
            r.count = Some(s.count);
            push(s.quantity, r);
        }
    }
    out
}

pub fn write_records(dir: &Path, records: &BTreeMap<Quantity, Vec<Record>>) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    for (q, rows) in records {
        let mut w = csv::Writer::from_path(dir.join(format!("{q}.csv")))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn read_records(dir: &Path) -> Result<BTreeMap<Quantity, Vec<Record>>, Error> {
    let mut out = BTreeMap::new();
    for q in Quantity::ALL {
        let path = dir.join(format!("{q}.csv"));
        if !path.exists() {
            continue;
        }
        let rows = csv::Reader::from_path(&path)?.deserialize().collect::<Result<Vec<Record>, _>>()?;
        out.insert(q, rows);
    }
    if out.is_empty() {
        return Err(Error::Spec(format!("no result files in {}", dir.display())));
    }
    Ok(out)
}

/// Outcome of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub results: Vec<PointResult>,
    pub report: ComparisonReport,
}

/// Runs a spec, writes result files and the comparison report into
/// `spec.out`.
pub fn run(spec: &ExperimentSpec, jobs: usize) -> Result<RunOutcome, Error> {
    let results = run_experiment(spec, jobs)?;
    let recs = records(spec, &results);
    write_records(&spec.out, &recs)?;
    let report = compare_records(&recs)?;
    report.write(&spec.out.join("comparison.csv"))?;
    Ok(RunOutcome { out: spec.out.clone(), results, report })
}

/// How a simulated value is judged against theory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Tolerance {
    /// `|sim - theory| <= max(z * stderr, rel * theory)`.
    Relative { rel: f64, z: f64 },
    /// `sim / theory` within `[1/factor, factor]`, with at least `min_hits`
    /// pooled observations.
    Factor { factor: f64, min_hits: u64 },
    /// Pooled hits no more than three Poisson deviations above the count
    /// theory expects.
    Rare,
}

impl Tolerance {
    /// Which theory row a simulated `(quantity, index)` is compared with,
    /// and how.
    pub fn for_quantity(q: Quantity, index: usize, hits: u64) -> (Source, Tolerance) {
        use Tolerance::*;
        match (q, index) {
            (Quantity::W, 1) | (Quantity::D, 1) | (Quantity::PBu, 1) => {
                (Source::Theory, Relative { rel: 0.10, z: 3.0 })
            }
            (Quantity::W, _) => (Source::Theory, Relative { rel: 0.25, z: 0.0 }),
            (Quantity::D, 2) => (Source::TheoryLeading, Relative { rel: 0.15, z: 3.0 }),
            (Quantity::D, _) => (Source::TheoryLeading, Relative { rel: 0.25, z: 0.0 }),
            (Quantity::F, _) => (Source::Theory, Relative { rel: 0.15, z: 0.0 }),
            (Quantity::PBu, 2) if hits >= 50 => (Source::Theory, Factor { factor: 1.5, min_hits: 50 }),
            (Quantity::PBu, _) => (Source::Theory, Rare),
            (Quantity::Inconsistency, _) => (Source::Theory, Relative { rel: 0.15, z: 3.0 }),
            (Quantity::Lookup, _) => (Source::Theory, Relative { rel: 0.05, z: 0.0 }),
        }
    }

    pub fn check(&self, theory: f64, sim: &Record) -> bool {
        let stderr = sim.stderr.filter(|s| s.is_finite()).unwrap_or(0.0);
        match *self {
            Tolerance::Relative { rel, z } => (sim.mean - theory).abs() <= (z * stderr).max(rel * theory.abs()),
            Tolerance::Factor { factor, min_hits } => {
                sim.hits.unwrap_or(0) >= min_hits && sim.mean <= theory * factor && sim.mean * factor >= theory
            }
            Tolerance::Rare => {
                let expected = theory * sim.count.unwrap_or(0) as f64;
                sim.hits.unwrap_or(0) as f64 <= expected + 3.0 * expected.sqrt()
            }
        }
    }
}

/// One simulated value next to its prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: Quantity,
    pub index: usize,
    pub key_bits: u32,
    pub nodes: usize,
    pub successors: usize,
    pub r: f64,
    pub alpha: f64,
    pub trials: usize,
    pub theory: f64,
    pub sim: f64,
    pub stderr: Option<f64>,
    pub z: Option<f64>,
    pub rule: String,
    /// Empty when the prediction is outside its region of validity.
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<Comparison>,
}

impl ComparisonReport {
    pub fn judged(&self) -> usize {
        self.rows.iter().filter(|r| r.pass.is_some()).count()
    }

    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass == Some(true)).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.judged()
    }

    pub fn summary(&self) -> String {
        let (p, j) = (self.passed(), self.judged());
        let pct = if j == 0 { 100.0 } else { 100.0 * p as f64 / j as f64 };
        format!("{p} of {j} rows pass ({pct:.1}%), {} outside validity", self.rows.len() - j)
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairs every simulated row with its theory counterpart.
pub fn compare_records(records: &BTreeMap<Quantity, Vec<Record>>) -> Result<ComparisonReport, Error> {
    let mut rows = Vec::new();
    for (&q, recs) in records {
        for sim in recs.iter().filter(|r| r.source == Source::Sim) {
            let (source, tol) = Tolerance::for_quantity(q, sim.index, sim.hits.unwrap_or(0));
            let theory = recs
                .iter()
                .find(|r| r.source == source && r.index == sim.index && r.same_point(sim))
                .ok_or_else(|| {
                    Error::MissingCounterpart(format!(
                        "{q}{} at r={} alpha={} N={}",
                        sim.index, sim.r, sim.alpha, sim.nodes
                    ))
                })?;
            let stderr = sim.stderr.filter(|s| s.is_finite());
            let z = stderr.filter(|&s| s > 0.0).map(|s| (sim.mean - theory.mean) / s);
            rows.push(Comparison {
                quantity: q,
                index: sim.index,
                key_bits: sim.key_bits,
                nodes: sim.nodes,
                successors: sim.successors,
                r: sim.r,
                alpha: sim.alpha,
                trials: sim.trials,
                theory: theory.mean,
                sim: sim.mean,
                stderr,
                z,
                rule: rule_name(&tol),
                pass: if theory.valid && sim.mean.is_finite() { Some(tol.check(theory.mean, sim)) } else { None },
            });
        }
    }
    Ok(ComparisonReport { rows })
}

fn rule_name(tol: &Tolerance) -> String {
    match *tol {
        Tolerance::Relative { rel, z } if z > 0.0 => format!("max({z} stderr, {}%)", rel * 100.0),
        Tolerance::Relative { rel, .. } => format!("{}%", rel * 100.0),
        Tolerance::Factor { factor, min_hits } => format!("factor {factor}, >= {min_hits} hits"),
        Tolerance::Rare => "poisson upper 3 sd".to_string(),
    }
}

/// Reads a result directory and writes `comparison.csv` next to it.
pub fn compare(dir: &Path) -> Result<ComparisonReport, Error> {
    let report = compare_records(&read_records(dir)?)?;
    report.write(&dir.join("comparison.csv"))?;
    Ok(report)
}

/// One plotted series: `x` against theory and simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    /// `r` or `k`.
    pub x_label: &'static str,
    pub rows: Vec<SeriesRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub x: f64,
    pub y_theory: f64,
    pub y_sim: f64,
    pub y_err: f64,
}

/// Builds plot series for a selector such as `w1`, `fk` or `lookup`.
///
/// A fixed index gives one series per `(alpha, N)` against `r`; an indexed
/// quantity without an index gives one series per `(r, alpha, N)` against
/// the index.
pub fn plot_series(records: &BTreeMap<Quantity, Vec<Record>>, selector: &Selector) -> Result<Vec<Series>, Error> {
    let recs = records.get(&selector.quantity).ok_or_else(|| Error::UnknownQuantity(selector.quantity.to_string()))?;
    let by_index = selector.quantity.indexed() && selector.index.is_none();
    let mut groups: BTreeMap<String, Vec<SeriesRow>> = BTreeMap::new();
    for sim in recs.iter().filter(|r| r.source == Source::Sim) {
        if let Some(i) = selector.index {
            if sim.index != i {
                continue;
            }
        }
        let (source, _) = Tolerance::for_quantity(selector.quantity, sim.index, sim.hits.unwrap_or(0));
        let theory = recs
            .iter()
            .find(|r| r.source == source && r.index == sim.index && r.same_point(sim))
            .ok_or_else(|| Error::MissingCounterpart(format!("{}{}", selector.quantity, sim.index)))?;
        let (name, x) = if by_index {
            (format!("r{}_alpha{}_n{}", sim.r, sim.alpha, sim.nodes), sim.index as f64)
        } else {
            (format!("alpha{}_n{}", sim.alpha, sim.nodes), sim.r)
        };
        groups.entry(name).or_default().push(SeriesRow {
            x,
            y_theory: theory.mean,
            y_sim: sim.mean,
            y_err: sim.stderr.unwrap_or(f64::NAN),
        });
    }
    if groups.is_empty() {
        return Err(Error::UnknownQuantity(format!(
            "{}{}",
            selector.quantity,
            selector.index.map_or(String::new(), |i| i.to_string())
        )));
    }
    Ok(groups
        .into_iter()
        .map(|(name, mut rows)| {
            rows.sort_by(|a, b| a.x.total_cmp(&b.x));
            Series { name, x_label: if by_index { "k" } else { "r" }, rows }
        })
        .collect())
}

/// Writes `plot_<selector>_<series>.csv` files into `out` and returns their
/// paths.
pub fn emit_plot_data(dir: &Path, quantity: &str, out: &Path) -> Result<Vec<PathBuf>, Error> {
    let selector: Selector = quantity.parse()?;
    let series = plot_series(&read_records(dir)?, &selector)?;
    fs::create_dir_all(out)?;
    let mut paths = Vec::new();
    for s in series {
        let path = out.join(format!("plot_{quantity}_{}.csv", s.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([s.x_label, "y_theory", "y_sim", "y_err"])?;
        for row in &s.rows {
            w.write_record([
                row.x.to_string(),
                row.y_theory.to_string(),
                row.y_sim.to_string(),
                row.y_err.to_string(),
            ])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Human-readable table of every prediction at one point.
pub fn predict_table(p: &TheoryParams) -> Result<String, Error> {
    let set = PredictionSet::compute(p)?;
    let flag = |valid: bool| if valid { "" } else { "  (outside validity)" };
    let mut out = format!(
        "K = 2^{}  N = {}  S = {}  r = {}  alpha = {}  rho = {:.6}\n",
        p.key_bits,
        p.nodes,
        p.successors,
        p.r,
        p.alpha,
        p.rho()
    );
    out += "k   w_k          d_k          d_k leading\n";
    let s = &set.successors;
    for k in 0..p.successors {
        out += &format!(
            "{:<3} {:<12.6e} {:<12.6e} {:.6e}{}\n",
            k + 1,
            s.w[k].value,
            s.d[k].value,
            s.d_leading[k].value,
            flag(s.w[k].valid)
        );
    }
    out += &format!("inconsistency  {:.6e}\n", s.inconsistency.value);
    out += "n   P_bu(n)\n";
    for (n, e) in set.p_bu.iter().enumerate() {
        out += &format!("{:<3} {:.6e}\n", n + 1, e.value);
    }
    out += "k   f_k          f_k leading\n";
    for k in 0..p.fingers() {
        let (e, l) = (set.fingers.exact[k], set.fingers.leading[k]);
        out += &format!("{:<3} {:<12.6e} {:.6e}{}\n", k + 1, e.value, l.value, flag(e.valid));
    }
    let l = set.lookup;
    out += &format!(
        "lookup cost    {:.4}\nzero churn     {:.4}\nfit            {:.4}  (f = {:.4e})\n",
        l.mean, l.zero_churn, l.fit, l.plateau_dead_finger
    );
    Ok(out)
}
