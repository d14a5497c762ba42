//! Counts wrong and dead pointers over a trial and sets them beside the
//! steady-state predictions.

use chordlab::engine::{run_trial, ChurnConfig, Probe, Snapshot};
use chordlab::observatory::{census, PointerCensus};
use chordlab::theory::{PredictionSet, TheoryParams};

fn main() -> Result<(), chordlab::Error> {
    let (bits, nodes, s, r, alpha) = (20, 1000, 6, 500.0, 0.5);
    let mut cfg = ChurnConfig::new(bits, nodes, s, r, alpha, 11);
    cfg.warmup_events = 200_000;
    cfg.measure_events = 1_000_000;
    cfg.snapshot_every = 10_000;
    cfg.probes_per_snapshot = 0;

    let mut total = PointerCensus::default();
    let mut observe = |snap: &Snapshot, _: &[Probe]| total.merge(&census(snap));
    run_trial(&cfg, &mut observe)?;

    let theory = PredictionSet::compute(&TheoryParams::new(bits, nodes, s, r, alpha)?)?;
    println!("{:<6} {:>10} {:>10}", "", "simulated", "predicted");
    for k in 1..=3 {
        println!("w{k:<5} {:>10.5} {:>10.5}", total.w[k - 1].fraction(), theory.successors.w[k - 1].value);
    }
    println!("d1     {:>10.5} {:>10.5}", total.d[0].fraction(), theory.successors.d[0].value);
    println!("d2     {:>10.5} {:>10.5}", total.d[1].fraction(), theory.successors.d_leading[1].value);
    for k in [1, 8, 16, 20] {
        println!("f{k:<5} {:>10.5} {:>10.5}", total.f[k - 1].fraction(), theory.fingers.exact[k - 1].value);
    }
    Ok(())
}
