//! One churn trial, printing population and the event mix as it runs.

use chordlab::engine::{run_trial, ChurnConfig, EventKind, Probe, Snapshot};

fn main() -> Result<(), chordlab::Error> {
    let mut cfg = ChurnConfig::new(16, 300, 4, 200.0, 0.5, 7);
    cfg.warmup_events = 100_000;
    cfg.measure_events = 400_000;
    cfg.snapshot_every = 50_000;
    cfg.probes_per_snapshot = 100;

    let mut observe = |s: &Snapshot, probes: &[Probe]| {
        let cost: u32 = probes.iter().map(|p| p.trace.cost()).sum();
        println!(
            "t={:>8.3} event {:>7}: {} nodes, mean lookup cost {:.2}",
            s.clock,
            s.event_index,
            s.len(),
            cost as f64 / probes.len().max(1) as f64
        );
    };
    let report = run_trial(&cfg, &mut observe)?;

    println!("{} events, mean population {:.1}", report.events, report.ledger.mean_population());
    for kind in EventKind::ALL {
        let i = kind.index();
        println!("{kind:?}: {} observed, {:.0} expected", report.ledger.observed[i], report.ledger.expected[i]);
    }
    println!("ring break-ups repaired: {}", report.breakup_events);
    Ok(())
}
