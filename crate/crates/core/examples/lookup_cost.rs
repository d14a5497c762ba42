//! Expected lookup cost by key distance, with and without churn.

use chordlab::theory::{finger_predictions, solve_lookup, successor_predictions, zero_churn_lookup, TheoryParams};

fn main() -> Result<(), chordlab::Error> {
    let p = TheoryParams::new(20, 1000, 6, 500.0, 0.5)?;
    let fingers = finger_predictions(&p).values();
    let successors: Vec<f64> = successor_predictions(&p).d.iter().map(|e| e.value).collect();

    let still = solve_lookup(&p, &vec![0.0; p.fingers()], &vec![0.0; p.successors])?;
    let churn = solve_lookup(&p, &fingers, &successors)?;

    println!("{:>9} {:>10} {:>10}", "distance", "no churn", "r=500");
    for e in (0..=20).step_by(2) {
        let t = (1u64 << e).min(p.size() - 1);
        println!("{t:>9} {:>10.3} {:>10.3}", still.cost(t)?, churn.cost(t)?);
    }
    println!("mean over keys: {:.3} without churn, {:.3} under churn", still.mean(), churn.mean());
    println!("zero-churn constant: {:.3}", zero_churn_lookup(&p)?);
    Ok(())
}
