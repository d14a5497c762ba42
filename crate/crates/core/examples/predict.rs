//! Steady-state predictions across the stabilization-to-failure ratio.

use chordlab::lab::predict_table;
use chordlab::theory::{PredictionSet, TheoryParams};

fn main() -> Result<(), chordlab::Error> {
    println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>7}", "r", "w1", "d2", "P_bu(2)", "f20", "lookup");
    for r in [50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0] {
        let p = TheoryParams::new(20, 1000, 6, r, 0.5)?;
        let set = PredictionSet::compute(&p)?;
        println!(
            "{r:>6} {:>9.5} {:>9.5} {:>9.2e} {:>9.5} {:>7.3}",
            set.successors.w[0].value,
            set.successors.d_leading[1].value,
            set.p_bu[1].value,
            set.fingers.exact[19].value,
            set.lookup.mean
        );
    }
    println!();
    print!("{}", predict_table(&TheoryParams::new(20, 1000, 6, 500.0, 0.5)?)?);
    Ok(())
}
