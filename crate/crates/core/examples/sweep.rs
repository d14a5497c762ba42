//! A small parameter sweep written to disk and compared with theory, the
//! same pipeline the `chordlab run` command drives.

use chordlab::lab::{self, ExperimentSpec};

fn main() -> Result<(), chordlab::Error> {
    let mut spec = ExperimentSpec::load("examples/specs/smoke.toml".as_ref())?;
    spec.out = std::env::temp_dir().join("chordlab-sweep");
    let outcome = lab::run(&spec, 1)?;

    for res in &outcome.results {
        let w1 = res.summary(chordlab::observatory::Quantity::W, 1).map(|s| s.mean).unwrap_or(f64::NAN);
        println!(
            "r={:<5} alpha={:<4} w1 sim {:.4} theory {:.4}",
            res.point.r, res.point.alpha, w1, res.predictions.successors.w[0].value
        );
    }
    println!("{}", outcome.report.summary());
    for path in lab::emit_plot_data(&outcome.out, "w1", &outcome.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
