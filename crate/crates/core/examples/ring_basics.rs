//! Identifier arithmetic on a small ring: wrap-around distances, the four
//! interval forms and where each finger starts.

use chordlab::{Bounds, Key, KeySpace};

fn main() -> Result<(), chordlab::Error> {
    let space = KeySpace::new(6)?;
    println!("key space of {} keys", space.size());

    let (a, b) = (Key(50), Key(10));
    println!("distance {a} -> {b}: {}", space.distance(a, b).0);
    println!("distance {b} -> {a}: {}", space.distance(b, a).0);

    for x in [Key(50), Key(63), Key(0), Key(10), Key(30)] {
        let forms = [Bounds::Open, Bounds::OpenClosed, Bounds::ClosedOpen, Bounds::Closed].map(|bounds| {
            if space.in_interval(x, a, b, bounds) {
                "in "
            } else {
                "out"
            }
        });
        println!("{x:>2} in ({a},{b}) (] [) []: {}", forms.join(" "));
    }

    let n = Key(44);
    for i in 1..=space.bits() as usize {
        println!("finger {i} of {n} starts at {}", space.finger_start(n, i)?);
    }
    Ok(())
}
