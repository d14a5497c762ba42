//! Lookups on a converged ring, then again after two nodes fail without any
//! repair, showing the extra timeouts and the fallback to successor lists.

use chordlab::observatory::GroundTruth;
use chordlab::protocol::{find_successor, MapRing};
use chordlab::{Key, KeySpace};

fn main() -> Result<(), chordlab::Error> {
    let space = KeySpace::new(8)?;
    let keys: Vec<Key> = [3, 17, 40, 41, 77, 102, 150, 151, 199, 230].map(Key).to_vec();
    let mut ring = MapRing::converged(space, 3, &keys);

    let source = Key(3);
    let targets = [Key(20), Key(100), Key(180), Key(250)];
    println!("converged ring");
    for t in targets {
        let trace = find_successor(&ring, source, t);
        println!("  lookup {t:>3} -> {:?}: {} hops, {} timeouts", trace.result, trace.hops, trace.timeouts);
    }

    ring.kill(Key(102));
    ring.kill(Key(150));
    let truth = GroundTruth::new(space, ring.nodes.keys().copied());
    println!("after 102 and 150 fail");
    for t in targets {
        let trace = find_successor(&ring, source, t);
        let owner = truth.successor_of(t);
        println!(
            "  lookup {t:>3} -> {:?} (owner {owner}): {} hops, {} timeouts",
            trace.result, trace.hops, trace.timeouts
        );
    }
    Ok(())
}
