use std::time::Instant;

use sgf_core::enumerator::{enumerate_structures, EnumerationLimits};

fn main() {
    let max: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    for c in 1..=max {
        let t = Instant::now();
        let n = enumerate_structures(c, EnumerationLimits::default()).unwrap().len();
        println!("c={c:2} structures={n:9} {:?}", t.elapsed());
    }
}
