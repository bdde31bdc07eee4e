//! Write generated sales records for the Caesar job to stdout.
//!
//!     cargo run --example gen_sales -- 50000 [seed] > caesar_input.csv

use std::io::{self, BufWriter, Write};

use handsoff_core::roman::to_roman;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ITEMS: &[&str] = &["Toga", "Cape", "Sandal", "Tunic", "Belt"];
const COLOURS: &[&str] = &["Purple", "White", "Red", "Blue", "Brown", "Green"];

fn main() -> io::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: u32 = args.next().and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "Id,Item,Colour,Number")?;
    for id in 1..=count {
        let item = ITEMS.choose(&mut rng).unwrap();
        let colour = COLOURS.choose(&mut rng).unwrap();
        let number = to_roman(rng.gen_range(1..=3999)).unwrap();
        writeln!(out, "{id},{item},{colour},{number}")?;
    }
    out.flush()
}
