//! Where does the cardinal guarantee beat the best ordinal one?

use matchlab::analysis::{cardinal_wins, crossover, log2_cardinal_bound, log2_ordinal_bound};

pub fn run_example() -> Result<(), String> {
    let rep = crossover();
    println!("crossover n = {} ({} points checked, holds = {})", rep.crossover, rep.checked, rep.holds);
    for n in [16u64, 256, 807, 808, 1 << 20, u64::MAX] {
        println!(
            "n={n:>20}: log2 cardinal {:>7.3} log2 ordinal {:>7.3} cardinal wins {}",
            log2_cardinal_bound(n),
            log2_ordinal_bound(n),
            cardinal_wins(n)
        );
    }
    if rep.holds {
        Ok(())
    } else {
        Err(format!("failed at {:?}", rep.counterexample))
    }
}

fn main() -> Result<(), String> {
    run_example()
}
