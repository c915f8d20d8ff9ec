//! Low-resource transfer: HNMT trained jointly on a 500-pair task and a
//! 5,000-pair task with the same target, against many-to-many trained on
//! each task alone.
//!
//! cargo run --example transfer_experiment -- [seed ...]

use hnmt::experiment::transfer::{run_transfer, TransferSetup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut setup = TransferSetup::default();
    let seeds: Vec<u64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    if !seeds.is_empty() {
        setup.seeds = seeds;
    }
    let out = run_transfer(&setup, |line| println!("{line}"))?;
    println!("{}", out.by_similarity.to_pretty());
    println!(
        "low-resource median BLEU: hnmt {:.2}, many-to-many {:.2}, gain {:.2} ({:.0}s)",
        out.median_hnmt,
        out.median_baseline,
        out.low_resource_gain(),
        out.seconds
    );
    Ok(())
}
