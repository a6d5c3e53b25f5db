//! Dependence diagnostics for incidence data: when events carry several
//! species, discoveries are correlated and plain-sampling theory needs a
//! correction whose size these statistics measure.
//!
//! ```text
//! cargo run --example diagnose_incidence
//! ```

use unseen::ingest::ObservationStream;
use unseen::types::Horizon;
use unseen::uncertainty::{codiscovery_diagnostic, epsilon_hat, perfect_pair_bound};

fn main() -> unseen::Result<()> {
    let events: Vec<Vec<u32>> = (0..300)
        .map(|i| match i % 3 {
            // Species 0 and 1 always travel together; the rest are solo.
            0 => vec![0, 1],
            1 => vec![2 + (i / 3) % 40],
            _ => vec![42 + (i / 7) % 60],
        })
        .collect();
    let species: Vec<String> = (0..102).map(|s| format!("s{s}")).collect();
    let stream = ObservationStream::new(species, events, "synthetic incidence")?;
    let h = Horizon::new(stream.len() as f64, 1.0)?;

    println!("events {}, max arity {}", stream.len(), stream.max_arity());
    println!("epsilon_hat (plug-in cross term)   {:.4}", epsilon_hat(&stream, &h));
    println!("perfect-pair worst-case inflation  {:.4}", perfect_pair_bound(&stream, &h));

    let co = codiscovery_diagnostic(&stream);
    println!(
        "\nco-discovery: {} pairs over {} discovered species (ratio {:.3})",
        co.codiscovered_pairs, co.discovered_species, co.ratio
    );
    Ok(())
}
