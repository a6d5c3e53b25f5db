//! Monte-Carlo error of Good-Toulmin on an incidence model, cross-checked
//! against the exact per-species + cross-species decomposition, plus an
//! occupancy concentration report.
//!
//! ```text
//! cargo run --example simulate_and_cross_check
//! ```

use unseen::sim::{concentration_check, error_decomposition_check, SpeciesModel};
use unseen::types::Horizon;

fn main() -> unseen::Result<()> {
    // Events carry up to three species; overlapping sets correlate the
    // discoveries.
    let model = SpeciesModel::incidence(vec![
        (vec![0, 1, 2], 0.4),
        (vec![2, 3], 0.3),
        (vec![4], 0.6),
    ])?;
    let h = Horizon::new(1.0, 1.0)?;

    let report = error_decomposition_check(&model, &h, 20_000, 1)?;
    println!("Monte-Carlo MSE  {:.4} +- {:.4}", report.mc_mse, report.mc_se);
    println!("delta + epsilon  {:.4} = {:.4} + {:.4}", report.delta + report.epsilon, report.delta, report.epsilon);
    println!("gap              {:.4} ({:.2} se)", report.gap, report.gap / report.mc_se);

    let conc = concentration_check(&model, &h, 1, 20_000, 2)?;
    println!("\nconcentration of S_t^(1): E = {:.3}, c = {}", conc.expected, conc.constant);
    println!("  z      lower emp/bound      upper emp/bound");
    for row in conc.rows.iter().take(5) {
        println!(
            "  {:>5.2}  {:.4} / {:.4}      {:.4} / {:.4}",
            row.z, row.empirical_lower, row.bound_lower, row.empirical_upper, row.bound_upper
        );
    }
    println!("  all tails within 3 binomial se of their bounds: {}", conc.pass);
    Ok(())
}
