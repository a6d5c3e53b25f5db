//! Fit worst-case-optimal linear weights for an extrapolation horizon and
//! print the certificate: the minimized functional, the matching lower
//! bound, and the margin over plain and smoothed Good-Toulmin.
//!
//! ```text
//! cargo run --example fit_optimal_weights
//! ```

use unseen::estimators::{gt_weights, sgt_weights, SmoothingDistribution};
use unseen::ghopt::{eval_gh, optimize_hstar, OptimizeConfig};
use unseen::types::Horizon;

fn main() -> unseen::Result<()> {
    let h = Horizon::new(50.0, 3.0)?;
    let cfg = OptimizeConfig::default();
    let (weights, cert) = optimize_hstar(h, &cfg)?;

    println!("horizon: t = {}, r = {}", h.t(), h.r());
    println!("optimized G = {:.3}", cert.evaluation.g_h);
    println!("  squared-bias part {:.3e}, variance part {:.3}", cert.evaluation.y_b, cert.evaluation.y_v);
    println!("  lower bound / 2 = {:.3}", cert.tilde.tilde_g / 2.0);
    println!("  per-species bias <= 1: {}", cert.bias_bounded_by_one);
    println!("  strict minimax uniqueness: {}", cert.uniqueness_strict);
    println!("  certified: {}", cert.certified);

    let grid = cfg.cert_grid;
    let gt = eval_gh(&gt_weights(h.r(), 40), h, grid)?;
    let smoothing = SmoothingDistribution::binomial_suggested(h.t(), h.r());
    let sgt = eval_gh(&sgt_weights(&h, &smoothing, 40)?, h, grid)?;
    println!("\nworst-case functional, same grid:");
    println!("  plain Good-Toulmin  {:>12.3e}", gt.g_h);
    println!("  suggested smoothing {:>12.3}", sgt.g_h);
    println!("  optimized           {:>12.3}", cert.evaluation.g_h);

    let head: Vec<String> = weights.coeffs().iter().take(8).map(|c| format!("{c:.4}")).collect();
    println!("\nfirst weights: [{} ...]", head.join(", "));
    Ok(())
}
