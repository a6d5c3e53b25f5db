//! Point predictions from a frequency profile: how many new species will
//! the next window reveal, under several estimators.
//!
//! ```text
//! cargo run --example predict_from_profile
//! ```

use unseen::estimators::{predict, Method, SmoothingDistribution};
use unseen::types::{FrequencyProfile, Horizon};

fn main() -> unseen::Result<()> {
    // 40 events: 12 species seen once, 6 twice, 4 four times.
    let profile = FrequencyProfile::from_counts([(1, 12), (2, 6), (4, 4)])?;
    println!(
        "observed: {} events, {} species, {} singletons",
        profile.n_events(),
        profile.distinct(),
        profile.phi(1)
    );

    for (r, note) in [(0.5, "half as much again"), (1.0, "same again"), (3.0, "far future")] {
        let h = Horizon::new(profile.n_events() as f64, r)?;
        let methods = [
            Method::Gt,
            Method::Sgt(SmoothingDistribution::binomial_suggested(h.t(), r)),
            Method::RatioAlpha,
        ];
        println!("\nr = {r} ({note}):");
        for method in methods {
            let report = predict(&profile, &h, &method, Some(0.95))?;
            let interval = report
                .interval
                .map(|iv| format!(" [{:.1}, {:.1}]", iv.lo, iv.hi))
                .unwrap_or_default();
            println!("  {:<12} {:>8.2}{interval}  ({})", report.method, report.point, report.detail);
        }
    }
    Ok(())
}
