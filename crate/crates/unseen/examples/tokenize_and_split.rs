//! From raw text to a discovery experiment: tokenize, split the stream in
//! time, and compare predicted against realized vocabulary growth.
//!
//! ```text
//! cargo run --example tokenize_and_split
//! ```

use unseen::estimators::{predict, Method};
use unseen::ingest::{apply_split, discoveries, profile_from_stream, tokens_from_text, SplitPlan};

const TEXT: &str = "
    When that I was and a little tiny boy,
    With hey, ho, the wind and the rain,
    A foolish thing was but a toy,
    For the rain it raineth every day.
    But when I came to man's estate,
    With hey, ho, the wind and the rain,
    'Gainst knaves and thieves men shut their gate,
    For the rain it raineth every day.
";

fn main() -> unseen::Result<()> {
    let stream = tokens_from_text(TEXT, "song")?;
    println!(
        "{} tokens, {} distinct words",
        stream.len(),
        profile_from_stream(&stream).distinct()
    );

    println!("\nseen%  predicted  actual");
    for fraction in [0.3, 0.5, 0.7] {
        let split = apply_split(&stream, &SplitPlan::temporal(fraction))?;
        let profile = profile_from_stream(&split.past);
        let report = predict(&profile, &split.h, &Method::Gt, None)?;
        let actual = discoveries(&split.past, &split.future);
        println!(
            "{:>4.0}%  {:>9.1}  {:>6}",
            100.0 * fraction,
            report.point,
            actual
        );
    }
    Ok(())
}
