//! Runs every acceptance criterion and prints one line per criterion.

use quasistatic::acceptance::{acceptance_suite, Tier};

fn main() {
    let tier = match std::env::var("ACCEPTANCE_TIER").as_deref() {
        Ok("fast") => Tier::Fast,
        _ => Tier::Full,
    };
    let report = acceptance_suite(tier, 20240601, |c| {
        println!("{c}");
        for note in &c.notes {
            println!("    {note}");
        }
    });
    let failed: Vec<&str> = report
        .criteria
        .iter()
        .chain(&report.controls)
        .filter(|c| !c.passed)
        .map(|c| c.id.as_str())
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} checks passed", report.criteria.len() + report.controls.len());
    } else {
        println!("acceptance: FAILED {}", failed.join(", "));
        std::process::exit(1);
    }
}
