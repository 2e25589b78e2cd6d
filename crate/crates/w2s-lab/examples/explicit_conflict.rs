//! One full weak-to-strong run under an explicit conflicting objective:
//! where does the conflict tax land?
//!
//! ```bash
//! cargo run --release -p w2s-lab --example explicit_conflict
//! ```

use w2s_lab::analysis::Region;
use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::{run_ground_truth, run_weak_to_strong};
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    let cfg = parse_config_with_seed(
        "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
         [strong]\nhidden_layers = [24]\n\
         [objective]\nconflict = \"explicit\"\nalpha = 0.5\n",
        Some(3),
    )?;
    let bundle = generate_bundle(&cfg.task)?;
    let gt = run_ground_truth(&cfg, &bundle)?;
    let outcome = run_weak_to_strong(&cfg, &bundle, &gt)?;
    let report = &outcome.report;

    println!("accuracies on the test split:");
    for (role, acc) in &report.accuracies {
        println!("  {role:<16} {acc:.3}");
    }

    println!("\nknowledge partition at T = {}:", report.meta.threshold);
    let mut region_counts = std::collections::BTreeMap::new();
    for row in &report.confidence_dumps {
        *region_counts.entry(row.region).or_insert(0u64) += 1;
    }
    for region in Region::ALL {
        println!(
            "  {:<8} {:>5} samples",
            region.as_str(),
            region_counts.get(&region).copied().unwrap_or(0)
        );
    }

    println!("\nconflict tax (reference correct, conflicted wrong) by region:");
    for region in Region::ALL {
        println!(
            "  {:<8} {:>4} flips",
            region.as_str(),
            report.tax_distribution.get(region)
        );
    }
    println!(
        "\ndeception score (share of tax in sk_wuk): {}",
        report
            .deception_score
            .map_or("undefined".into(), |d| format!("{d:.3}"))
    );
    println!(
        "absolute deception score (vs strong ceiling): {}",
        report
            .absolute_deception_score
            .map_or("undefined".into(), |d| format!("{d:.3}"))
    );
    println!("area ratio |sk_wuk| / all: {:.3}", report.area_ratio);
    Ok(())
}
