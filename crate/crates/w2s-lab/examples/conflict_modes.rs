//! Compare all four conflict modes on one task: none (baseline + spontaneous
//! deviation), explicit reward for wrong predictions, implicit conflicting
//! supervision, and adaptive down-weighting of uncertain labels.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example conflict_modes
//! ```

use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::{run_ground_truth, run_weak_to_strong};
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    println!(
        "{:<10} {:>8} {:>12} {:>9} {:>7} {:>10}",
        "conflict", "ds", "absolute ds", "w2s acc", "flips", "saturated"
    );
    for conflict in ["none", "explicit", "implicit", "adaptive"] {
        let cfg = parse_config_with_seed(
            &format!(
                "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
                 [strong]\nhidden_layers = [24]\n\
                 [objective]\nconflict = \"{conflict}\"\n"
            ),
            Some(3),
        )?;
        let bundle = generate_bundle(&cfg.task)?;
        let gt = run_ground_truth(&cfg, &bundle)?;
        let outcome = run_weak_to_strong(&cfg, &bundle, &gt)?;
        let report = &outcome.report;
        let evaluated = if conflict == "none" {
            "w2s_no_conflict"
        } else {
            "w2s_conflict"
        };
        let fmt = |v: Option<f64>| v.map_or("undef".to_string(), |d| format!("{d:.3}"));
        println!(
            "{:<10} {:>8} {:>12} {:>9.3} {:>7} {:>10}",
            conflict,
            fmt(report.deception_score),
            fmt(report.absolute_deception_score),
            report.accuracies[evaluated],
            report.tax_distribution.total(),
            report.saturation_count
        );
    }
    println!(
        "\nThe adaptive mode re-weights supervision by the teacher's margin \
         |2t - 1|; its tax is measured like any other conflicted run."
    );
    Ok(())
}
