//! Sweep the strong model's capacity with the weak teacher fixed: the
//! deception score climbs as the capability gap widens, faster than the
//! Strong-Known/Weak-Unknown area alone.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example capacity_ladder
//! ```

use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::run_sweep;
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    let cfg = parse_config_with_seed(
        "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
         [objective]\nconflict = \"explicit\"\nalpha = 0.5\n\
         [sweep]\naxis = \"strong_capacity\"\nstrong_capacity = [[2], [4], [8], [24]]\n",
        Some(1),
    )?;
    let bundle = generate_bundle(&cfg.task)?;
    let outcome = run_sweep(&cfg, &bundle, 2)?;

    println!("{:<16} {:>7} {:>8} {:>8} {:>9}", "strong", "params", "ds", "area", "w2s acc");
    for point in &outcome.points {
        match &point.outcome {
            Ok(report) => println!(
                "{:<16} {:>7} {:>8} {:>8.3} {:>9.3}",
                point.label,
                report.meta.strong_params,
                report
                    .deception_score
                    .map_or("undef".to_string(), |d| format!("{d:.3}")),
                report.area_ratio,
                report.accuracies["w2s_conflict"]
            ),
            Err(e) => println!("{:<16} failed: {e}", point.label),
        }
    }
    println!(
        "\nspearman(capacity, deception score) = {:?} over {} points",
        outcome.trend.spearman_axis_vs_ds, outcome.trend.points_with_ds
    );
    Ok(())
}
