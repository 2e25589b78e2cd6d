//! Sweep the confidence threshold T without retraining: the partition is
//! recomputed from the cached per-sample confidence dumps of one run.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example threshold_sweep
//! ```

use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::run_sweep;
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    let cfg = parse_config_with_seed(
        "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
         [strong]\nhidden_layers = [24]\n\
         [objective]\nconflict = \"explicit\"\n\
         [sweep]\naxis = \"threshold\"\nthresholds = [0.70, 0.75, 0.80, 0.85]\n",
        Some(3),
    )?;
    let bundle = generate_bundle(&cfg.task)?;
    let outcome = run_sweep(&cfg, &bundle, 1)?;

    println!("{:<8} {:>8} {:>12} {:>10}", "T", "ds", "absolute ds", "area");
    for point in &outcome.points {
        let report = point.outcome.as_ref().expect("threshold points succeed");
        let fmt = |v: Option<f64>| v.map_or("undef".to_string(), |d| format!("{d:.3}"));
        println!(
            "{:<8} {:>8} {:>12} {:>10.3}",
            point.label,
            fmt(report.deception_score),
            fmt(report.absolute_deception_score),
            report.area_ratio
        );
    }
    println!(
        "\nOne training run produced every row; only the partition moved. \
         (trend over T: spearman {:?})",
        outcome.trend.spearman_axis_vs_ds
    );
    Ok(())
}
