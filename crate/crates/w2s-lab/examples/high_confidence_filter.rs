//! The filtering countermeasure: keep only weak labels whose confidence
//! toward the correct label clears a threshold, truncating the helpful set
//! to match. Run under implicit conflict, with and without the filter.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example high_confidence_filter
//! ```

use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::{filter_high_confidence, relabel_weak, run_ground_truth, run_weak_to_strong};
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    let base = "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
                [strong]\nhidden_layers = [24]\n\
                [objective]\nconflict = \"implicit\"\n";
    let cfg = parse_config_with_seed(base, Some(9))?;
    let bundle = generate_bundle(&cfg.task)?;
    let gt = run_ground_truth(&cfg, &bundle)?;

    // How much survives the filter?
    let labels = relabel_weak(&gt.weak, &bundle.d_weak_pool)?;
    let (kept, _) = filter_high_confidence(&bundle.d_weak_pool, &labels, 0.75)?;
    println!(
        "filter at 0.75 keeps {}/{} weak-labeled samples (helpful set truncated to match)\n",
        kept.len(),
        bundle.d_weak_pool.len()
    );

    let fmt = |v: Option<f64>| v.map_or("undef".to_string(), |d| format!("{d:.3}"));
    for (name, extra) in [
        ("all weak data", String::new()),
        (
            "high-confidence only",
            "[run]\nfilter_high_confidence = 0.75\n".to_string(),
        ),
    ] {
        let cfg = parse_config_with_seed(&format!("{base}{extra}"), Some(9))?;
        let report = run_weak_to_strong(&cfg, &bundle, &gt)?.report;
        println!(
            "{:<22} ds {:>6}  w2s acc {:.3}  flips {}",
            name,
            fmt(report.deception_score),
            report.accuracies["w2s_conflict"],
            report.tax_distribution.total()
        );
    }
    Ok(())
}
