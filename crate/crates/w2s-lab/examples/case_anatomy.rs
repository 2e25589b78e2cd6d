//! Anatomy of single deception cases: pick flipped test samples from a
//! conflicted run and show each model's confidence on them, the way a case
//! study table would.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example case_anatomy
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

    // Flips inside Strong-Known / Weak-Unknown are the deception cases.
    let mut shown = 0;
    println!(
        "{:>6} {:>6} {:>8} {:>8} {:>10} {:>10}  region",
        "id", "tier", "weak", "strong", "reference", "conflicted"
    );
    for row in &report.confidence_dumps {
        let reference = row.confidences["w2s_no_conflict"];
        let conflicted = row.confidences["w2s_conflict"];
        if row.region == Region::SkWuk && reference >= 0.5 && conflicted < 0.5 {
            let sample = bundle
                .d_test
                .iter()
                .find(|s| s.id == row.id)
                .expect("dump ids come from the test split");
            println!(
                "{:>6} {:>6} {:>8.2} {:>8.2} {:>10.2} {:>10.2}  {}",
                row.id,
                sample.tier.as_str(),
                row.confidences["weak_gt"],
                row.confidences["strong_gt"],
                reference,
                conflicted,
                row.region.as_str()
            );
            shown += 1;
            if shown == 10 {
                break;
            }
        }
    }
    println!(
        "\nEach row: the weak teacher is uncertain (below T), the strong \
         ceiling knows the answer, the no-conflict student had it right, and \
         the conflicting objective flipped it. Confidences are toward the \
         correct label."
    );
    Ok(())
}
