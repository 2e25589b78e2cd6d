//! The preference-optimization scenario: the student only sees hard
//! preference orders, never the teacher's probabilities. Runs both SimPO
//! (reference-free, beta 2.0 / gamma 1.0) and DPO (frozen post-SFT
//! reference, beta 0.1, scores normalized by L = 50).
//!
//! ```bash
//! cargo run --release -p w2s-lab --example preference_alignment
//! ```

use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::{run_ground_truth, run_weak_to_strong};
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    for base in ["simpo", "dpo"] {
        // The DPO normalization constant is an arbitrary rescale of the raw
        // score sums; the LLM-scale default of 50 flattens desk-scale
        // training signal, so this demo pins a spread that suits tiny
        // scorers. DPO also drifts from its frozen reference slowly and
        // gets a longer optimization budget.
        let extra = if base == "dpo" {
            "dpo_norm_l = 2.0\n[schedule]\nsft_epochs = 1\nepochs = 120\n"
        } else {
            "[schedule]\nsft_epochs = 1\nepochs = 40\n"
        };
        let cfg = parse_config_with_seed(
            &format!(
                "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
                 [strong]\nhidden_layers = [24]\n\
                 [objective]\nscenario = \"preference\"\nbase_po_loss = \"{base}\"\n\
                 conflict = \"explicit\"\nalpha = 0.5\n{extra}"
            ),
            Some(5),
        )?;
        let bundle = generate_bundle(&cfg.task)?;
        let gt = run_ground_truth(&cfg, &bundle)?;
        let outcome = run_weak_to_strong(&cfg, &bundle, &gt)?;
        let report = &outcome.report;

        println!(
            "{base}: beta={} gamma={} dpo_norm_l={}",
            cfg.objective.beta, cfg.objective.gamma, cfg.objective.dpo_norm_l
        );
        for (role, acc) in &report.accuracies {
            println!("  accuracy {role:<16} {acc:.3}");
        }
        println!(
            "  deception score {} | tax {} flips | area ratio {:.3}\n",
            report
                .deception_score
                .map_or("undefined".into(), |d| format!("{d:.3}")),
            report.tax_distribution.total(),
            report.area_ratio
        );
    }
    println!(
        "Supervision here is hard orders only (the weak-chosen side also \
         drives the SFT pre-stage), mirroring how preference alignment hides \
         the teacher's confidence from the student."
    );
    Ok(())
}
