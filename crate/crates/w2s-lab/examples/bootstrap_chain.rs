//! Bootstrapping: insert an intermediate teacher between the weak model and
//! the strong student and compare the deception score against direct
//! supervision. The conflicting objective appears only in the final stage.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example bootstrap_chain
//! ```

use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::{run_bootstrap, run_ground_truth, run_weak_to_strong};
use w2s_lab::scorer::ScorerSpec;
use w2s_lab::task::generate_bundle;

fn main() -> w2s_lab::Result<()> {
    let cfg = parse_config_with_seed(
        "[task]\nsplit_sizes = [2000, 2000, 2000, 2000]\n\
         [strong]\nhidden_layers = [24]\n\
         [objective]\nconflict = \"explicit\"\nalpha = 0.5\n",
        Some(2),
    )?;
    let bundle = generate_bundle(&cfg.task)?;
    let gt = run_ground_truth(&cfg, &bundle)?;

    let direct = run_weak_to_strong(&cfg, &bundle, &gt)?.report;
    let fmt = |v: Option<f64>| v.map_or("undef".to_string(), |d| format!("{d:.3}"));
    println!(
        "{:<22} ds {:>6}  w2s acc {:.3}",
        "direct (no rung)",
        fmt(direct.deception_score),
        direct.accuracies["w2s_conflict"]
    );

    for hidden in [vec![4], vec![8]] {
        let mut chain_cfg = cfg.clone();
        chain_cfg.intermediate_specs = vec![ScorerSpec {
            hidden_layers: hidden.clone(),
            ..cfg.weak_spec.clone()
        }];
        let outcome = run_bootstrap(&chain_cfg, &bundle, &gt)?;
        let report = &outcome.report;
        println!(
            "{:<22} ds {:>6}  w2s acc {:.3}  intermediate acc {:.3}",
            format!("via intermediate {hidden:?}"),
            fmt(report.deception_score),
            report.accuracies["w2s_conflict"],
            report.accuracies["intermediate_0"]
        );
    }
    println!(
        "\nThe chain: weak labels the held-out pool, the intermediate trains \
         on those labels, relabels the ground-truth prompts, and only the \
         final strong student sees the conflicting objective. Deception is \
         still judged against the original weak/strong ground-truth partition."
    );
    Ok(())
}
