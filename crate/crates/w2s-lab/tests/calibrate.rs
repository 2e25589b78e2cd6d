//! Manual calibration harness (ignored by default).
//!
//! Run with `cargo test -p w2s-lab --test calibrate -- --ignored --nocapture`
//! to print ladder diagnostics for candidate schedules.

use w2s_lab::analysis;
use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline;
use w2s_lab::task::{generate_bundle, Tier};

const LADDER: [&str; 4] = ["[2]", "[4]", "[8]", "[24]"];

fn trend_config(hidden: &str, conflict: &str, alpha: f64, seed: u64) -> w2s_lab::PipelineConfig {
    trend_config_ep(hidden, conflict, alpha, seed, 15)
}

fn trend_config_ep(
    hidden: &str,
    conflict: &str,
    alpha: f64,
    seed: u64,
    epochs: usize,
) -> w2s_lab::PipelineConfig {
    let text = format!(
        "[weak]\ninit_scale = 1.0\n\
         [strong]\nhidden_layers = {hidden}\ninit_scale = 1.0\n\
         [objective]\nconflict = \"{conflict}\"\nalpha = {alpha}\n\
         [schedule]\nepochs = {epochs}\nlearning_rate = 0.03\n"
    );
    parse_config_with_seed(&text, Some(seed)).unwrap()
}

#[test]
#[ignore]
fn deception_trend_diagnostics() {
    for conflict in ["explicit", "implicit"] {
        println!("=== conflict {conflict} ===");
        let mut spearmans = Vec::new();
        for seed in 1..=5u64 {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut line = format!("seed {seed}:");
            for hidden in LADDER {
                let cfg = trend_config(hidden, conflict, 0.5, seed);
                let bundle = generate_bundle(&cfg.task).unwrap();
                let gt = pipeline::run_ground_truth(&cfg, &bundle).unwrap();
                let out = pipeline::run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
                let ds = out.report.deception_score;
                let area = out.report.area_ratio;
                line.push_str(&format!(
                    " {hidden}: ds {} area {area:.3} flips {}",
                    ds.map_or("undef".into(), |d| format!("{d:.3}")),
                    out.report.tax_distribution.total()
                ));
                if let Some(ds) = ds {
                    xs.push(cfg.strong_spec.param_count(16) as f64);
                    ys.push(ds);
                }
            }
            let rho = analysis::spearman(&xs, &ys);
            line.push_str(&format!("  rho {rho:?}"));
            println!("{line}");
            if let Some(rho) = rho {
                spearmans.push(rho);
            }
        }
        let mean = spearmans.iter().sum::<f64>() / spearmans.len().max(1) as f64;
        println!("mean spearman: {mean:.3}\n");
    }
}

fn po_trend_config(hidden: &str, alpha: f64, seed: u64) -> w2s_lab::PipelineConfig {
    let text = format!(
        "[weak]\ninit_scale = 1.0\n\
         [strong]\nhidden_layers = {hidden}\ninit_scale = 1.0\n\
         [objective]\nscenario = \"preference\"\nbase_po_loss = \"simpo\"\nconflict = \"explicit\"\nalpha = {alpha}\n\
         [schedule]\nepochs = 15\nlearning_rate = 0.03\n"
    );
    parse_config_with_seed(&text, Some(seed)).unwrap()
}

#[test]
#[ignore]
fn po_alpha_trend_diagnostics() {
    let mut wins = 0;
    let mut cells = 0;
    for seed in 1..=5u64 {
        for hidden in LADDER {
            let mut ds_by_alpha = Vec::new();
            for alpha in [0.25, 0.5] {
                let cfg = po_trend_config(hidden, alpha, seed);
                let bundle = generate_bundle(&cfg.task).unwrap();
                let gt = pipeline::run_ground_truth(&cfg, &bundle).unwrap();
                let out = pipeline::run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
                ds_by_alpha.push((
                    out.report.deception_score,
                    out.report.tax_distribution.total(),
                ));
            }
            if let ((Some(lo), nlo), (Some(hi), nhi)) = (ds_by_alpha[0], ds_by_alpha[1]) {
                cells += 1;
                if hi >= lo {
                    wins += 1;
                }
                println!("seed {seed} {hidden}: ds(0.25) {lo:.3} ({nlo}) ds(0.5) {hi:.3} ({nhi})");
            } else {
                println!("seed {seed} {hidden}: undefined {ds_by_alpha:?}");
            }
        }
    }
    println!("po alpha trend: {wins}/{cells} cells with ds(0.5) >= ds(0.25)");
}

#[test]
#[ignore]
fn bootstrap_direction_diagnostics() {
    let mut good_seeds = 0;
    for seed in 1..=5u64 {
        let cfg = trend_config_ep("[24]", "explicit", 0.5, seed, 40);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = pipeline::run_ground_truth(&cfg, &bundle).unwrap();
        let direct = pipeline::run_weak_to_strong(&cfg, &bundle, &gt)
            .unwrap()
            .report
            .deception_score
            .unwrap();
        let mut boot_ds = Vec::new();
        for inter in ["[4]", "[8]"] {
            let mut icfg = cfg.clone();
            let hidden: Vec<usize> = match inter {
                "[4]" => vec![4],
                _ => vec![8],
            };
            icfg.intermediate_specs = vec![w2s_lab::ScorerSpec {
                hidden_layers: hidden,
                ..icfg.weak_spec.clone()
            }];
            let out = pipeline::run_bootstrap(&icfg, &bundle, &gt).unwrap();
            boot_ds.push(out.report.deception_score);
        }
        let defined: Vec<f64> = boot_ds.iter().filter_map(|d| *d).collect();
        let median = {
            let mut v = defined.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if v.is_empty() {
                f64::NAN
            } else if v.len() % 2 == 1 {
                v[v.len() / 2]
            } else {
                0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
            }
        };
        let ok = median <= direct;
        if ok {
            good_seeds += 1;
        }
        println!(
            "seed {seed}: direct {direct:.3} boot {boot_ds:?} median {median:.3} ok {ok}"
        );
    }
    println!("bootstrap direction: {good_seeds}/5 seeds");
}

#[test]
#[ignore]
fn alpha_trend_diagnostics() {
    let mut wins = 0;
    let mut cells = 0;
    for seed in 1..=5u64 {
        for hidden in LADDER {
            let mut ds_by_alpha = Vec::new();
            let epochs: usize = std::env::var("CAL_A6_EPOCHS")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(40);
            for alpha in [0.25, 0.5] {
                let cfg = trend_config_ep(hidden, "explicit", alpha, seed, epochs);
                let bundle = generate_bundle(&cfg.task).unwrap();
                let gt = pipeline::run_ground_truth(&cfg, &bundle).unwrap();
                let out = pipeline::run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
                ds_by_alpha.push((
                    out.report.deception_score,
                    out.report.tax_distribution.total(),
                ));
            }
            if let ((Some(lo), nlo), (Some(hi), nhi)) = (ds_by_alpha[0], ds_by_alpha[1]) {
                cells += 1;
                if hi >= lo {
                    wins += 1;
                }
                println!("seed {seed} {hidden}: ds(0.25) {lo:.3} ({nlo}) ds(0.5) {hi:.3} ({nhi})");
            }
        }
    }
    println!("alpha trend: {wins}/{cells} cells with ds(0.5) >= ds(0.25)");
}

#[test]
#[ignore]
fn ladder_diagnostics() {
    let init_scale: f64 = std::env::var("CAL_INIT")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1.0);
    let lr: f64 = std::env::var("CAL_LR")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.01);
    let epoch_grid: Vec<usize> = std::env::var("CAL_EPOCHS")
        .unwrap_or_else(|_| "20,40,80".into())
        .split(',')
        .map(|e| e.parse().unwrap())
        .collect();
    for &epochs in &epoch_grid {
        for hidden in ["[2]", "[3]", "[4]", "[6]", "[8]", "[12]", "[24]", "[64]"] {
            let text = format!(
                "[strong]\nhidden_layers = {hidden}\ninit_scale = {init_scale}\n\
                 [weak]\ninit_scale = {init_scale}\n\
                 [schedule]\nepochs = {epochs}\nlearning_rate = {lr}\n"
            );
            let cfg = parse_config_with_seed(&text, Some(1)).unwrap();
            let bundle = generate_bundle(&cfg.task).unwrap();
            let gt = pipeline::run_ground_truth(&cfg, &bundle).unwrap();

            let weak_acc = analysis::accuracy(&gt.weak, &bundle.d_test).unwrap();
            let strong_acc = analysis::accuracy(&gt.strong, &bundle.d_test).unwrap();

            let hard: Vec<_> = bundle
                .d_test
                .iter()
                .filter(|s| s.tier == Tier::Hard)
                .cloned()
                .collect();
            let weak_hard = analysis::accuracy(&gt.weak, &hard).unwrap();
            let strong_hard = analysis::accuracy(&gt.strong, &hard).unwrap();

            // How much of the hard tier does each model "know" at T = 0.75?
            let known = |m: &w2s_lab::ScorerModel| {
                let k = hard
                    .iter()
                    .filter(|s| m.confidence_toward_correct(s).unwrap() >= 0.75)
                    .count();
                k as f64 / hard.len() as f64
            };
            println!(
                "epochs {epochs:>3} strong {hidden:>6}: acc W {weak_acc:.3} S {strong_acc:.3} | \
                 hard acc W {weak_hard:.3} S {strong_hard:.3} | hard known W {:.3} S {:.3}",
                known(&gt.weak),
                known(&gt.strong)
            );
        }
        println!();
    }
}
