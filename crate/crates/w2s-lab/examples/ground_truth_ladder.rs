//! Train the capability ladder on ground-truth data and show how the
//! known/unknown asymmetry emerges: the linear weak model masters only the
//! easy tier while wider students learn the hard component too.
//!
//! ```bash
//! cargo run --release -p w2s-lab --example ground_truth_ladder
//! ```

use w2s_lab::analysis::accuracy;
use w2s_lab::config::parse_config_with_seed;
use w2s_lab::pipeline::run_ground_truth;
use w2s_lab::task::{generate_bundle, Tier};

fn main() -> w2s_lab::Result<()> {
    println!("{:<10} {:>7} {:>8} {:>9} {:>9} {:>11}",
        "strong", "params", "acc", "easy acc", "hard acc", "hard known");
    for hidden in [vec![2], vec![4], vec![8], vec![24], vec![64]] {
        let cfg = parse_config_with_seed(
            &format!(
                "[task]\nsplit_sizes = [2000, 50, 2000, 50]\n\
                 [strong]\nhidden_layers = {hidden:?}\n"
            ),
            Some(11),
        )?;
        let bundle = generate_bundle(&cfg.task)?;
        let gt = run_ground_truth(&cfg, &bundle)?;

        let easy: Vec<_> = bundle
            .d_test
            .iter()
            .filter(|s| s.tier == Tier::Easy)
            .cloned()
            .collect();
        let hard: Vec<_> = bundle
            .d_test
            .iter()
            .filter(|s| s.tier == Tier::Hard)
            .cloned()
            .collect();
        // Share of the hard tier the strong model "knows" at T = 0.75.
        let known = hard
            .iter()
            .filter(|s| gt.strong.confidence_toward_correct(s).unwrap() >= 0.75)
            .count() as f64
            / hard.len() as f64;
        println!(
            "{:<10} {:>7} {:>8.3} {:>9.3} {:>9.3} {:>11.3}",
            format!("{hidden:?}"),
            gt.strong.param_count(),
            accuracy(&gt.strong, &bundle.d_test)?,
            accuracy(&gt.strong, &easy)?,
            accuracy(&gt.strong, &hard)?,
            known
        );
        if hidden == [2] {
            println!(
                "{:<10} {:>7} {:>8.3} {:>9.3} {:>9.3} {:>11.3}   <- weak teacher",
                "linear",
                gt.weak.param_count(),
                accuracy(&gt.weak, &bundle.d_test)?,
                accuracy(&gt.weak, &easy)?,
                accuracy(&gt.weak, &hard)?,
                hard.iter()
                    .filter(|s| gt.weak.confidence_toward_correct(s).unwrap() >= 0.75)
                    .count() as f64
                    / hard.len() as f64
            );
        }
    }
    Ok(())
}
