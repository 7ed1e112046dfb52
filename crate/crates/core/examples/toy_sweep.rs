//! Runs a few acquisition methods on the 1-D toy pool and prints final regrets.
//!
//! `cargo run --release -p ballet-core --example toy_sweep [seeds] [horizon]`

use ballet_core::ballet::MethodName;
use ballet_core::bench::{aggregate, run_trial, ExperimentConfig, ObjectiveKind, ObjectiveSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let horizon: usize = args.get(2).map_or(Ok(40), |s| s.parse())?;
    let objective = ObjectiveSpec {
        kind: ObjectiveKind::Toy1D,
        noise_std: 0.0,
    };
    for method in [
        "ici",
        "rci",
        "rts",
        "ciwidth-global",
        "ucb-global",
        "ei-global",
        "ts-global",
    ] {
        let spec = method.parse::<MethodName>()?.into_spec(std::f64::consts::SQRT_2)?;
        let mut config = ExperimentConfig::new("toy", objective.clone(), spec);
        config.horizon = horizon;
        config.seeds = (1..=seeds).collect();
        let start = std::time::Instant::now();
        let traces = config
            .seeds
            .iter()
            .map(|&s| run_trial(&config, s))
            .collect::<Result<Vec<_>, _>>()?;
        let summary = aggregate(&traces)?;
        let last = summary.rows.last().expect("non-empty trace");
        println!(
            "{method:>16}: regret {:.4} +- {:.4}  roi_ratio {:.3}  width_int {:.3}  ({:.1?})",
            last.simple_regret.mean,
            last.simple_regret.se,
            last.roi_ratio.mean,
            last.width_intersect.mean,
            start.elapsed()
        );
    }
    Ok(())
}
