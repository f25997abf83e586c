//! Generates one trial of the physical preset and writes its activity and
//! channels to CSV.
//!
//! cargo run --example scenario_trace -- [csv_path]

use si_amp::harness::Preset;
use si_amp::model::{write_trace_csv, TrialScenario};
use si_amp::rng::SeedTree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Preset::Fig3Desk.draft().build()?.scenario;
    let scenario = TrialScenario::generate(&cfg, &SeedTree::new(cfg.rng_seed), 0)?;
    let model = cfg.activity_model()?;
    println!(
        "rate {}, persistence {}, reactivation {:.4}",
        model.rate(),
        model.persistence(),
        model.reactivation()
    );
    for (j, t) in scenario.truths.iter().enumerate() {
        let stayed = if j == 0 {
            String::new()
        } else {
            let prev = &scenario.truths[j - 1].activity;
            let both = t.activity.iter().zip(prev).filter(|(a, b)| **a && **b).count();
            format!(", {both} still active from block {j}")
        };
        println!("block {}: {} of {} active{stayed}", j + 1, t.num_active(), cfg.num_devices);
    }
    let mut gains = cfg.path_losses.clone();
    gains.sort_by(f64::total_cmp);
    println!(
        "gains (noise-normalised): min {:.3e}, median {:.3e}, max {:.3e}",
        gains[0],
        gains[gains.len() / 2],
        gains[gains.len() - 1]
    );

    let path = std::env::args().nth(1).unwrap_or_else(|| "scenario_trace.csv".into());
    write_trace_csv(std::fs::File::create(&path)?, &scenario.truths)?;
    println!("wrote {path}");
    Ok(())
}
