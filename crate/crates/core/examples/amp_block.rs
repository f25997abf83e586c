//! One trial of correlated activity: runs AMP on consecutive blocks with and
//! without side information and reports per-block detection at `l = 0`.
//!
//! cargo run --release --example amp_block -- [seed]

use si_amp::amp::{run_trial, AmpOptions, Variant};
use si_amp::denoiser::DenoiserParams;
use si_amp::detector::{block_statistics, compute_metrics};
use si_amp::harness::{GainSource, Preset};
use si_amp::model::TrialScenario;
use si_amp::rng::SeedTree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut draft = Preset::Fig3Desk.draft();
    draft.rng_seed = std::env::args().nth(1).map_or(Ok(3), |s| s.parse())?;
    draft.num_devices = 500;
    draft.pilot_length = 100;
    draft.noise_variance = 0.1;
    draft.gains = GainSource::Common(1.0);
    let cfg = draft.build()?.scenario;
    let activity = cfg.activity_model()?;

    let scenario = TrialScenario::generate(&cfg, &SeedTree::new(cfg.rng_seed), 0)?;
    for variant in [Variant::Nosi, Variant::Si] {
        let runs = run_trial(
            &scenario.received,
            &scenario.pilots,
            &cfg.path_losses,
            activity,
            variant,
            &AmpOptions::from_config(&cfg),
        )?;
        println!("{}:", variant.as_str());
        for (j, (run, truth)) in runs.iter().zip(&scenario.truths).enumerate() {
            let res = &run.result;
            let tau = res.tau();
            let stats = block_statistics(
                &res.pseudo_obs,
                |n| DenoiserParams::new(cfg.path_losses[n], tau, activity, cfg.num_antennas),
                run.side_info.as_deref(),
                truth,
            );
            let decisions: Vec<bool> = stats.iter().map(|s| s.decide(0.0)).collect();
            let m = compute_metrics(&decisions, truth, &res.estimate);
            println!(
                "  block {}: {:>3} active, {:>2} iterations, tau^2 {:.4}, missed {:>2}, false alarms {:>2}, NMSE {:.2} dB",
                j + 1,
                truth.num_active(),
                res.iters_used,
                tau * tau,
                m.missed,
                m.false_alarms,
                10.0 * m.nmse().unwrap_or(f64::NAN).log10()
            );
        }
    }
    Ok(())
}
