//! Compares the state-evolution prediction of the converged noise level with
//! the value a single AMP run actually reaches.
//!
//! cargo run --release --example state_evolution -- [num_devices] [pilot_length] [seed] [common_gain]
//!
//! Without `common_gain` the gains follow the physical cell layout.

use si_amp::amp::{run_trial, AmpOptions, Variant};
use si_amp::harness::{GainSource, Preset};
use si_amp::model::TrialScenario;
use si_amp::rng::SeedTree;
use si_amp::state_evolution::{se_fixed_point, SeDenoiser, SeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut draft = Preset::Fig3Desk.draft();
    draft.num_devices = args.first().map_or(Ok(2000), |s| s.parse())?;
    draft.pilot_length = args.get(1).map_or(Ok(300), |s| s.parse())?;
    draft.rng_seed = args.get(2).map_or(Ok(7), |s| s.parse())?;
    draft.num_blocks = 1;
    if let Some(g) = args.get(3) {
        draft.gains = GainSource::Common(g.parse()?);
    }
    let cfg = draft.build()?.scenario;

    let params = SeParams::from_scenario(&cfg, 100_000)?;
    let trace = se_fixed_point(&params, SeDenoiser::Mmse(Variant::Nosi), cfg.rng_seed)?;
    println!("E[gamma] = {:.4e}", params.signal_power() / cfg.activity_rate);
    println!("state evolution ({} steps, converged: {}):", trace.tau_sq.len() - 1, trace.converged);
    for (t, (v, se)) in trace.tau_sq.iter().zip(&trace.stderr).enumerate().take(12) {
        println!("  step {t:>3}  tau^2 = {v:.6e}  (± {se:.1e})");
    }

    let scenario = TrialScenario::generate(&cfg, &SeedTree::new(cfg.rng_seed), 0)?;
    let runs = run_trial(
        &scenario.received,
        &scenario.pilots,
        &cfg.path_losses,
        cfg.activity_model()?,
        Variant::Nosi,
        &AmpOptions::from_config(&cfg),
    )?;
    let amp = &runs[0].result;
    println!("AMP ({} iterations, converged: {}):", amp.iters_used, amp.converged);
    for r in amp.iterations.iter().take(12) {
        println!("  iter {:>3}  tau^2 = {:.6e}", r.iter, r.tau * r.tau);
    }
    let empirical = amp.tau() * amp.tau();
    println!(
        "fixed point {:.6e} vs empirical {:.6e}: relative gap {:.2}%",
        trace.fixed_point,
        empirical,
        100.0 * (empirical - trace.fixed_point).abs() / trace.fixed_point
    );
    Ok(())
}
