//! Seeded Monte Carlo experiments over many trials.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{run_trial, AmpOptions, Variant};
use crate::detector::{aggregate_roc, block_statistics, compute_metrics, roc_counts, DetectionMetrics, RocCounts, RocCurve};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentSpec;
use crate::model::TrialScenario;
use crate::rng::SeedTree;
use crate::state_evolution::{se_fixed_point, SeDenoiser, SeParams, SeTrace};

/// Outcome of one block of one trial under one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub roc: RocCounts,
    /// Detection at `l = 0` plus estimation error.
    pub metrics: DetectionMetrics,
    pub tau: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    /// Same order as `ExperimentSpec::variants`; one entry per block.
    pub variants: Vec<(Variant, Vec<SlotOutcome>)>,
}

/// Runs every requested variant on one trial's scenario. Both variants see
/// the same pilots, activity, channels and noise.
pub fn run_single_trial(spec: &ExperimentSpec, trial: u64) -> Result<TrialOutcome> {
    let cfg = &spec.scenario;
    let seeds = SeedTree::new(cfg.rng_seed);
    let scenario = TrialScenario::generate(cfg, &seeds, trial)?;
    let activity = cfg.activity_model()?;
    let opts = AmpOptions::from_config(cfg);
    let mut variants = Vec::with_capacity(spec.variants.len());
    for &variant in &spec.variants {
        let runs = run_trial(&scenario.received, &scenario.pilots, &cfg.path_losses, activity, variant, &opts)?;
        let slots = runs
            .iter()
            .zip(&scenario.truths)
            .map(|(run, truth)| {
                let res = &run.result;
                let tau = res.tau();
                let stats = block_statistics(
                    &res.pseudo_obs,
                    |n| crate::denoiser::DenoiserParams::new(cfg.path_losses[n], tau, activity, cfg.num_antennas),
                    run.side_info.as_deref(),
                    truth,
                );
                let decisions: Vec<bool> = stats.iter().map(|s| s.decide(0.0)).collect();
                SlotOutcome {
                    roc: roc_counts(&stats, &spec.l_grid),
                    metrics: compute_metrics(&decisions, truth, &res.estimate),
                    tau,
                    iterations: res.iters_used,
                    converged: res.converged,
                }
            })
            .collect();
        variants.push((variant, slots));
    }
    Ok(TrialOutcome { trial, variants })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotCurve {
    /// 1-based block index.
    pub slot: usize,
    pub variant: Variant,
    pub curve: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSummary {
    pub slot: usize,
    pub variant: Variant,
    pub trials: usize,
    /// Pooled over trials, detection at `l = 0`.
    pub metrics: DetectionMetrics,
    pub tau_mean: f64,
    pub iterations_mean: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub trials_requested: usize,
    pub trials_failed: usize,
    pub failures: Vec<String>,
    pub spec: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub curves: Vec<SlotCurve>,
    pub summaries: Vec<SlotSummary>,
    /// No-SI state evolution of the first block.
    pub se_trace: SeTrace,
    pub metadata: RunMetadata,
}

impl AggregateResult {
    pub fn curve(&self, slot: usize, variant: Variant) -> Option<&RocCurve> {
        self.curves
            .iter()
            .find(|c| c.slot == slot && c.variant == variant)
            .map(|c| &c.curve)
    }

    pub fn summary(&self, slot: usize, variant: Variant) -> Option<&SlotSummary> {
        self.summaries.iter().find(|s| s.slot == slot && s.variant == variant)
    }
}

pub fn version_string() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Runs all trials on a pool of `spec.parallelism` threads and pools the
/// counts. Failed trials are recorded and skipped; more than 10% failures
/// abort the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateResult> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let (outcomes, se_trace) = pool.install(|| {
        let outcomes: Vec<Result<TrialOutcome>> = (0..spec.num_trials as u64)
            .into_par_iter()
            .map(|t| run_single_trial(spec, t))
            .collect();
        let se = SeParams::from_scenario(&spec.scenario, spec.se_samples).and_then(|p| {
            let seed = SeedTree::new(spec.scenario.rng_seed).derive_u64("se-seed", &[]);
            se_fixed_point(&p, SeDenoiser::Mmse(Variant::Nosi), seed)
        });
        (outcomes, se)
    });
    let se_trace = se_trace?;

    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (t, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => ok.push(o),
            Err(e) => failures.push(format!("trial {t}: {e}")),
        }
    }
    if failures.len() * 10 > spec.num_trials {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: spec.num_trials,
            first: failures[0].clone(),
        });
    }

    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    for (vi, &variant) in spec.variants.iter().enumerate() {
        for j in 0..spec.scenario.num_blocks {
            let slots: Vec<&SlotOutcome> = ok.iter().map(|o| &o.variants[vi].1[j]).collect();
            let counts: Vec<RocCounts> = slots.iter().map(|s| s.roc.clone()).collect();
            curves.push(SlotCurve {
                slot: j + 1,
                variant,
                curve: aggregate_roc(&counts, &spec.l_grid),
            });
            let mut metrics = DetectionMetrics::default();
            for s in &slots {
                metrics.merge(&s.metrics);
            }
            let n = slots.len().max(1) as f64;
            summaries.push(SlotSummary {
                slot: j + 1,
                variant,
                trials: slots.len(),
                metrics,
                tau_mean: slots.iter().map(|s| s.tau).sum::<f64>() / n,
                iterations_mean: slots.iter().map(|s| s.iterations as f64).sum::<f64>() / n,
                converged_fraction: slots.iter().filter(|s| s.converged).count() as f64 / n,
            });
        }
    }

    Ok(AggregateResult {
        curves,
        summaries,
        se_trace,
        metadata: RunMetadata {
            seed: spec.scenario.rng_seed,
            version: version_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
            trials_requested: spec.num_trials,
            trials_failed: failures.len(),
            failures,
            spec: spec.clone(),
        },
    })
}
