use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use si_amp::amp::{run_trial, AmpOptions, Variant};
use si_amp::harness::config::load_draft;
use si_amp::harness::curves::{self, CurveSetup};
use si_amp::harness::experiment::AggregateResult;
use si_amp::harness::output::{self, write_file};
use si_amp::harness::{emit_csv, run_experiment, ExperimentSpec, Preset};
use si_amp::model::{write_trace_csv, TrialScenario};
use si_amp::oracle::{run_checks, OracleReport};
use si_amp::rng::SeedTree;
use si_amp::state_evolution::{se_fixed_point, SeDenoiser, SeParams};

#[derive(Parser)]
#[command(name = "si-amp", version, about = "Activity detection with side-information-aided AMP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment: every CSV plus metadata.json
    Simulate(ExperimentArgs),
    /// ROC curves only
    Roc(ExperimentArgs),
    /// No-SI state evolution of the first block
    SeTrace(ExperimentArgs),
    /// Denoiser output magnitude against |x|, with and without side information
    DenoiserCurve(CurveArgs),
    /// Energy threshold against the previous block's |x|
    DetectorCurve(CurveArgs),
    /// Compare the closed forms against brute-force posteriors
    OracleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Instances per (antennas, SNR) cell
        #[arg(long, default_value_t = 1112)]
        instances: usize,
    },
    /// Dump one trial's activity/channels and the AMP iteration trace
    Trace {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, value_enum, default_value = "si")]
        variant: VariantArg,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Si,
    Nosi,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config file
    config: Option<PathBuf>,
    /// Start from a named preset (when no config file is given)
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl ExperimentArgs {
    fn spec(&self) -> si_amp::Result<ExperimentSpec> {
        let mut d = match (&self.config, self.preset) {
            (Some(_), Some(_)) => {
                return Err(si_amp::Error::InvalidConfig(
                    "give either a config file or --preset, not both (a config file may name a preset)".into(),
                ))
            }
            (Some(path), None) => load_draft(path)?,
            (None, p) => p.unwrap_or(Preset::Fig3Desk).draft(),
        };
        if let Some(s) = self.seed {
            d.rng_seed = s;
        }
        if let Some(t) = self.trials {
            d.num_trials = t;
        }
        if let Some(o) = &self.out_dir {
            d.out_dir = o.clone();
        }
        if let Some(p) = self.parallelism {
            d.parallelism = p;
        }
        d.build()
    }
}

fn create_dir(dir: &Path) -> si_amp::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| si_amp::Error::io(dir, e))
}

fn print_table(result: &AggregateResult, spec: &ExperimentSpec) {
    println!("slot variant  P_MD@P_FA=0.01  P_MD@0.05  P_MD@0.1   NMSE(l=0)");
    for &v in &spec.variants {
        for j in 1..=spec.scenario.num_blocks {
            let curve = result.curve(j, v).expect("curve for every slot");
            let at = |t| curve.pmd_at_pfa(t).map_or("-".to_string(), |(p, _)| format!("{p:.4}"));
            let nmse = result
                .summary(j, v)
                .and_then(|s| s.metrics.nmse())
                .map_or("-".to_string(), |n| format!("{:.2} dB", 10.0 * n.log10()));
            println!("{j:>4} {:<7} {:>15} {:>10} {:>9}  {nmse}", v.as_str(), at(0.01), at(0.05), at(0.1));
        }
    }
}

fn run(cli: Cli) -> si_amp::Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let spec = args.spec()?;
            let result = run_experiment(&spec)?;
            let files = emit_csv(&result, &spec.out_dir)?;
            print_table(&result, &spec);
            if result.metadata.trials_failed > 0 {
                eprintln!("{} trial(s) failed; see metadata.json", result.metadata.trials_failed);
            }
            println!("wrote {}", files.roc.parent().unwrap_or(Path::new(".")).display());
        }
        Command::Roc(args) => {
            let spec = args.spec()?;
            let result = run_experiment(&spec)?;
            create_dir(&spec.out_dir)?;
            let path = spec.out_dir.join("roc.csv");
            write_file(&path, |w| output::write_roc(w, &result.curves))?;
            print_table(&result, &spec);
            println!("wrote {}", path.display());
        }
        Command::SeTrace(args) => {
            let spec = args.spec()?;
            let params = SeParams::from_scenario(&spec.scenario, spec.se_samples)?;
            let seed = SeedTree::new(spec.scenario.rng_seed).derive_u64("se-seed", &[]);
            let trace = se_fixed_point(&params, SeDenoiser::Mmse(Variant::Nosi), seed)?;
            create_dir(&spec.out_dir)?;
            let path = spec.out_dir.join("se_trace.csv");
            write_file(&path, |w| output::write_se_trace(w, &trace))?;
            println!(
                "fixed point tau^2 = {:.6e} after {} steps (converged: {}); wrote {}",
                trace.fixed_point,
                trace.tau_sq.len() - 1,
                trace.converged,
                path.display()
            );
        }
        Command::DenoiserCurve(args) => {
            create_dir(&args.out_dir)?;
            let path = args.out_dir.join("denoiser_curve.csv");
            let rows = curves::denoiser_curve(
                &CurveSetup::default(),
                &curves::default_denoiser_grid(),
                &curves::DEFAULT_PREV_ABS,
            )?;
            write_file(&path, |w| output::write_denoiser_curve(w, &rows))?;
            println!("wrote {}", path.display());
        }
        Command::DetectorCurve(args) => {
            create_dir(&args.out_dir)?;
            let path = args.out_dir.join("threshold_curve.csv");
            let rows = curves::threshold_curve(&CurveSetup::default(), 0.0, &curves::default_threshold_grid())?;
            write_file(&path, |w| output::write_threshold_curve(w, &rows))?;
            println!("wrote {}", path.display());
        }
        Command::OracleCheck { seed, instances } => {
            let r = run_checks(seed, instances);
            let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
            println!("instances: {}", r.instances);
            println!(
                "denoiser max relative error   {:.3e}  (< {:.0e})  {}",
                r.denoiser_max_rel_err,
                OracleReport::DENOISER_TOL,
                mark(r.denoiser_max_rel_err < OracleReport::DENOISER_TOL)
            );
            println!(
                "LLR max absolute error        {:.3e}  (< {:.0e})  {}",
                r.llr_max_abs_err,
                OracleReport::LLR_TOL,
                mark(r.llr_max_abs_err < OracleReport::LLR_TOL)
            );
            println!(
                "detector disagreements        {}  {}",
                r.detector_disagreements,
                mark(r.detector_disagreements == 0)
            );
            println!(
                "derivative max relative error {:.3e}  (< {:.0e})  {}",
                r.derivative_max_rel_err,
                OracleReport::DERIVATIVE_TOL,
                mark(r.derivative_max_rel_err < OracleReport::DERIVATIVE_TOL)
            );
            return Ok(r.passed());
        }
        Command::Trace { exp, trial, variant } => {
            let spec = exp.spec()?;
            let cfg = &spec.scenario;
            let scenario = TrialScenario::generate(cfg, &SeedTree::new(cfg.rng_seed), trial)?;
            let variant = match variant {
                VariantArg::Si => Variant::Si,
                VariantArg::Nosi => Variant::Nosi,
            };
            let runs = run_trial(
                &scenario.received,
                &scenario.pilots,
                &cfg.path_losses,
                cfg.activity_model()?,
                variant,
                &AmpOptions::from_config(cfg),
            )?;
            create_dir(&spec.out_dir)?;
            let trace_path = spec.out_dir.join("scenario_trace.csv");
            write_file(&trace_path, |w| write_trace_csv(w, &scenario.truths))?;
            let amp_path = spec.out_dir.join("amp_trace.csv");
            let records: Vec<_> = runs.iter().map(|r| r.result.iterations.as_slice()).collect();
            write_file(&amp_path, |w| output::write_amp_trace(w, &records))?;
            println!("wrote {} and {}", trace_path.display(), amp_path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
