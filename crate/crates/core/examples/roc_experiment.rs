//! Runs a preset experiment and prints missed-detection rates at a few
//! false-alarm levels for every slot and variant.
//!
//! cargo run --release --example roc_experiment -- [preset] [trials] [out_dir]

use std::path::PathBuf;

use si_amp::amp::Variant;
use si_amp::harness::{emit_csv, run_experiment, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("fig3-desk").parse()?;
    let mut draft = preset.draft();
    if let Some(t) = args.next() {
        draft.num_trials = t.parse()?;
    }
    draft.parallelism = std::thread::available_parallelism().map_or(1, |n| n.get());
    let spec = draft.build()?;

    let result = run_experiment(&spec)?;
    println!(
        "{}: {} trials in {:.1} s, SE fixed point tau^2 = {:.4e}",
        preset.name(),
        spec.num_trials,
        result.metadata.wall_time_s,
        result.se_trace.fixed_point
    );
    println!("{:>4} {:>5} {:>22} {:>22} {:>22}", "slot", "var", "P_MD@P_FA=0.01", "P_MD@0.05", "P_MD@0.1");
    for v in [Variant::Si, Variant::Nosi] {
        for j in 1..=spec.scenario.num_blocks {
            let Some(curve) = result.curve(j, v) else { continue };
            let cells: Vec<String> = [0.01, 0.05, 0.1]
                .iter()
                .map(|&t| match curve.pmd_at_pfa(t) {
                    Some((p, se)) => format!("{p:.4} ± {se:.4}"),
                    None => "-".into(),
                })
                .collect();
            println!("{j:>4} {:>5} {:>22} {:>22} {:>22}", v.as_str(), cells[0], cells[1], cells[2]);
        }
    }
    if let Some(dir) = args.next() {
        let files = emit_csv(&result, &PathBuf::from(dir))?;
        println!("wrote {}", files.roc.display());
    }
    Ok(())
}
