//! Compares the closed-form denoiser, likelihood ratio, threshold test and
//! derivative against brute-force evaluations on random instances.
//!
//! cargo run --release --example oracle_check -- [instances_per_cell]

use si_amp::oracle::run_checks;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(200), |s| s.parse())?;
    let r = run_checks(42, n);
    println!("{} instances over antennas {{1, 2, 4}} x SNR {{0.1, 1, 2500}}", r.instances);
    println!("denoiser      max rel err {:.2e}", r.denoiser_max_rel_err);
    println!("LLR           max abs err {:.2e}", r.llr_max_abs_err);
    println!("threshold     disagreements {}", r.detector_disagreements);
    println!("derivative    max rel err {:.2e}", r.derivative_max_rel_err);
    println!("{}", if r.passed() { "all within tolerance" } else { "FAILED" });
    Ok(())
}
