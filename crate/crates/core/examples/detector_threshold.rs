//! Energy threshold of the activity test as a function of how strong the
//! device looked in the previous block.
//!
//! cargo run --example detector_threshold -- [l]

use si_amp::harness::curves::{log_grid, threshold_curve, CurveSetup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let l: f64 = std::env::args().nth(1).map_or(Ok(0.0), |s| s.parse())?;
    let setup = CurveSetup::default();
    let rows = threshold_curve(&setup, l, &log_grid(1e-8, 1e-3, 21))?;
    let (lo, hi) = setup.threshold_limits(l)?;

    println!("l = {l}; threshold on |x|^2 without side information: {:.4e}", rows[0].threshold_nosi);
    println!("limits with side information: [{lo:.4e}, {hi:.4e}]\n");
    println!("{:>12} {:>14}", "prev |x|", "threshold");
    for r in &rows {
        println!("{:>12.3e} {:>14.4e}", r.x_prev_abs, r.threshold_si);
    }
    Ok(())
}
