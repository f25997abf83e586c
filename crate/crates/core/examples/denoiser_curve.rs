//! Shrinkage of the MMSE denoiser for a single-antenna device, with and
//! without side information from the previous block.
//!
//! cargo run --example denoiser_curve -- [csv_path]

use si_amp::harness::curves::{denoiser_curve, linear_grid, zero_region_edge, CurveSetup, DEFAULT_PREV_ABS};
use si_amp::harness::output::{write_denoiser_curve, write_file};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = CurveSetup::default();
    let grid = linear_grid(0.0, 3e-5, 3001);
    let rows = denoiser_curve(&setup, &grid, &DEFAULT_PREV_ABS)?;

    println!("gain {:.0e}, tau {:.0e}, rate {}, persistence {}", setup.gain, setup.tau, setup.activity_rate, setup.persistence);
    let edge = |prev| zero_region_edge(&rows, prev, 1e-3).map_or("-".into(), |x| format!("{x:.3e}"));
    println!("output exceeds 1e-3 |x| from |x| = ...");
    println!("  without side information      {}", edge(None));
    for prev in DEFAULT_PREV_ABS {
        println!("  previous |x| = {prev:.0e}        {}", edge(Some(prev)));
    }

    println!("\n{:>10} {:>12} {:>12} {:>12}", "|x|", "no SI", "prev 1e-3", "prev 1e-7");
    let n = grid.len();
    for i in (0..n).step_by(250) {
        println!(
            "{:>10.2e} {:>12.3e} {:>12.3e} {:>12.3e}",
            grid[i],
            rows[i].output_abs,
            rows[n + i].output_abs,
            rows[2 * n + i].output_abs
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        write_file(path.as_ref(), |w| write_denoiser_curve(w, &rows))?;
        println!("wrote {path}");
    }
    Ok(())
}
