//! Scalar response curves of the denoiser and of the detector threshold.

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amp::Variant;
use crate::denoiser::{shrinkage, DenoiserParams, SideInfo};
use crate::detector::{threshold_nosi, threshold_si};
use crate::error::Result;
use crate::model::MarkovActivityModel;

/// Single-antenna setting in which both curves are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSetup {
    pub gain: f64,
    pub tau: f64,
    pub tau_prev: f64,
    pub activity_rate: f64,
    pub persistence: f64,
}

impl Default for CurveSetup {
    fn default() -> Self {
        Self {
            gain: 1e-8,
            tau: 2e-6,
            tau_prev: 2e-6,
            activity_rate: 0.1,
            persistence: 0.91,
        }
    }
}

impl CurveSetup {
    pub fn params(&self) -> Result<DenoiserParams> {
        let activity = MarkovActivityModel::new(self.activity_rate, self.persistence)?;
        Ok(DenoiserParams::new(self.gain, self.tau, activity, 1))
    }

    pub fn side_info(&self, x_prev_abs: f64) -> Result<SideInfo> {
        SideInfo::new(scalar(x_prev_abs), self.tau_prev)
    }

    /// Energy thresholds at `l` in the limits `|x̃_prev| → ∞` (lower) and
    /// `|x̃_prev| → 0` (upper).
    pub fn threshold_limits(&self, l: f64) -> Result<(f64, f64)> {
        let p = self.params()?;
        let (alpha, beta) = (p.activity.persistence(), p.activity.reactivation());
        let base = l + (p.gain / p.tau_sq()).ln_1p();
        let mu0 = 1.0 + p.gain / (self.tau_prev * self.tau_prev);
        let lo = (base + (beta / alpha).ln()) / p.delta();
        let hi = (base + ((beta + (1.0 - beta) * mu0) / (alpha + (1.0 - alpha) * mu0)).ln()) / p.delta();
        Ok((lo, hi))
    }
}

fn scalar(v: f64) -> Array1<Complex64> {
    Array1::from_elem(1, Complex64::new(v, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserCurveRow {
    pub variant: Variant,
    /// `None` for the no-SI curve.
    pub x_prev_abs: Option<f64>,
    pub x_abs: f64,
    pub output_abs: f64,
}

/// `|η(x̃)|` over `x_grid`: one no-SI curve and one SI curve per entry of
/// `prev_abs`.
pub fn denoiser_curve(setup: &CurveSetup, x_grid: &[f64], prev_abs: &[f64]) -> Result<Vec<DenoiserCurveRow>> {
    let p = setup.params()?;
    let mut rows = Vec::with_capacity(x_grid.len() * (prev_abs.len() + 1));
    for &x in x_grid {
        let v = scalar(x);
        rows.push(DenoiserCurveRow {
            variant: Variant::Nosi,
            x_prev_abs: None,
            x_abs: x,
            output_abs: shrinkage(v.view(), None, &p) * x,
        });
    }
    for &prev in prev_abs {
        let si = setup.side_info(prev)?;
        for &x in x_grid {
            let v = scalar(x);
            rows.push(DenoiserCurveRow {
                variant: Variant::Si,
                x_prev_abs: Some(prev),
                x_abs: x,
                output_abs: shrinkage(v.view(), Some(&si), &p) * x,
            });
        }
    }
    Ok(rows)
}

/// Smallest grid point whose output exceeds `ratio · |x̃|`.
pub fn zero_region_edge(rows: &[DenoiserCurveRow], x_prev_abs: Option<f64>, ratio: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.x_prev_abs == x_prev_abs && r.x_abs > 0.0)
        .filter(|r| r.output_abs > ratio * r.x_abs)
        .map(|r| r.x_abs)
        .reduce(f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurveRow {
    pub x_prev_abs: f64,
    pub threshold_si: f64,
    pub threshold_nosi: f64,
}

pub fn threshold_curve(setup: &CurveSetup, l: f64, prev_grid: &[f64]) -> Result<Vec<ThresholdCurveRow>> {
    let p = setup.params()?;
    let nosi = threshold_nosi(l, &p);
    prev_grid
        .iter()
        .map(|&prev| {
            let si = setup.side_info(prev)?;
            Ok(ThresholdCurveRow {
                x_prev_abs: prev,
                threshold_si: threshold_si(l, Some(&si), &p),
                threshold_nosi: nosi,
            })
        })
        .collect()
}

pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    linear_grid(lo.log10(), hi.log10(), points)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// `|x̃|` grid used for the denoiser curves.
pub fn default_denoiser_grid() -> Vec<f64> {
    linear_grid(0.0, 3e-5, 3001)
}

/// Previous-block magnitudes contrasted in the denoiser curves.
pub const DEFAULT_PREV_ABS: [f64; 2] = [1e-3, 1e-7];

/// `|x̃_prev|` grid used for the threshold curve.
pub fn default_threshold_grid() -> Vec<f64> {
    log_grid(1e-8, 1e-3, 501)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let g = log_grid(1e-8, 1e-3, 6);
        assert!((g[0] - 1e-8).abs() < 1e-20 && (g[5] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn denoiser_curve_never_expands() {
        let setup = CurveSetup::default();
        let rows = denoiser_curve(&setup, &default_denoiser_grid(), &DEFAULT_PREV_ABS).unwrap();
        assert_eq!(rows.len(), 3 * 3001);
        let c = setup.gain / (setup.gain + setup.tau * setup.tau);
        assert!(rows.iter().all(|r| r.output_abs >= 0.0 && r.output_abs <= c * r.x_abs * (1.0 + 1e-15)));
    }

    #[test]
    fn threshold_limits_ordered() {
        let setup = CurveSetup::default();
        let (lo, hi) = setup.threshold_limits(0.0).unwrap();
        let p = setup.params().unwrap();
        let nosi = threshold_nosi(0.0, &p);
        assert!(lo < nosi && nosi < hi);
    }
}
