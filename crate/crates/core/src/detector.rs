//! Likelihood-ratio activity test on converged pseudo-observations, its
//! equivalent per-device energy threshold, and detection metrics / ROC sweeps.

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::denoiser::{log_mu, log_si_weight, DenoiserParams, SideInfo};
use crate::model::{norm_sqr, BlockTruth};

/// `ln p(x̃, x̃_prev | active) / p(x̃, x̃_prev | inactive)`.
pub fn llr_value(x: ArrayView1<'_, Complex64>, si: Option<&SideInfo>, params: &DenoiserParams) -> f64 {
    let current = -log_mu(x, params);
    match si {
        Some(si) => current - log_si_weight(si, params),
        None => current,
    }
}

/// The `l`-independent parts of the energy threshold `(l + offset) / Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParts {
    pub offset: f64,
    pub delta: f64,
}

impl ThresholdParts {
    pub fn new(si: Option<&SideInfo>, params: &DenoiserParams) -> Self {
        let base = params.antennas as f64 * (params.gain / params.tau_sq()).ln_1p();
        let offset = match si {
            Some(si) => base + log_si_weight(si, params),
            None => base,
        };
        Self {
            offset,
            delta: params.delta(),
        }
    }

    #[inline]
    pub fn threshold(&self, l: f64) -> f64 {
        (l + self.offset) / self.delta
    }
}

/// Energy threshold equivalent to `LLR > l`, using side information when given.
pub fn threshold_si(l: f64, si: Option<&SideInfo>, params: &DenoiserParams) -> f64 {
    ThresholdParts::new(si, params).threshold(l)
}

/// Energy threshold without side information.
pub fn threshold_nosi(l: f64, params: &DenoiserParams) -> f64 {
    threshold_si(l, None, params)
}

/// Active iff the energy strictly exceeds the threshold.
#[inline]
pub fn decide(energy: f64, threshold: f64) -> bool {
    energy > threshold
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionDecision {
    pub device: usize,
    pub llr: f64,
    pub energy: f64,
    pub threshold: f64,
    pub decision: bool,
}

/// What the detector needs to know about one device after AMP converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorStatistic {
    pub energy: f64,
    pub parts: ThresholdParts,
    pub active: bool,
}

impl DetectorStatistic {
    #[inline]
    pub fn decide(&self, l: f64) -> bool {
        decide(self.energy, self.parts.threshold(l))
    }
}

/// Per-device statistics for one block.
///
/// `pseudo_obs` rows are the converged pseudo-observations, `tau` the
/// converged noise level, `side_info` the per-device SI used in that block.
pub fn block_statistics(
    pseudo_obs: &Array2<Complex64>,
    params: impl Fn(usize) -> DenoiserParams,
    side_info: Option<&[SideInfo]>,
    truth: &BlockTruth,
) -> Vec<DetectorStatistic> {
    pseudo_obs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(n, row)| {
            let p = params(n);
            DetectorStatistic {
                energy: norm_sqr(row),
                parts: ThresholdParts::new(side_info.map(|s| &s[n]), &p),
                active: truth.activity[n],
            }
        })
        .collect()
}

pub fn detect(
    pseudo_obs: &Array2<Complex64>,
    params: impl Fn(usize) -> DenoiserParams,
    side_info: Option<&[SideInfo]>,
    l: f64,
) -> Vec<DetectionDecision> {
    pseudo_obs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(n, row)| {
            let p = params(n);
            let si = side_info.map(|s| &s[n]);
            let energy = norm_sqr(row);
            let threshold = threshold_si(l, si, &p);
            DetectionDecision {
                device: n,
                llr: llr_value(row, si, &p),
                energy,
                threshold,
                decision: decide(energy, threshold),
            }
        })
        .collect()
}

/// Error counts for one block. Rates are `None` when their denominator is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub false_alarms: u64,
    pub inactive: u64,
    pub missed: u64,
    pub active: u64,
    pub sq_error_active: f64,
    pub energy_active: f64,
}

impl DetectionMetrics {
    pub fn p_fa(&self) -> Option<f64> {
        (self.inactive > 0).then(|| self.false_alarms as f64 / self.inactive as f64)
    }

    pub fn p_md(&self) -> Option<f64> {
        (self.active > 0).then(|| self.missed as f64 / self.active as f64)
    }

    pub fn nmse(&self) -> Option<f64> {
        (self.energy_active > 0.0).then(|| self.sq_error_active / self.energy_active)
    }

    /// Names of the rates whose denominators are empty.
    pub fn empty_denominators(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.inactive == 0 {
            v.push("P_FA");
        }
        if self.active == 0 {
            v.push("P_MD");
        }
        v
    }

    pub fn merge(&mut self, other: &Self) {
        self.false_alarms += other.false_alarms;
        self.inactive += other.inactive;
        self.missed += other.missed;
        self.active += other.active;
        self.sq_error_active += other.sq_error_active;
        self.energy_active += other.energy_active;
    }
}

pub fn compute_metrics(decisions: &[bool], truth: &BlockTruth, estimate: &Array2<Complex64>) -> DetectionMetrics {
    assert_eq!(decisions.len(), truth.activity.len(), "decision/truth length");
    let mut m = DetectionMetrics::default();
    for (n, (&d, &a)) in decisions.iter().zip(&truth.activity).enumerate() {
        if a {
            m.active += 1;
            m.missed += u64::from(!d);
            let x = truth.signal.row(n);
            m.energy_active += norm_sqr(x);
            m.sq_error_active += estimate
                .row(n)
                .iter()
                .zip(x.iter())
                .map(|(e, t)| (e - t).norm_sqr())
                .sum::<f64>();
        } else {
            m.inactive += 1;
            m.false_alarms += u64::from(d);
        }
    }
    m
}

/// Error counts of one block at every grid value of `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCounts {
    pub false_alarms: Vec<u64>,
    pub missed: Vec<u64>,
    pub inactive: u64,
    pub active: u64,
}

impl RocCounts {
    pub fn zeros(len: usize) -> Self {
        Self {
            false_alarms: vec![0; len],
            missed: vec![0; len],
            inactive: 0,
            active: 0,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.false_alarms.iter_mut().zip(&other.false_alarms) {
            *a += b;
        }
        for (a, b) in self.missed.iter_mut().zip(&other.missed) {
            *a += b;
        }
        self.inactive += other.inactive;
        self.active += other.active;
    }
}

/// Counts for a sorted `l_grid`. Each device's decision is monotone in `l`,
/// so a binary search finds the last grid point at which it is still
/// declared active; the decision at every grid point is the exact threshold
/// comparison.
pub fn roc_counts(stats: &[DetectorStatistic], l_grid: &[f64]) -> RocCounts {
    debug_assert!(l_grid.windows(2).all(|w| w[0] <= w[1]), "l_grid must be sorted");
    let k = l_grid.len();
    // active_upto[i]: devices active for grid indices < i
    let mut fa_hist = vec![0u64; k + 1];
    let mut det_hist = vec![0u64; k + 1];
    let mut counts = RocCounts::zeros(k);
    for s in stats {
        let detected_for = l_grid.partition_point(|&l| s.decide(l));
        if s.active {
            counts.active += 1;
            det_hist[detected_for] += 1;
        } else {
            counts.inactive += 1;
            fa_hist[detected_for] += 1;
        }
    }
    // devices with detected_for > i are declared active at grid index i
    let mut fa_above = 0u64;
    let mut det_above = 0u64;
    for i in (0..k).rev() {
        fa_above += fa_hist[i + 1];
        det_above += det_hist[i + 1];
        counts.false_alarms[i] = fa_above;
        counts.missed[i] = counts.active - det_above;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub l: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub se_p_fa: f64,
    pub se_p_md: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub trials: usize,
}

/// Pooled rate and its standard error from per-trial variation
/// (ratio estimator).
fn pooled_rate(errors: impl Iterator<Item = (u64, u64)> + Clone) -> (f64, f64) {
    let t = errors.clone().count();
    let (e_sum, n_sum) = errors
        .clone()
        .fold((0u64, 0u64), |(a, b), (e, n)| (a + e, b + n));
    if n_sum == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = e_sum as f64 / n_sum as f64;
    if t < 2 {
        return (p, f64::NAN);
    }
    let ss: f64 = errors
        .map(|(e, n)| {
            let r = e as f64 - p * n as f64;
            r * r
        })
        .sum();
    let se = (ss * t as f64 / (t as f64 - 1.0)).sqrt() / n_sum as f64;
    (p, se)
}

/// Pools per-trial counts of one slot into a curve.
pub fn aggregate_roc(per_trial: &[RocCounts], l_grid: &[f64]) -> RocCurve {
    let points = l_grid
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let (p_fa, se_p_fa) = pooled_rate(per_trial.iter().map(|c| (c.false_alarms[i], c.inactive)));
            let (p_md, se_p_md) = pooled_rate(per_trial.iter().map(|c| (c.missed[i], c.active)));
            RocPoint {
                l,
                p_fa,
                p_md,
                se_p_fa,
                se_p_md,
            }
        })
        .collect();
    RocCurve {
        points,
        trials: per_trial.len(),
    }
}

/// ROC curve for one slot from the per-trial detector statistics.
pub fn roc_sweep(trials: &[&[DetectorStatistic]], l_grid: &[f64]) -> RocCurve {
    let counts: Vec<RocCounts> = trials.iter().map(|s| roc_counts(s, l_grid)).collect();
    aggregate_roc(&counts, l_grid)
}

impl RocCurve {
    /// Missed-detection probability and its standard error at a false-alarm
    /// level, linearly interpolated between grid points.
    pub fn pmd_at_pfa(&self, target: f64) -> Option<(f64, f64)> {
        let pts = &self.points;
        for w in pts.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.p_fa >= target && target >= b.p_fa {
                if a.p_fa == b.p_fa {
                    return Some((a.p_md, a.se_p_md));
                }
                let f = (a.p_fa - target) / (a.p_fa - b.p_fa);
                return Some((
                    a.p_md + f * (b.p_md - a.p_md),
                    a.se_p_md + f * (b.se_p_md - a.se_p_md),
                ));
            }
        }
        None
    }

    /// `P_MD` non-increasing as `P_FA` increases.
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].p_fa >= w[1].p_fa && w[0].p_md <= w[1].p_md)
    }
}
