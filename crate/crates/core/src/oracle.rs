//! Brute-force Bayesian references for the denoiser and the activity test.
//!
//! Everything here is built from the four-case joint density
//! `p(x̃, x̃_prev, case) = prior(case) · ψ(x̃) · ψ(x̃_prev)` with explicit
//! complex-Gaussian log-densities, and never calls the closed-form
//! shrinkage or threshold code it is meant to check.

use std::f64::consts::PI;

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use rand::Rng;

use crate::denoiser::{self, DenoiserParams, SideInfo};
use crate::detector;
use crate::model::{norm_sqr, MarkovActivityModel};
use crate::numeric::log_sum_exp;
use crate::rng::{complex_gaussian, SeedTree};

/// `ln ψ_σ²(x)` for `x ~ CN(0, σ² I_M)`.
pub fn log_cn_pdf(x: ArrayView1<'_, Complex64>, variance: f64) -> f64 {
    let m = x.len() as f64;
    let energy: f64 = x.iter().map(|v| v.re * v.re + v.im * v.im).sum();
    -m * (PI * variance).ln() - energy / variance
}

/// Posterior probabilities of the four (previous, current) activity cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasePosterior {
    pub p_case: [f64; 4],
}

impl CasePosterior {
    pub fn current_active(&self) -> f64 {
        self.p_case[0] + self.p_case[2]
    }
}

/// Log joint densities `ln p(x̃, x̃_prev, case k)` for k = 1..4.
pub fn case_log_likelihoods(
    x: ArrayView1<'_, Complex64>,
    si: &SideInfo,
    params: &DenoiserParams,
) -> [f64; 4] {
    let g = params.gain;
    let t2 = params.tau * params.tau;
    let tp2 = si.tau_prev * si.tau_prev;
    let xp = si.pseudo_obs.view();

    let cur_active = log_cn_pdf(x, g + t2);
    let cur_idle = log_cn_pdf(x, t2);
    let prev_active = log_cn_pdf(xp, g + tp2);
    let prev_idle = log_cn_pdf(xp, tp2);

    let (l, a, b) = (
        params.activity.rate(),
        params.activity.persistence(),
        params.activity.reactivation(),
    );
    [
        (a * l).ln() + cur_active + prev_active,
        ((1.0 - a) * l).ln() + cur_idle + prev_active,
        (b * (1.0 - l)).ln() + cur_active + prev_idle,
        ((1.0 - b) * (1.0 - l)).ln() + cur_idle + prev_idle,
    ]
}

pub fn case_posterior(x: ArrayView1<'_, Complex64>, si: &SideInfo, params: &DenoiserParams) -> CasePosterior {
    let ll = case_log_likelihoods(x, si, params);
    let total = log_sum_exp(&ll);
    CasePosterior {
        p_case: ll.map(|v| (v - total).exp()),
    }
}

/// `E[x | x̃, x̃_prev]` as a mixture of per-case conditional means.
pub fn oracle_posterior_mean(
    x: ArrayView1<'_, Complex64>,
    si: &SideInfo,
    params: &DenoiserParams,
) -> Array1<Complex64> {
    let ll = case_log_likelihoods(x, si, params);
    let total = log_sum_exp(&ll);
    let active = log_sum_exp(&[ll[0], ll[2]]);
    let p_active = (active - total).exp();
    let lin = params.gain / (params.gain + params.tau * params.tau);
    x.mapv(|v| v * lin * p_active)
}

/// Two-component posterior mean for memoryless activity.
pub fn oracle_nosi_posterior_mean(x: ArrayView1<'_, Complex64>, params: &DenoiserParams) -> Array1<Complex64> {
    let t2 = params.tau * params.tau;
    let l = params.activity.rate();
    let on = l.ln() + log_cn_pdf(x, params.gain + t2);
    let off = (1.0 - l).ln() + log_cn_pdf(x, t2);
    let p_active = (on - log_sum_exp(&[on, off])).exp();
    let lin = params.gain / (params.gain + t2);
    x.mapv(|v| v * lin * p_active)
}

/// `ln p(x̃, x̃_prev | active) − ln p(x̃, x̃_prev | inactive)` from the
/// unsimplified case sums.
pub fn oracle_llr(x: ArrayView1<'_, Complex64>, si: Option<&SideInfo>, params: &DenoiserParams) -> f64 {
    let l = params.activity.rate();
    match si {
        Some(si) => {
            let ll = case_log_likelihoods(x, si, params);
            let on = log_sum_exp(&[ll[0], ll[2]]) - l.ln();
            let off = log_sum_exp(&[ll[1], ll[3]]) - (1.0 - l).ln();
            on - off
        }
        None => {
            let t2 = params.tau * params.tau;
            log_cn_pdf(x, params.gain + t2) - log_cn_pdf(x, t2)
        }
    }
}

/// Random instance drawn from the generative model of the pseudo-observations.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub params: DenoiserParams,
    pub x: Array1<Complex64>,
    pub si: SideInfo,
}

/// Draws `(x̃, x̃_prev)` from a random case with `γ/τ² = snr`, `τ = 1`, a
/// random persistence and a log-uniform previous noise level.
pub fn sample_instance<R: Rng + ?Sized>(rng: &mut R, antennas: usize, snr: f64) -> OracleInstance {
    let rate = rng.gen_range(0.02..0.5);
    let persistence = rng.gen_range(0.0..1.0);
    let activity = MarkovActivityModel::new(rate, persistence).expect("β ∈ [0,1] for λ ≤ 1/2");
    let tau = 1.0;
    let gain = snr;
    let tau_prev = (gain * 10f64.powf(rng.gen_range(-2.0..1.0))).sqrt();
    let priors = activity.case_priors();
    let u: f64 = rng.gen();
    let case = priors
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .position(|c| u < c)
        .unwrap_or(3);
    let (prev_on, cur_on) = [(true, true), (true, false), (false, true), (false, false)][case];
    let draw = |rng: &mut R, on: bool, noise: f64| -> Array1<Complex64> {
        Array1::from_shape_simple_fn(antennas, || {
            let h = if on { complex_gaussian(rng, gain) } else { Complex64::new(0.0, 0.0) };
            h + complex_gaussian(rng, noise)
        })
    };
    let x = draw(rng, cur_on, tau * tau);
    let xp = draw(rng, prev_on, tau_prev * tau_prev);
    OracleInstance {
        params: DenoiserParams::new(gain, tau, activity, antennas),
        x,
        si: SideInfo::new(xp, tau_prev).expect("finite draws"),
    }
}

pub fn relative_error(a: ArrayView1<'_, Complex64>, b: ArrayView1<'_, Complex64>) -> f64 {
    let diff: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - v).norm_sqr()).sum();
    let scale = norm_sqr(a).max(norm_sqr(b));
    if scale == 0.0 {
        diff.sqrt()
    } else {
        (diff / scale).sqrt()
    }
}

/// Summary of [`run_checks`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub instances: usize,
    pub denoiser_max_rel_err: f64,
    pub llr_max_abs_err: f64,
    pub detector_disagreements: usize,
    pub derivative_max_rel_err: f64,
}

impl OracleReport {
    pub const DENOISER_TOL: f64 = 1e-9;
    pub const LLR_TOL: f64 = 1e-10;
    pub const DERIVATIVE_TOL: f64 = 1e-6;
    pub const BOUNDARY_BAND: f64 = 1e-9;

    pub fn passed(&self) -> bool {
        self.denoiser_max_rel_err < Self::DENOISER_TOL
            && self.llr_max_abs_err < Self::LLR_TOL
            && self.detector_disagreements == 0
            && self.derivative_max_rel_err < Self::DERIVATIVE_TOL
    }
}

/// Central finite-difference estimate of the averaged Wirtinger derivative.
pub fn finite_difference_derivative(
    x: ArrayView1<'_, Complex64>,
    si: Option<&SideInfo>,
    params: &DenoiserParams,
    step: f64,
) -> f64 {
    let m = x.len();
    let eval = |xx: &Array1<Complex64>, k: usize| denoiser::denoise_si(xx.view(), si, params)[k];
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..m {
        let mut plus = x.to_owned();
        let mut minus = x.to_owned();
        plus[k].re += step;
        minus[k].re -= step;
        let d_re = (eval(&plus, k) - eval(&minus, k)) / (2.0 * step);
        let mut plus = x.to_owned();
        let mut minus = x.to_owned();
        plus[k].im += step;
        minus[k].im -= step;
        let d_im = (eval(&plus, k) - eval(&minus, k)) / (2.0 * step);
        // ∂/∂z = (∂/∂a − i ∂/∂b) / 2
        acc += (d_re - Complex64::i() * d_im) * 0.5;
    }
    (acc / m as f64).re
}

/// Runs the closed-form vs oracle comparisons on `count` random instances per
/// (M, γ/τ²) cell and reports the worst errors.
pub fn run_checks(seed: u64, count: usize) -> OracleReport {
    let seeds = SeedTree::new(seed);
    let mut report = OracleReport {
        instances: 0,
        denoiser_max_rel_err: 0.0,
        llr_max_abs_err: 0.0,
        detector_disagreements: 0,
        derivative_max_rel_err: 0.0,
    };
    for (mi, &m) in [1usize, 2, 4].iter().enumerate() {
        for (si_idx, &snr) in [0.1, 1.0, 2500.0].iter().enumerate() {
            let mut rng = seeds.stream("oracle-check", &[mi as u64, si_idx as u64]);
            for _ in 0..count {
                let inst = sample_instance(&mut rng, m, snr);
                let p = &inst.params;
                let fast = denoiser::denoise_si(inst.x.view(), Some(&inst.si), p);
                let slow = oracle_posterior_mean(inst.x.view(), &inst.si, p);
                report.denoiser_max_rel_err =
                    report.denoiser_max_rel_err.max(relative_error(fast.view(), slow.view()));

                let llr = detector::llr_value(inst.x.view(), Some(&inst.si), p);
                let llr_ref = oracle_llr(inst.x.view(), Some(&inst.si), p);
                report.llr_max_abs_err = report.llr_max_abs_err.max((llr - llr_ref).abs());

                let l: f64 = rng.gen_range(-10.0..10.0);
                if (llr_ref - l).abs() >= OracleReport::BOUNDARY_BAND {
                    let thr = detector::threshold_si(l, Some(&inst.si), p);
                    if detector::decide(norm_sqr(inst.x.view()), thr) != (llr_ref > l) {
                        report.detector_disagreements += 1;
                    }
                }

                let analytic = denoiser::denoiser_derivative_avg(inst.x.view(), Some(&inst.si), p);
                let fd = finite_difference_derivative(inst.x.view(), Some(&inst.si), p, 1e-6 * p.tau);
                let rel = (analytic - fd).abs() / analytic.abs().max(f64::MIN_POSITIVE);
                report.derivative_max_rel_err = report.derivative_max_rel_err.max(rel);
                report.instances += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_pdf_matches_direct_formula() {
        let x = array![c(0.3, -0.1), c(1.0, 0.5)];
        let var = 0.7f64;
        let direct = (1.0 / (PI * var).powi(2)) * (-(0.09 + 0.01 + 1.0 + 0.25) / var).exp();
        assert!((log_cn_pdf(x.view(), var) - direct.ln()).abs() < 1e-14);
    }

    #[test]
    fn absorbing_chain_rules_out_switching_cases() {
        let model = MarkovActivityModel::new(0.2, 1.0).unwrap();
        let p = DenoiserParams::new(1.0, 1.0, model, 1);
        let si = SideInfo::new(array![c(0.2, 0.1)], 1.0).unwrap();
        let ll = case_log_likelihoods(array![c(0.5, 0.0)].view(), &si, &p);
        assert_eq!(ll[1], f64::NEG_INFINITY);
        assert_eq!(ll[2], f64::NEG_INFINITY);
        assert!(ll[0].is_finite() && ll[3].is_finite());
    }

    #[test]
    fn identical_likelihoods_give_prior() {
        let model = MarkovActivityModel::new(0.1, 0.46).unwrap();
        let p = DenoiserParams::new(0.0, 1.0, model, 2);
        let si = SideInfo::new(array![c(0.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        let post = case_posterior(array![c(0.0, 0.0), c(0.0, 0.0)].view(), &si, &p);
        for (a, b) in post.p_case.iter().zip(model.case_priors()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalisation_matches_direct_total_density() {
        // Moderate values so the linear-domain sum does not underflow.
        let mut rng = SeedTree::new(31).stream("totalp", &[]);
        for _ in 0..500 {
            let inst = sample_instance(&mut rng, 2, 1.0);
            let p = &inst.params;
            let ll = case_log_likelihoods(inst.x.view(), &inst.si, p);

            let psi = |x: ArrayView1<'_, Complex64>, var: f64| {
                let e: f64 = x.iter().map(|v| v.norm_sqr()).sum();
                (-e / var).exp() / (PI * var).powi(x.len() as i32)
            };
            let (l, a, b) = (p.activity.rate(), p.activity.persistence(), p.activity.reactivation());
            let (g, t2, tp2) = (p.gain, p.tau * p.tau, inst.si.tau_prev.powi(2));
            let xp = inst.si.pseudo_obs.view();
            let x = inst.x.view();
            let total = a * l * psi(x, g + t2) * psi(xp, g + tp2)
                + (1.0 - a) * l * psi(x, t2) * psi(xp, g + tp2)
                + b * (1.0 - l) * psi(x, g + t2) * psi(xp, tp2)
                + (1.0 - b) * (1.0 - l) * psi(x, t2) * psi(xp, tp2);
            assert!((log_sum_exp(&ll) - total.ln()).abs() < 1e-12);
            let post = case_posterior(x, &inst.si, p);
            assert!((post.p_case.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(post.p_case.iter().all(|&q| q >= 0.0));
        }
    }

    #[test]
    fn independent_activity_oracle_factorises() {
        let model = MarkovActivityModel::independent(0.15).unwrap();
        let mut rng = SeedTree::new(32).stream("fact", &[]);
        for _ in 0..200 {
            let p = DenoiserParams::new(3.0, 1.0, model, 2);
            let x = Array1::from_shape_simple_fn(2, || complex_gaussian(&mut rng, 2.0));
            let si = SideInfo::new(Array1::from_shape_simple_fn(2, || complex_gaussian(&mut rng, 2.0)), 0.8).unwrap();
            let four = oracle_posterior_mean(x.view(), &si, &p);
            let two = oracle_nosi_posterior_mean(x.view(), &p);
            assert!(relative_error(four.view(), two.view()) < 1e-13);
        }
    }

    #[test]
    fn zero_input_oracle_is_zero() {
        let model = MarkovActivityModel::new(0.1, 0.91).unwrap();
        let p = DenoiserParams::new(1e-8, 2e-6, model, 1);
        let si = SideInfo::new(array![c(1e-3, 0.0)], 2e-6).unwrap();
        assert_eq!(oracle_posterior_mean(array![c(0.0, 0.0)].view(), &si, &p), array![c(0.0, 0.0)]);
    }

    #[test]
    fn small_check_suite_passes() {
        let report = run_checks(5, 30);
        assert_eq!(report.instances, 270);
        assert!(report.passed(), "{report:?}");
    }
}
