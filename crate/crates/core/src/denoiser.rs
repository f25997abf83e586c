//! Row-wise MMSE denoiser for AMP pseudo-observations, with and without the
//! previous block's pseudo-observation as side information.
//!
//! Under the four-case Bernoulli–Gaussian model the posterior mean is a real
//! shrinkage of the input:
//!
//! ```text
//! η(x̃) = γ/(γ+τ²) · x̃ / (1 + (1−λ)/λ · μ(x̃) · w_si)
//! μ(x̃) = ((τ²+γ)/τ²)^M · exp(−Δ‖x̃‖²),   Δ = 1/τ² − 1/(τ²+γ)
//! w_si  = (β + (1−β)μ_prev) / (α + (1−α)μ_prev)
//! ```
//!
//! `μ` overflows doubles easily (γ/τ² in the thousands), so everything is kept
//! in the log domain.

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{norm_sqr, MarkovActivityModel};
use crate::numeric::{log_add_exp, logistic_neg};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserParams {
    /// γ_n
    pub gain: f64,
    /// τ_t, standard deviation of the pseudo-observation noise per entry.
    pub tau: f64,
    pub activity: MarkovActivityModel,
    pub antennas: usize,
}

impl DenoiserParams {
    pub fn new(gain: f64, tau: f64, activity: MarkovActivityModel, antennas: usize) -> Self {
        Self {
            gain,
            tau,
            activity,
            antennas,
        }
    }

    pub fn tau_sq(&self) -> f64 {
        self.tau * self.tau
    }

    /// Δ = τ⁻² − (τ² + γ)⁻¹
    pub fn delta(&self) -> f64 {
        delta(self.gain, self.tau_sq())
    }

    /// γ / (γ + τ²)
    pub fn linear_gain(&self) -> f64 {
        self.gain / (self.gain + self.tau_sq())
    }

    fn log_prior_odds(&self) -> f64 {
        let l = self.activity.rate();
        ((1.0 - l) / l).ln()
    }
}

fn delta(gain: f64, tau_sq: f64) -> f64 {
    gain / (tau_sq * (tau_sq + gain))
}

/// Previous block's converged pseudo-observation for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    pub pseudo_obs: Array1<Complex64>,
    pub tau_prev: f64,
}

impl SideInfo {
    pub fn new(pseudo_obs: Array1<Complex64>, tau_prev: f64) -> Result<Self> {
        if !(tau_prev > 0.0) || !tau_prev.is_finite() {
            return Err(Error::InvalidSideInfo(format!(
                "previous pseudo-noise level must be positive and finite, got {tau_prev}"
            )));
        }
        if pseudo_obs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSideInfo(
                "previous pseudo-observation has non-finite entries".into(),
            ));
        }
        Ok(Self { pseudo_obs, tau_prev })
    }

    pub fn energy(&self) -> f64 {
        norm_sqr(self.pseudo_obs.view())
    }
}

/// `ln μ` given `‖x̃‖²`.
#[inline]
pub fn log_mu_from_energy(energy: f64, gain: f64, tau_sq: f64, antennas: usize) -> f64 {
    antennas as f64 * (gain / tau_sq).ln_1p() - delta(gain, tau_sq) * energy
}

/// `ln μ = M ln((τ²+γ)/τ²) − Δ‖x̃‖²`.
pub fn log_mu(x: ArrayView1<'_, Complex64>, params: &DenoiserParams) -> f64 {
    log_mu_from_energy(norm_sqr(x), params.gain, params.tau_sq(), params.antennas)
}

/// `ln[(β + (1−β)μ_prev) / (α + (1−α)μ_prev)]` with `μ_prev` taken at the
/// side information's pseudo-observation and noise level.
pub fn log_si_weight(si: &SideInfo, params: &DenoiserParams) -> f64 {
    log_si_weight_from_energy(si.energy(), si.tau_prev * si.tau_prev, params)
}

/// [`log_si_weight`] given `‖x̃_prev‖²` and `τ_prev²`.
pub fn log_si_weight_from_energy(energy_prev: f64, tau_prev_sq: f64, params: &DenoiserParams) -> f64 {
    let log_mu_prev = log_mu_from_energy(energy_prev, params.gain, tau_prev_sq, params.antennas);
    let a = params.activity.persistence();
    let b = params.activity.reactivation();
    log_affine(b, log_mu_prev) - log_affine(a, log_mu_prev)
}

/// `ln(p + (1−p) e^c)`
#[inline]
fn log_affine(p: f64, c: f64) -> f64 {
    log_add_exp(p.ln(), (1.0 - p).ln() + c)
}

pub fn si_weight(si: &SideInfo, params: &DenoiserParams) -> f64 {
    log_si_weight(si, params).exp()
}

/// Side-information term as it enters the shrinkage logit; zero without SI.
pub fn side_info_logit(si: Option<&SideInfo>, params: &DenoiserParams) -> f64 {
    si.map_or(0.0, |si| log_si_weight(si, params))
}

/// Logit of the shrinkage: `w = 1/(1 + e^z)`.
#[inline]
fn shrinkage_logit(energy: f64, si_logit: f64, params: &DenoiserParams) -> f64 {
    params.log_prior_odds()
        + log_mu_from_energy(energy, params.gain, params.tau_sq(), params.antennas)
        + si_logit
}

/// Shrinkage factor and averaged derivative for an input of energy `‖x̃‖²`,
/// given the precomputed side-information logit.
#[inline]
pub fn shrinkage_with_derivative(energy: f64, si_logit: f64, params: &DenoiserParams) -> (f64, f64) {
    let z = shrinkage_logit(energy, si_logit, params);
    let w = logistic_neg(z);
    let c = params.linear_gain();
    let deriv = c * (w + energy / params.antennas as f64 * params.delta() * w * logistic_neg(-z));
    (c * w, deriv)
}

/// Real factor `c` with `η(x̃) = c·x̃`; always in `[0, γ/(γ+τ²)]`.
pub fn shrinkage(x: ArrayView1<'_, Complex64>, si: Option<&SideInfo>, params: &DenoiserParams) -> f64 {
    shrinkage_with_derivative(norm_sqr(x), side_info_logit(si, params), params).0
}

/// SI-aided MMSE denoiser; without side information it is [`denoise_nosi`].
pub fn denoise_si(
    x: ArrayView1<'_, Complex64>,
    si: Option<&SideInfo>,
    params: &DenoiserParams,
) -> Array1<Complex64> {
    let c = shrinkage(x, si, params);
    x.mapv(|v| v * c)
}

/// MMSE denoiser for memoryless activity.
pub fn denoise_nosi(x: ArrayView1<'_, Complex64>, params: &DenoiserParams) -> Array1<Complex64> {
    denoise_si(x, None, params)
}

/// Entry-averaged Wirtinger derivative `(1/M) Σ_m ∂η_m/∂x̃_m`.
///
/// With `η = c·w(‖x̃‖²)·x̃` and `w = 1/(1+e^z)`, `∂w/∂‖x̃‖² = Δ·w(1−w)`, so the
/// diagonal terms are `c(w + |x̃_m|² Δ w(1−w))`. The result is real.
pub fn denoiser_derivative_avg(
    x: ArrayView1<'_, Complex64>,
    si: Option<&SideInfo>,
    params: &DenoiserParams,
) -> f64 {
    shrinkage_with_derivative(norm_sqr(x), side_info_logit(si, params), params).1
}

/// Denoised row and its averaged derivative in one pass.
pub fn denoise_with_derivative(
    x: ArrayView1<'_, Complex64>,
    si: Option<&SideInfo>,
    params: &DenoiserParams,
) -> (Array1<Complex64>, f64) {
    let (scale, deriv) = shrinkage_with_derivative(norm_sqr(x), side_info_logit(si, params), params);
    (x.mapv(|v| v * scale), deriv)
}
