//! Monte Carlo state evolution for the scalar pseudo-noise level:
//!
//! ```text
//! τ²_{t+1} = σ_z² + (N/L) · (1/M) · E‖η(X + τ_t V, X̃_prev) − X‖²
//! ```
//!
//! The expectation is taken over the four-case activity model, Rayleigh
//! channels with γ drawn from the scenario's gains, and `X̃_prev = X_prev +
//! τ_prev V'`. One sample set is drawn per trace and reused at every step
//! (common random numbers), so the recursion is a deterministic map and
//! converges to a genuine fixed point.

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::Variant;
use crate::denoiser::{log_si_weight_from_energy, shrinkage_with_derivative, DenoiserParams};
use crate::error::{Error, Result};
use crate::model::{MarkovActivityModel, ScenarioConfig};
use crate::rng::{complex_gaussian, SeedTree};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    pub noise_var: f64,
    /// N / L
    pub load: f64,
    pub antennas: usize,
    pub activity: MarkovActivityModel,
    /// `(γ, weight)` pairs; weights sum to one.
    pub gains: Vec<(f64, f64)>,
    pub sample_count: usize,
    /// Previous block's converged τ (not τ²), needed for the SI denoiser.
    pub tau_prev: Option<f64>,
}

impl SeParams {
    /// γ distribution = empirical distribution of the scenario's gains.
    pub fn from_scenario(config: &ScenarioConfig, sample_count: usize) -> Result<Self> {
        config.validate()?;
        let w = 1.0 / config.path_losses.len() as f64;
        Ok(Self {
            noise_var: config.noise_variance,
            load: config.load(),
            antennas: config.num_antennas,
            activity: config.activity_model()?,
            gains: config.path_losses.iter().map(|&g| (g, w)).collect(),
            sample_count,
            tau_prev: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.gains.is_empty() {
            v.push("gain distribution is empty".to_string());
        }
        let total: f64 = self.gains.iter().map(|g| g.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            v.push(format!("gain weights sum to {total}, expected 1"));
        }
        if self.gains.iter().any(|&(g, w)| !(g > 0.0) || !(w >= 0.0)) {
            v.push("gains must be positive and weights nonnegative".into());
        }
        if self.sample_count == 0 {
            v.push("sample_count must be positive".into());
        }
        if self.antennas == 0 {
            v.push("antennas must be positive".into());
        }
        if !(self.noise_var > 0.0) || !(self.load > 0.0) {
            v.push("noise_var and load must be positive".into());
        }
        if let Some(t) = self.tau_prev {
            if !(t > 0.0) || !t.is_finite() {
                v.push(format!("tau_prev must be positive and finite, got {t}"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// `(1/M) E‖X‖² = λ E[γ]`
    pub fn signal_power(&self) -> f64 {
        self.activity.rate() * self.gains.iter().map(|&(g, w)| g * w).sum::<f64>()
    }
}

/// Denoiser used inside the expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeDenoiser {
    Mmse(Variant),
    /// `η = X` (test hook)
    Perfect,
    /// `η = 0` (test hook)
    Zero,
}

/// A fixed set of draws of `(γ, X, V, side-information logit)`.
#[derive(Debug, Clone)]
pub struct SeSamples {
    antennas: usize,
    gains: Vec<f64>,
    signal: Vec<Complex64>,
    noise: Vec<Complex64>,
    si_logit: Vec<f64>,
}

impl SeSamples {
    pub fn draw(params: &SeParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let m = params.antennas;
        let weights = WeightedIndex::new(params.gains.iter().map(|g| g.1))
            .map_err(|e| Error::InvalidConfig(format!("gain weights: {e}")))?;
        let priors = params.activity.case_priors();
        let tree = SeedTree::new(seed);
        let chunks = params.sample_count.div_ceil(CHUNK);

        let parts: Vec<Self> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(params.sample_count - c * CHUNK);
                let mut rng = tree.stream("se-samples", &[c as u64]);
                let mut part = Self::with_capacity(m, len);
                for _ in 0..len {
                    let gain = params.gains[weights.sample(&mut rng)].0;
                    let u: f64 = rng.gen();
                    let case = if u < priors[0] {
                        0
                    } else if u < priors[0] + priors[1] {
                        1
                    } else if u < priors[0] + priors[1] + priors[2] {
                        2
                    } else {
                        3
                    };
                    let (prev_on, cur_on) = [(true, true), (true, false), (false, true), (false, false)][case];
                    let mut prev_energy = 0.0;
                    for _ in 0..m {
                        let h = complex_gaussian(&mut rng, gain);
                        part.signal.push(if cur_on { h } else { Complex64::new(0.0, 0.0) });
                        part.noise.push(complex_gaussian(&mut rng, 1.0));
                        let h_prev = complex_gaussian(&mut rng, gain);
                        let v_prev = complex_gaussian(&mut rng, 1.0);
                        if let Some(tp) = params.tau_prev {
                            let xp = if prev_on { h_prev } else { Complex64::new(0.0, 0.0) } + v_prev * tp;
                            prev_energy += xp.norm_sqr();
                        }
                    }
                    let logit = match params.tau_prev {
                        Some(tp) => {
                            let p = DenoiserParams::new(gain, 1.0, params.activity, m);
                            log_si_weight_from_energy(prev_energy, tp * tp, &p)
                        }
                        None => f64::NAN,
                    };
                    part.gains.push(gain);
                    part.si_logit.push(logit);
                }
                part
            })
            .collect();

        let mut all = Self::with_capacity(m, params.sample_count);
        for p in parts {
            all.gains.extend(p.gains);
            all.signal.extend(p.signal);
            all.noise.extend(p.noise);
            all.si_logit.extend(p.si_logit);
        }
        Ok(all)
    }

    fn with_capacity(antennas: usize, n: usize) -> Self {
        Self {
            antennas,
            gains: Vec::with_capacity(n),
            signal: Vec::with_capacity(n * antennas),
            noise: Vec::with_capacity(n * antennas),
            si_logit: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Mean and standard error of `(1/M)‖η(X + τV) − X‖²`.
    pub fn mse(&self, tau_sq: f64, params: &SeParams, denoiser: SeDenoiser) -> Result<(f64, f64)> {
        if denoiser == SeDenoiser::Mmse(Variant::Si) && params.tau_prev.is_none() {
            return Err(Error::InvalidConfig(
                "state evolution with side information needs tau_prev".into(),
            ));
        }
        let m = self.antennas;
        let tau = tau_sq.sqrt();
        let n = self.len();
        let sums: Vec<(f64, f64)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let x = &self.signal[i * m..(i + 1) * m];
                    let v = &self.noise[i * m..(i + 1) * m];
                    let err = match denoiser {
                        SeDenoiser::Perfect => 0.0,
                        SeDenoiser::Zero => x.iter().map(Complex64::norm_sqr).sum(),
                        SeDenoiser::Mmse(variant) => {
                            let energy: f64 = x.iter().zip(v).map(|(a, b)| (a + b * tau).norm_sqr()).sum();
                            let logit = match variant {
                                Variant::Si => self.si_logit[i],
                                Variant::Nosi => 0.0,
                            };
                            let p = DenoiserParams::new(self.gains[i], tau, params.activity, m);
                            let (scale, _) = shrinkage_with_derivative(energy, logit, &p);
                            x.iter()
                                .zip(v)
                                .map(|(a, b)| ((a + b * tau) * scale - a).norm_sqr())
                                .sum()
                        }
                    } / m as f64;
                    s += err;
                    s2 += err * err;
                }
                (s, s2)
            })
            .collect();
        let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let nf = n as f64;
        let mean = s / nf;
        let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
        Ok((mean, (var / nf).sqrt()))
    }

    pub fn step(&self, tau_sq: f64, params: &SeParams, denoiser: SeDenoiser) -> Result<SeStep> {
        let (mean, se) = self.mse(tau_sq, params, denoiser)?;
        Ok(SeStep {
            tau_sq: params.noise_var + params.load * mean,
            stderr: params.load * se,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeStep {
    pub tau_sq: f64,
    pub stderr: f64,
}

/// One state-evolution step with a fresh sample set.
pub fn se_step(tau_sq: f64, params: &SeParams, denoiser: SeDenoiser, seed: u64) -> Result<SeStep> {
    SeSamples::draw(params, seed)?.step(tau_sq, params, denoiser)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrace {
    /// τ_0², τ_1², …
    pub tau_sq: Vec<f64>,
    /// Monte Carlo standard error of each entry (zero for the analytic start).
    pub stderr: Vec<f64>,
    pub fixed_point: f64,
    pub converged: bool,
}

pub const SE_MAX_STEPS: usize = 200;
pub const SE_REL_TOL: f64 = 1e-4;

/// Iterates from the zero-estimate state `σ² + (N/L) λ E[γ]` until the
/// relative change drops below [`SE_REL_TOL`] or [`SE_MAX_STEPS`] steps.
/// A trace that did not converge is still returned, flagged.
pub fn se_fixed_point(params: &SeParams, denoiser: SeDenoiser, seed: u64) -> Result<SeTrace> {
    let samples = SeSamples::draw(params, seed)?;
    se_fixed_point_with(&samples, params, denoiser)
}

pub fn se_fixed_point_with(samples: &SeSamples, params: &SeParams, denoiser: SeDenoiser) -> Result<SeTrace> {
    let mut tau_sq = vec![params.noise_var + params.load * params.signal_power()];
    let mut stderr = vec![0.0];
    let mut converged = false;
    for _ in 0..SE_MAX_STEPS {
        let prev = *tau_sq.last().unwrap();
        let next = samples.step(prev, params, denoiser)?;
        tau_sq.push(next.tau_sq);
        stderr.push(next.stderr);
        if ((next.tau_sq - prev) / prev).abs() < SE_REL_TOL {
            converged = true;
            break;
        }
    }
    Ok(SeTrace {
        fixed_point: *tau_sq.last().unwrap(),
        tau_sq,
        stderr,
        converged,
    })
}
