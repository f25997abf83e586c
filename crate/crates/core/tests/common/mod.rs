//! Test-side reference computations, written directly from the model
//! without going through the library's denoiser or oracle code.

#![allow(dead_code)]

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use si_amp::denoiser::{DenoiserParams, SideInfo};
use si_amp::model::MarkovActivityModel;

pub fn cn_vector<R: Rng + ?Sized>(rng: &mut R, m: usize, variance: f64) -> Array1<Complex64> {
    let s = (variance / 2.0).sqrt();
    Array1::from_shape_simple_fn(m, || {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

/// One random `(x̃, x̃_prev)` pair with its parameters.
pub struct OracleCase {
    pub params: DenoiserParams,
    pub x: Array1<Complex64>,
    pub si: SideInfo,
    pub rate: f64,
    pub persistence: f64,
}

impl OracleCase {
    /// `γ/τ² = snr` with a random `τ`, random λ and α, and a previous noise
    /// level spread over three decades around `γ`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, m: usize, snr: f64) -> Self {
        let rate = rng.gen_range(0.02..0.5);
        let persistence = rng.gen_range(0.0..1.0);
        let reactivation = rate * (1.0 - persistence) / (1.0 - rate);
        let tau: f64 = 10f64.powf(rng.gen_range(-3.0..1.0));
        let gain = snr * tau * tau;
        let tau_prev = (gain * 10f64.powf(rng.gen_range(-2.0..1.0))).sqrt();
        let prev_active = rng.gen_bool(rate);
        let cur_active = rng.gen_bool(if prev_active { persistence } else { reactivation });
        let x_prev = cn_vector(rng, m, tau_prev * tau_prev + if prev_active { gain } else { 0.0 });
        let x = cn_vector(rng, m, tau * tau + if cur_active { gain } else { 0.0 });
        let activity = MarkovActivityModel::new(rate, persistence).unwrap();
        Self {
            params: DenoiserParams::new(gain, tau, activity, m),
            x,
            si: SideInfo::new(x_prev, tau_prev).unwrap(),
            rate,
            persistence,
        }
    }

    fn reactivation(&self) -> f64 {
        self.rate * (1.0 - self.persistence) / (1.0 - self.rate)
    }

    /// `ln p(x̃ | δ) + ln p(x̃_prev | δ_prev) + ln P(δ_prev, δ)` for
    /// `(δ_prev, δ)` in the order (1,1), (1,0), (0,1), (0,0).
    fn joint(&self) -> [f64; 4] {
        let g = self.params.gain;
        let t2 = self.params.tau * self.params.tau;
        let tp2 = self.si.tau_prev * self.si.tau_prev;
        let cn = |v: &Array1<Complex64>, var: f64| {
            let e: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            -(v.len() as f64) * (std::f64::consts::PI * var).ln() - e / var
        };
        let (a, b, l) = (self.persistence, self.reactivation(), self.rate);
        let cur = [cn(&self.x, g + t2), cn(&self.x, t2)];
        let prev = [cn(&self.si.pseudo_obs, g + tp2), cn(&self.si.pseudo_obs, tp2)];
        [
            (l * a).ln() + prev[0] + cur[0],
            (l * (1.0 - a)).ln() + prev[0] + cur[1],
            ((1.0 - l) * b).ln() + prev[1] + cur[0],
            ((1.0 - l) * (1.0 - b)).ln() + prev[1] + cur[1],
        ]
    }
}

fn lse(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior mean by summing over the four activity cases.
pub fn four_case_posterior_mean(c: &OracleCase) -> Array1<Complex64> {
    let j = c.joint();
    let log_active = lse(&[j[0], j[2]]);
    let p_active = (log_active - lse(&j)).exp();
    let g = c.params.gain;
    let shrink = g / (g + c.params.tau * c.params.tau);
    c.x.mapv(|v| v * (p_active * shrink))
}

/// `ln p(x̃, x̃_prev | active) − ln p(x̃, x̃_prev | inactive)`.
pub fn four_case_llr(c: &OracleCase) -> f64 {
    let j = c.joint();
    (lse(&[j[0], j[2]]) - c.rate.ln()) - (lse(&[j[1], j[3]]) - (1.0 - c.rate).ln())
}
