//! Multiple-measurement-vector AMP for one coherence block, and the chaining
//! of converged pseudo-observations into side information for the next block.
//!
//! Iteration, starting from `X₀ = 0`, `R₀ = Y`:
//!
//! ```text
//! x̃_{n,t}  = x_{n,t} + (Sᴴ R_t)_n
//! x_{n,t+1} = η_n(x̃_{n,t})
//! R_{t+1}   = Y − S X_{t+1} + (N/L) R_t ⟨η′⟩
//! ```
//!
//! `⟨η′⟩` is the entry-averaged derivative of each row denoiser, averaged again
//! over all `N` devices so the Onsager term is a single scalar. `τ_t` is
//! estimated from the residual as `‖R_t‖_F / √(LM)`.

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::denoiser::{log_si_weight, shrinkage_with_derivative, DenoiserParams, SideInfo};
use crate::error::{Error, Result};
use crate::model::{norm_sqr, MarkovActivityModel, PilotMatrix, ReceivedBlock, ScenarioConfig};

/// Maps one row of pseudo-observations to its estimate and returns the
/// entry-averaged derivative.
pub trait RowDenoiser: Sync {
    fn denoise_row(
        &self,
        device: usize,
        input: ArrayView1<'_, Complex64>,
        tau: f64,
        out: ArrayViewMut1<'_, Complex64>,
    ) -> f64;
}

/// The MMSE denoiser, with optional per-device side information.
#[derive(Debug, Clone)]
pub struct MmseDenoiser<'a> {
    gains: &'a [f64],
    activity: MarkovActivityModel,
    antennas: usize,
    side_info: Option<&'a [SideInfo]>,
    // side-information logit per device; constant over a block
    si_logits: Vec<f64>,
}

impl<'a> MmseDenoiser<'a> {
    pub fn new(
        gains: &'a [f64],
        activity: MarkovActivityModel,
        antennas: usize,
        side_info: Option<&'a [SideInfo]>,
    ) -> Result<Self> {
        let si_logits = match side_info {
            None => vec![0.0; gains.len()],
            Some(si) => {
                if si.len() != gains.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} side-information entries for {} devices",
                        si.len(),
                        gains.len()
                    )));
                }
                si.iter()
                    .zip(gains)
                    .map(|(s, &g)| {
                        if s.pseudo_obs.len() != antennas {
                            return Err(Error::DimensionMismatch(format!(
                                "side information has {} antennas, expected {antennas}",
                                s.pseudo_obs.len()
                            )));
                        }
                        let p = DenoiserParams::new(g, 1.0, activity, antennas);
                        Ok(log_si_weight(s, &p))
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(Self {
            gains,
            activity,
            antennas,
            side_info,
            si_logits,
        })
    }

    pub fn params(&self, device: usize, tau: f64) -> DenoiserParams {
        DenoiserParams::new(self.gains[device], tau, self.activity, self.antennas)
    }

    pub fn side_info(&self) -> Option<&'a [SideInfo]> {
        self.side_info
    }
}

impl RowDenoiser for MmseDenoiser<'_> {
    fn denoise_row(
        &self,
        device: usize,
        input: ArrayView1<'_, Complex64>,
        tau: f64,
        mut out: ArrayViewMut1<'_, Complex64>,
    ) -> f64 {
        let p = self.params(device, tau);
        let (scale, deriv) = shrinkage_with_derivative(norm_sqr(input), self.si_logits[device], &p);
        Zip::from(&mut out).and(&input).for_each(|o, &i| *o = i * scale);
        deriv
    }
}

/// Test hook: `η(x) = x`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityDenoiser;

impl RowDenoiser for IdentityDenoiser {
    fn denoise_row(&self, _: usize, input: ArrayView1<'_, Complex64>, _: f64, mut out: ArrayViewMut1<'_, Complex64>) -> f64 {
        out.assign(&input);
        1.0
    }
}

/// Test hook: `η(x) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroDenoiser;

impl RowDenoiser for ZeroDenoiser {
    fn denoise_row(&self, _: usize, _: ArrayView1<'_, Complex64>, _: f64, mut out: ArrayViewMut1<'_, Complex64>) -> f64 {
        out.fill(Complex64::new(0.0, 0.0));
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Lower bound on τ² (not τ).
    pub tau_sq_floor: f64,
}

impl AmpOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            max_iters: config.amp_max_iters,
            tol: config.amp_convergence_tol,
            tau_sq_floor: 1e-12 * config.max_gain(),
        }
    }

    fn floor_tau(&self, tau: f64) -> f64 {
        tau.max(self.tau_sq_floor.sqrt())
    }
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
            tau_sq_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub x: Array2<Complex64>,
    pub r: Array2<Complex64>,
    pub tau: f64,
    pub iter: usize,
}

impl AmpState {
    pub fn initial(y: &Array2<Complex64>, num_devices: usize, opts: &AmpOptions) -> Self {
        Self {
            x: Array2::zeros((num_devices, y.ncols())),
            r: y.clone(),
            tau: opts.floor_tau(estimate_tau(y)),
            iter: 0,
        }
    }
}

/// `x̃_n = x_n + (Sᴴ R)_n` for every device.
pub fn pseudo_observations(
    x: &Array2<Complex64>,
    r: &Array2<Complex64>,
    pilots: &PilotMatrix,
) -> Result<Array2<Complex64>> {
    check_dims(x, r, pilots)?;
    Ok(x + &hermitian(&pilots.0).dot(r))
}

fn hermitian(s: &Array2<Complex64>) -> Array2<Complex64> {
    s.t().mapv(|v| v.conj())
}

fn check_dims(x: &Array2<Complex64>, r: &Array2<Complex64>, pilots: &PilotMatrix) -> Result<()> {
    let (l, n) = pilots.0.dim();
    if x.nrows() != n || r.nrows() != l || x.ncols() != r.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "X is {:?}, R is {:?}, S is {:?}",
            x.dim(),
            r.dim(),
            pilots.0.dim()
        )));
    }
    Ok(())
}

/// `sqrt(‖R‖_F² / (L M))`
pub fn estimate_tau(r: &Array2<Complex64>) -> f64 {
    (r.iter().map(Complex64::norm_sqr).sum::<f64>() / r.len() as f64).sqrt()
}

fn fro(a: &Array2<Complex64>) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

struct Workspace<'a> {
    y: &'a Array2<Complex64>,
    s: &'a Array2<Complex64>,
    s_h: Array2<Complex64>,
}

impl<'a> Workspace<'a> {
    fn new(y: &'a Array2<Complex64>, pilots: &'a PilotMatrix) -> Self {
        Self {
            y,
            s: &pilots.0,
            s_h: hermitian(&pilots.0),
        }
    }

    fn pseudo(&self, state: &AmpState) -> Array2<Complex64> {
        &state.x + &self.s_h.dot(&state.r)
    }

    fn step<D: RowDenoiser + ?Sized>(&self, state: &AmpState, denoiser: &D, opts: &AmpOptions) -> Result<AmpState> {
        let (l, n) = self.s.dim();
        let pseudo = self.pseudo(state);
        let mut x_next = Array2::zeros(pseudo.dim());
        let mut deriv_sum = 0.0;
        for (dev, (row, out)) in pseudo.rows().into_iter().zip(x_next.rows_mut()).enumerate() {
            deriv_sum += denoiser.denoise_row(dev, row, state.tau, out);
        }
        let onsager = n as f64 / l as f64 * (deriv_sum / n as f64);
        let mut r_next = self.y - &self.s.dot(&x_next);
        r_next.scaled_add(Complex64::new(onsager, 0.0), &state.r);

        let iter = state.iter + 1;
        if x_next.iter().chain(r_next.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { iter });
        }
        Ok(AmpState {
            tau: opts.floor_tau(estimate_tau(&r_next)),
            x: x_next,
            r: r_next,
            iter,
        })
    }
}

/// One AMP iteration.
pub fn amp_iterate<D: RowDenoiser + ?Sized>(
    state: &AmpState,
    y: &Array2<Complex64>,
    pilots: &PilotMatrix,
    denoiser: &D,
    opts: &AmpOptions,
) -> Result<AmpState> {
    check_dims(&state.x, &state.r, pilots)?;
    if y.dim() != state.r.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Y is {:?} but R is {:?}",
            y.dim(),
            state.r.dim()
        )));
    }
    Workspace::new(y, pilots).step(state, denoiser, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub tau: f64,
    pub residual_fro: f64,
    pub delta_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpBlockResult {
    pub estimate: Array2<Complex64>,
    /// `x̂_n + (Sᴴ R_∞)_n`, one row per device.
    pub pseudo_obs: Array2<Complex64>,
    pub residual: Array2<Complex64>,
    /// τ_0 … τ_T
    pub tau_trace: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub iters_used: usize,
    pub converged: bool,
}

impl AmpBlockResult {
    /// Converged pseudo-noise level τ_∞.
    pub fn tau(&self) -> f64 {
        *self.tau_trace.last().expect("trace holds τ_0")
    }

    /// Per-device side information for the next block.
    pub fn side_info(&self) -> Result<Vec<SideInfo>> {
        let tau = self.tau();
        self.pseudo_obs
            .rows()
            .into_iter()
            .map(|row| SideInfo::new(row.to_owned(), tau))
            .collect()
    }
}

/// Runs AMP on one block until the relative change of `X` drops below
/// `opts.tol` or `opts.max_iters` iterations have been spent.
pub fn run_block<D: RowDenoiser + ?Sized>(
    y: &Array2<Complex64>,
    pilots: &PilotMatrix,
    denoiser: &D,
    opts: &AmpOptions,
) -> Result<AmpBlockResult> {
    let n = pilots.num_devices();
    let mut state = AmpState::initial(y, n, opts);
    check_dims(&state.x, &state.r, pilots)?;
    let ws = Workspace::new(y, pilots);

    let mut tau_trace = vec![state.tau];
    let mut iterations = Vec::new();
    let mut converged = false;
    while state.iter < opts.max_iters {
        let next = ws.step(&state, denoiser, opts)?;
        let delta_x = fro(&(&next.x - &state.x));
        let rel = delta_x / fro(&state.x).max(f64::MIN_POSITIVE);
        tau_trace.push(next.tau);
        iterations.push(IterationRecord {
            iter: next.iter,
            tau: next.tau,
            residual_fro: fro(&next.r),
            delta_x,
        });
        state = next;
        if rel < opts.tol {
            converged = true;
            break;
        }
    }
    let pseudo_obs = ws.pseudo(&state);
    Ok(AmpBlockResult {
        estimate: state.x,
        pseudo_obs,
        residual: state.r,
        tau_trace,
        iterations,
        iters_used: state.iter,
        converged,
    })
}

/// Whether blocks are processed with side information from the previous block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Si,
    Nosi,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Si => "si",
            Variant::Nosi => "nosi",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "si" => Ok(Variant::Si),
            "nosi" => Ok(Variant::Nosi),
            other => Err(format!("unknown variant '{other}' (expected 'si' or 'nosi')")),
        }
    }
}

/// AMP output of one block together with the side information it used.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRun {
    pub result: AmpBlockResult,
    pub side_info: Option<Vec<SideInfo>>,
}

/// Processes consecutive blocks. With [`Variant::Si`] the first block runs
/// without side information and every later block uses the previous block's
/// converged pseudo-observations and τ_∞.
pub fn run_trial(
    received: &[ReceivedBlock],
    pilots: &PilotMatrix,
    gains: &[f64],
    activity: MarkovActivityModel,
    variant: Variant,
    opts: &AmpOptions,
) -> Result<Vec<BlockRun>> {
    let mut runs: Vec<BlockRun> = Vec::with_capacity(received.len());
    for block in received {
        let antennas = block.y.ncols();
        let side_info = match (variant, runs.last()) {
            (Variant::Si, Some(prev)) => Some(prev.result.side_info()?),
            _ => None,
        };
        let denoiser = MmseDenoiser::new(gains, activity, antennas, side_info.as_deref())?;
        let result = run_block(&block.y, pilots, &denoiser, opts)?;
        runs.push(BlockRun { result, side_info });
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::denoise_with_derivative;
    use crate::model::{BlockTruth, PilotMatrix, TrialScenario};
    use crate::rng::{complex_gaussian, SeedTree};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = SeedTree::new(seed).stream("m", &[]);
        Array2::from_shape_simple_fn((rows, cols), || complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn matched_filter_initialisation() {
        let pilots = PilotMatrix(random_matrix(5, 7, 1));
        let y = random_matrix(5, 2, 2);
        let x0 = Array2::zeros((7, 2));
        let p = pseudo_observations(&x0, &y, &pilots).unwrap();
        for n in 0..7 {
            for m in 0..2 {
                let direct: Complex64 = (0..5).map(|l| pilots.0[[l, n]].conj() * y[[l, m]]).sum();
                assert!((p[[n, m]] - direct).norm() < 1e-12);
            }
        }
        let x = random_matrix(7, 2, 3);
        let zero_r = Array2::zeros((5, 2));
        assert_eq!(pseudo_observations(&x, &zero_r, &pilots).unwrap(), x);
        assert!(pseudo_observations(&x, &random_matrix(4, 2, 0), &pilots).is_err());
    }

    #[test]
    fn tau_estimate_examples() {
        assert_eq!(estimate_tau(&Array2::zeros((3, 2))), 0.0);
        let r = Array2::from_shape_fn((4, 3), |(i, j)| Complex64::from_polar(2.5, (i * 3 + j) as f64));
        assert!((estimate_tau(&r) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn tau_estimate_law_of_large_numbers() {
        let r = random_matrix(1000, 1000, 4).mapv(|v| v * 3f64.sqrt());
        let t2 = estimate_tau(&r).powi(2);
        assert!((t2 - 3.0).abs() < 0.03, "{t2}");
    }

    #[test]
    fn identity_hook_residual_recursion() {
        let pilots = PilotMatrix(random_matrix(3, 4, 5).mapv(|v| v / 3f64.sqrt()));
        let y = random_matrix(3, 2, 6);
        let opts = AmpOptions::default();
        let s0 = AmpState::initial(&y, 4, &opts);
        let s1 = amp_iterate(&s0, &y, &pilots, &IdentityDenoiser, &opts).unwrap();
        let pseudo = pseudo_observations(&s0.x, &s0.r, &pilots).unwrap();
        assert_eq!(s1.x, pseudo);
        let expect = &y - &pilots.0.dot(&s1.x) + &s0.r.mapv(|v| v * (4.0 / 3.0));
        for (a, b) in s1.r.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_hook_is_a_fixed_point() {
        let pilots = PilotMatrix(random_matrix(3, 4, 7));
        let y = random_matrix(3, 2, 8);
        let opts = AmpOptions::default();
        let s0 = AmpState::initial(&y, 4, &opts);
        let s1 = amp_iterate(&s0, &y, &pilots, &ZeroDenoiser, &opts).unwrap();
        assert!(s1.x.iter().all(|v| v.norm() == 0.0));
        assert_eq!(s1.r, y);
        let res = run_block(&y, &pilots, &ZeroDenoiser, &opts).unwrap();
        assert!(res.converged);
        assert_eq!(res.iters_used, 1);
    }

    #[test]
    fn mmse_row_denoiser_matches_free_function() {
        let model = MarkovActivityModel::new(0.1, 0.46).unwrap();
        let gains = [0.5, 2.0, 7.0];
        let si: Vec<SideInfo> = (0..3)
            .map(|i| SideInfo::new(random_matrix(1, 2, 10 + i).row(0).to_owned(), 0.9).unwrap())
            .collect();
        let den = MmseDenoiser::new(&gains, model, 2, Some(&si)).unwrap();
        let x = random_matrix(3, 2, 20);
        for n in 0..3 {
            let mut out = ndarray::Array1::zeros(2);
            let d = den.denoise_row(n, x.row(n), 1.3, out.view_mut());
            let p = DenoiserParams::new(gains[n], 1.3, model, 2);
            let (expect, de) = denoise_with_derivative(x.row(n), Some(&si[n]), &p);
            assert_eq!(out, expect);
            assert_eq!(d, de);
        }
        assert!(MmseDenoiser::new(&gains[..2], model, 2, Some(&si)).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let pilots = PilotMatrix(random_matrix(3, 4, 5));
        let mut y = random_matrix(3, 1, 6);
        y[[0, 0]] = Complex64::new(f64::NAN, 0.0);
        let opts = AmpOptions::default();
        let err = run_block(&y, &pilots, &IdentityDenoiser, &opts).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { iter: 1 }));
    }

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            num_devices: 200,
            pilot_length: 80,
            num_antennas: 2,
            num_blocks: 3,
            activity_rate: 0.1,
            persistence: 0.1,
            noise_variance: 0.05,
            path_losses: vec![1.0; 200],
            rng_seed: 3,
            amp_max_iters: 30,
            amp_convergence_tol: 1e-6,
        }
    }

    #[test]
    fn memoryless_si_chain_equals_independent_blocks() {
        let cfg = small_config();
        let sc = TrialScenario::generate(&cfg, &SeedTree::new(cfg.rng_seed), 0).unwrap();
        let model = cfg.activity_model().unwrap();
        let opts = AmpOptions::from_config(&cfg);
        let si = run_trial(&sc.received, &sc.pilots, &cfg.path_losses, model, Variant::Si, &opts).unwrap();
        let nosi = run_trial(&sc.received, &sc.pilots, &cfg.path_losses, model, Variant::Nosi, &opts).unwrap();
        assert!(si[0].side_info.is_none() && si[1].side_info.is_some());
        for (a, b) in si.iter().zip(&nosi) {
            assert_eq!(a.result, b.result);
        }
    }

    #[test]
    fn side_info_chain_is_recomputable() {
        let mut cfg = small_config();
        cfg.persistence = 0.6;
        let sc = TrialScenario::generate(&cfg, &SeedTree::new(9), 0).unwrap();
        let model = cfg.activity_model().unwrap();
        let opts = AmpOptions::from_config(&cfg);
        let runs = run_trial(&sc.received, &sc.pilots, &cfg.path_losses, model, Variant::Si, &opts).unwrap();
        for w in runs.windows(2) {
            let rebuilt = pseudo_observations(&w[0].result.estimate, &w[0].result.residual, &sc.pilots).unwrap();
            assert_eq!(rebuilt, w[0].result.pseudo_obs);
            assert_eq!(w[1].side_info.as_ref().unwrap(), &w[0].result.side_info().unwrap());
        }
    }

    #[test]
    fn noiseless_empty_block_stays_at_zero() {
        let pilots = PilotMatrix(random_matrix(30, 60, 1).mapv(|v| v / 30f64.sqrt()));
        let truth = BlockTruth::new(vec![false; 60], Array2::zeros((60, 1))).unwrap();
        let y = pilots.0.dot(&truth.signal);
        let model = MarkovActivityModel::new(0.1, 0.5).unwrap();
        let gains = vec![1.0; 60];
        let den = MmseDenoiser::new(&gains, model, 1, None).unwrap();
        let opts = AmpOptions {
            tau_sq_floor: 1e-12,
            ..AmpOptions::default()
        };
        let res = run_block(&y, &pilots, &den, &opts).unwrap();
        assert!(res.estimate.iter().all(|v| v.norm() == 0.0));
        assert_eq!(res.tau(), 1e-6);
    }
}
