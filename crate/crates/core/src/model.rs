//! Synthetic grant-free access scenario: Markov activity, Rayleigh channels,
//! Gaussian pilots and the received pilot signal `Y = S X + Z`.

use std::io::Write;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, SeedTree};

/// Steady-state reactivation probability `β = λ(1−α)/(1−λ)`.
pub fn beta_from(rate: f64, persistence: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "activity rate must lie in (0, 1), got {rate}"
        )));
    }
    if !(0.0..=1.0).contains(&persistence) {
        return Err(Error::InvalidConfig(format!(
            "persistence must lie in [0, 1], got {persistence}"
        )));
    }
    let beta = rate * (1.0 - persistence) / (1.0 - rate);
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!(
            "derived reactivation probability {beta} is outside [0, 1] (rate {rate}, persistence {persistence})"
        )));
    }
    Ok(beta)
}

/// Path loss in dB for a distance in km: `−128.1 − 36.7 log10(d)`.
pub fn path_loss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0) || !distance_km.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "distance must be positive, got {distance_km}"
        )));
    }
    Ok(-128.1 - 36.7 * distance_km.log10())
}

pub fn path_loss_linear(distance_km: f64) -> Result<f64> {
    Ok(db_to_linear(path_loss_db(distance_km)?))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Two-state activity chain in steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovActivityModel {
    rate: f64,
    persistence: f64,
    reactivation: f64,
}

impl MarkovActivityModel {
    pub fn new(rate: f64, persistence: f64) -> Result<Self> {
        let reactivation = beta_from(rate, persistence)?;
        Ok(Self {
            rate,
            persistence,
            reactivation,
        })
    }

    /// Memoryless activity (`α = β = λ`).
    pub fn independent(rate: f64) -> Result<Self> {
        // Bypass the derived β so α = β = λ holds bit-for-bit.
        beta_from(rate, rate)?;
        Ok(Self {
            rate,
            persistence: rate,
            reactivation: rate,
        })
    }

    /// λ
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// α = Pr(active | previously active)
    pub fn persistence(&self) -> f64 {
        self.persistence
    }

    /// β = Pr(active | previously inactive)
    pub fn reactivation(&self) -> f64 {
        self.reactivation
    }

    /// Row-stochastic transition matrix indexed `[previous][current]`,
    /// state 0 = inactive, 1 = active.
    pub fn transition_matrix(&self) -> [[f64; 2]; 2] {
        let (a, b) = (self.persistence, self.reactivation);
        [[1.0 - b, b], [1.0 - a, a]]
    }

    /// Joint priors of (previous, current) activity, ordered
    /// active/active, active/inactive, inactive/active, inactive/inactive.
    pub fn case_priors(&self) -> [f64; 4] {
        let (l, a, b) = (self.rate, self.persistence, self.reactivation);
        [a * l, (1.0 - a) * l, b * (1.0 - l), (1.0 - b) * (1.0 - l)]
    }

    pub fn is_independent(&self) -> bool {
        self.persistence == self.reactivation
    }
}

/// Activity indicators, `[device, block]`.
pub type ActivityTrace = Array2<bool>;

/// First block from the stationary marginal, later blocks from the chain.
pub fn sample_activity_trace<R: Rng + ?Sized>(
    model: &MarkovActivityModel,
    num_devices: usize,
    num_blocks: usize,
    rng: &mut R,
) -> ActivityTrace {
    let mut trace = Array2::from_elem((num_devices, num_blocks), false);
    for n in 0..num_devices {
        let mut active = false;
        for j in 0..num_blocks {
            let p = match (j, active) {
                (0, _) => model.rate,
                (_, true) => model.persistence,
                (_, false) => model.reactivation,
            };
            active = rng.gen::<f64>() < p;
            trace[[n, j]] = active;
        }
    }
    trace
}

/// Device placement used to turn the physical link budget into per-device gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalLayout {
    pub cell_radius_km: f64,
    pub min_radius_km: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for PhysicalLayout {
    fn default() -> Self {
        Self {
            cell_radius_km: 1.0,
            min_radius_km: 0.05,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -169.0,
            bandwidth_hz: 10e6,
        }
    }
}

impl PhysicalLayout {
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Channel gain normalised to unit noise power.
    pub fn effective_gain(&self, distance_km: f64) -> Result<f64> {
        Ok(db_to_linear(
            self.tx_power_dbm + path_loss_db(distance_km)? - self.noise_power_dbm(),
        ))
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.min_radius_km > 0.0) {
            v.push(format!("min_radius_km must be positive, got {}", self.min_radius_km));
        }
        if !(self.cell_radius_km > self.min_radius_km) {
            v.push(format!(
                "cell_radius_km ({}) must exceed min_radius_km ({})",
                self.cell_radius_km, self.min_radius_km
            ));
        }
        if !(self.bandwidth_hz > 0.0) {
            v.push(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz));
        }
        v
    }

    /// Distances uniform over the annulus area.
    pub fn sample_distances<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let (r0, r1) = (self.min_radius_km, self.cell_radius_km);
        (0..count)
            .map(|_| (r0 * r0 + rng.gen::<f64>() * (r1 * r1 - r0 * r0)).sqrt())
            .collect()
    }

    pub fn sample_gains<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.sample_distances(count, rng)
            .into_iter()
            .map(|d| self.effective_gain(d))
            .collect()
    }
}

/// Everything needed to generate one experiment's data and run AMP on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_devices: usize,
    pub pilot_length: usize,
    pub num_antennas: usize,
    pub num_blocks: usize,
    pub activity_rate: f64,
    pub persistence: f64,
    pub noise_variance: f64,
    pub path_losses: Vec<f64>,
    pub rng_seed: u64,
    pub amp_max_iters: usize,
    pub amp_convergence_tol: f64,
}

impl ScenarioConfig {
    /// Every violated invariant, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, value) in [
            ("num_devices", self.num_devices),
            ("pilot_length", self.pilot_length),
            ("num_antennas", self.num_antennas),
            ("num_blocks", self.num_blocks),
            ("amp_max_iters", self.amp_max_iters),
        ] {
            if value == 0 {
                v.push(format!("{name} must be positive"));
            }
        }
        if !(self.activity_rate > 0.0 && self.activity_rate < 1.0) {
            v.push(format!(
                "activity_rate must lie in (0, 1), got {}",
                self.activity_rate
            ));
        }
        let rates_ok = self.activity_rate > 0.0 && self.activity_rate < 1.0;
        if !(0.0..=1.0).contains(&self.persistence) {
            v.push(format!("persistence must lie in [0, 1], got {}", self.persistence));
        } else if rates_ok {
            if let Err(e) = beta_from(self.activity_rate, self.persistence) {
                v.push(e.to_string());
            }
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            v.push(format!("noise_variance must be positive, got {}", self.noise_variance));
        }
        if self.path_losses.len() != self.num_devices {
            v.push(format!(
                "path_losses has {} entries, expected num_devices = {}",
                self.path_losses.len(),
                self.num_devices
            ));
        }
        if let Some((n, g)) = self
            .path_losses
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g > 0.0) || !g.is_finite())
        {
            v.push(format!("path_losses[{n}] must be positive and finite, got {g}"));
        }
        if !(self.amp_convergence_tol >= 0.0) {
            v.push(format!(
                "amp_convergence_tol must be nonnegative, got {}",
                self.amp_convergence_tol
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn activity_model(&self) -> Result<MarkovActivityModel> {
        if self.activity_rate == self.persistence {
            MarkovActivityModel::independent(self.activity_rate)
        } else {
            MarkovActivityModel::new(self.activity_rate, self.persistence)
        }
    }

    pub fn load(&self) -> f64 {
        self.num_devices as f64 / self.pilot_length as f64
    }

    pub fn max_gain(&self) -> f64 {
        self.path_losses.iter().copied().fold(0.0, f64::max)
    }
}

/// Pilot matrix `S` (L×N), entries CN(0, 1/L). Column `n` is device `n`'s pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix(pub Array2<Complex64>);

impl PilotMatrix {
    pub fn sample<R: Rng + ?Sized>(pilot_length: usize, num_devices: usize, rng: &mut R) -> Self {
        let var = 1.0 / pilot_length as f64;
        Self(Array2::from_shape_simple_fn((pilot_length, num_devices), || {
            complex_gaussian(rng, var)
        }))
    }

    pub fn pilot_length(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_devices(&self) -> usize {
        self.0.ncols()
    }

    pub fn pilot(&self, device: usize) -> ArrayView1<'_, Complex64> {
        self.0.column(device)
    }
}

/// Ground truth for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTruth {
    pub activity: Vec<bool>,
    /// N×M, row `n` is `h_n`.
    pub channels: Array2<Complex64>,
    /// N×M, row `n` is `δ_n h_n`.
    pub signal: Array2<Complex64>,
}

impl BlockTruth {
    pub fn new(activity: Vec<bool>, channels: Array2<Complex64>) -> Result<Self> {
        if activity.len() != channels.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} activity flags for {} channel rows",
                activity.len(),
                channels.nrows()
            )));
        }
        let mut signal = channels.clone();
        for (mut row, &active) in signal.rows_mut().into_iter().zip(&activity) {
            if !active {
                row.fill(Complex64::new(0.0, 0.0));
            }
        }
        Ok(Self {
            activity,
            channels,
            signal,
        })
    }

    /// Channels `h_n ~ CN(0, γ_n I)` drawn for every device, active or not.
    pub fn sample<R: Rng + ?Sized>(
        activity: Vec<bool>,
        gains: &[f64],
        num_antennas: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if activity.len() != gains.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} activity flags for {} gains",
                activity.len(),
                gains.len()
            )));
        }
        let mut channels = Array2::zeros((gains.len(), num_antennas));
        for (mut row, &g) in channels.rows_mut().into_iter().zip(gains) {
            row.map_inplace(|h| *h = complex_gaussian(rng, g));
        }
        Self::new(activity, channels)
    }

    pub fn num_active(&self) -> usize {
        self.activity.iter().filter(|&&a| a).count()
    }

    pub fn num_antennas(&self) -> usize {
        self.signal.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    /// L×M
    pub y: Array2<Complex64>,
    /// The noise realisation that went into `y`.
    pub noise: Array2<Complex64>,
}

pub fn synthesize_block<R: Rng + ?Sized>(
    truth: &BlockTruth,
    pilots: &PilotMatrix,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    if pilots.num_devices() != truth.signal.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "pilot matrix has {} columns but the block has {} devices",
            pilots.num_devices(),
            truth.signal.nrows()
        )));
    }
    let shape = (pilots.pilot_length(), truth.num_antennas());
    let noise = if noise_variance > 0.0 {
        Array2::from_shape_simple_fn(shape, || complex_gaussian(rng, noise_variance))
    } else {
        Array2::zeros(shape)
    };
    let y = pilots.0.dot(&truth.signal) + &noise;
    Ok(ReceivedBlock { y, noise })
}

/// All random quantities of one Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialScenario {
    pub pilots: PilotMatrix,
    pub activity: ActivityTrace,
    pub truths: Vec<BlockTruth>,
    pub received: Vec<ReceivedBlock>,
}

impl TrialScenario {
    pub fn generate(config: &ScenarioConfig, seeds: &SeedTree, trial: u64) -> Result<Self> {
        config.validate()?;
        let model = config.activity_model()?;
        let (n, m, j) = (config.num_devices, config.num_antennas, config.num_blocks);

        let pilots = PilotMatrix::sample(config.pilot_length, n, &mut seeds.stream("pilots", &[trial]));
        let activity = sample_activity_trace(&model, n, j, &mut seeds.stream("activity", &[trial]));

        let mut truths = Vec::with_capacity(j);
        let mut received = Vec::with_capacity(j);
        for block in 0..j {
            let flags = activity.column(block).to_vec();
            let mut ch_rng = seeds.stream("channels", &[trial, block as u64]);
            let truth = BlockTruth::sample(flags, &config.path_losses, m, &mut ch_rng)?;
            let mut noise_rng = seeds.stream("noise", &[trial, block as u64]);
            received.push(synthesize_block(&truth, &pilots, config.noise_variance, &mut noise_rng)?);
            truths.push(truth);
        }
        Ok(Self {
            pilots,
            activity,
            truths,
            received,
        })
    }
}

/// Writes `block, device, active, channel_re_1..M, channel_im_1..M`.
pub fn write_trace_csv<W: Write>(out: W, truths: &[BlockTruth]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let m = truths.first().map_or(0, BlockTruth::num_antennas);
    let mut header = vec!["block".to_string(), "device".into(), "active".into()];
    header.extend((1..=m).map(|i| format!("channel_re_{i}")));
    header.extend((1..=m).map(|i| format!("channel_im_{i}")));
    w.write_record(&header)?;
    for (j, truth) in truths.iter().enumerate() {
        for (n, row) in truth.channels.rows().into_iter().enumerate() {
            let mut rec = vec![
                (j + 1).to_string(),
                n.to_string(),
                u8::from(truth.activity[n]).to_string(),
            ];
            rec.extend(row.iter().map(|h| format!("{:.16e}", h.re)));
            rec.extend(row.iter().map(|h| format!("{:.16e}", h.im)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr(v: ArrayView1<'_, Complex64>) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn beta_examples() {
        assert!(close(beta_from(0.1, 0.46).unwrap(), 0.06, 1e-15));
        assert!(close(beta_from(0.1, 0.91).unwrap(), 0.01, 1e-15));
        assert!(close(beta_from(0.1, 0.1).unwrap(), 0.1, 1e-15));
        assert_eq!(beta_from(0.3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn beta_out_of_range_is_rejected() {
        assert!(matches!(beta_from(0.7, 0.5), Err(Error::InvalidConfig(_))));
        assert!(beta_from(0.0, 0.5).is_err());
        assert!(beta_from(0.1, 1.5).is_err());
    }

    #[test]
    fn steady_state_relation_holds() {
        for &(l, a) in &[(0.1, 0.46), (0.1, 0.91), (0.3, 0.8), (0.05, 0.0)] {
            let m = MarkovActivityModel::new(l, a).unwrap();
            let lhs = m.persistence() * l + m.reactivation() * (1.0 - l);
            assert!(close(lhs, l, 1e-15));
            for row in m.transition_matrix() {
                assert!(close(row[0] + row[1], 1.0, 1e-15));
            }
            assert!(close(m.case_priors().iter().sum::<f64>(), 1.0, 1e-15));
        }
    }

    #[test]
    fn path_loss_examples() {
        assert!(close(path_loss_db(1.0).unwrap(), -128.1, 1e-12));
        assert!(close(path_loss_db(0.1).unwrap(), -91.4, 1e-12));
        assert!(close(path_loss_db(0.5).unwrap(), -117.052199159, 1e-8));
        assert!(close(path_loss_linear(1.0).unwrap(), 10f64.powf(-12.81), 1e-25));
        assert!(path_loss_linear(0.0).is_err());
        assert!(path_loss_linear(-1.0).is_err());
    }

    #[test]
    fn physical_layout_normalises_noise() {
        let p = PhysicalLayout::default();
        assert!(close(p.noise_power_dbm(), -99.0, 1e-12));
        // 23 dBm - 128.1 dB + 99 dB = -6.1 dB at the cell edge
        assert!(close(p.effective_gain(1.0).unwrap(), db_to_linear(-6.1), 1e-15));
        let mut rng = SeedTree::new(3).stream("geo", &[]);
        for d in p.sample_distances(1000, &mut rng) {
            assert!((0.05..=1.0).contains(&d));
        }
    }

    #[test]
    fn absorbing_chain_is_constant() {
        let model = MarkovActivityModel::new(0.2, 1.0).unwrap();
        let mut rng = SeedTree::new(5).stream("a", &[]);
        let trace = sample_activity_trace(&model, 500, 20, &mut rng);
        for row in trace.rows() {
            assert!(row.iter().all(|&a| a == row[0]));
        }
    }

    #[test]
    fn block_truth_rows_zero_iff_inactive() {
        let mut rng = SeedTree::new(9).stream("b", &[]);
        let activity: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let truth = BlockTruth::sample(activity.clone(), &vec![2.0; 50], 3, &mut rng).unwrap();
        let nonzero = truth
            .signal
            .rows()
            .into_iter()
            .filter(|r| r.iter().any(|x| x.norm_sqr() > 0.0))
            .count();
        assert_eq!(nonzero, truth.num_active());
        assert!(BlockTruth::sample(activity, &[1.0; 3], 3, &mut rng).is_err());
    }

    #[test]
    fn synthesize_empty_and_single() {
        let mut rng = SeedTree::new(11).stream("s", &[]);
        let pilots = PilotMatrix::sample(6, 4, &mut rng);
        let truth = BlockTruth::sample(vec![false; 4], &[1.0; 4], 2, &mut rng).unwrap();
        let rx = synthesize_block(&truth, &pilots, 0.0, &mut rng).unwrap();
        assert!(rx.y.iter().all(|y| *y == Complex64::new(0.0, 0.0)));

        let truth = BlockTruth::sample(vec![false, false, true, false], &[1.0; 4], 2, &mut rng).unwrap();
        let rx = synthesize_block(&truth, &pilots, 0.0, &mut rng).unwrap();
        for l in 0..6 {
            for m in 0..2 {
                let expect = pilots.0[[l, 2]] * truth.channels[[2, m]];
                assert!((rx.y[[l, m]] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn synthesize_rejects_mismatch() {
        let mut rng = SeedTree::new(12).stream("s", &[]);
        let pilots = PilotMatrix::sample(6, 4, &mut rng);
        let truth = BlockTruth::sample(vec![true; 5], &[1.0; 5], 2, &mut rng).unwrap();
        assert!(matches!(
            synthesize_block(&truth, &pilots, 1.0, &mut rng),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn config_collects_all_violations() {
        let cfg = ScenarioConfig {
            num_devices: 3,
            pilot_length: 0,
            num_antennas: 1,
            num_blocks: 1,
            activity_rate: 0.7,
            persistence: 0.5,
            noise_variance: -1.0,
            path_losses: vec![1.0, 0.0],
            rng_seed: 0,
            amp_max_iters: 10,
            amp_convergence_tol: 1e-6,
        };
        let v = cfg.violations();
        assert_eq!(v.len(), 5, "{v:?}");
    }
}
