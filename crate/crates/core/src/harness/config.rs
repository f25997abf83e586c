//! Experiment config files (TOML) and named presets.
//!
//! ```toml
//! preset = "fig3-desk"          # optional starting point
//!
//! [scenario]
//! num_devices = 1000
//! pilot_length = 150
//! num_antennas = 1
//! num_blocks = 5
//! activity_rate = 0.1
//! persistence = 0.46
//! noise_variance = 1.0          # linear; physical gains are normalised to 1
//! rng_seed = 1
//! amp_max_iters = 50
//! amp_convergence_tol = 1e-6
//!
//! [scenario.gains]              # exactly one of:
//! common = 1e-8
//! # values = [1e-8, 2e-8, ...]  # one per device
//! # physical = { cell_radius_km = 1.0, min_radius_km = 0.05, tx_power_dbm = 23.0,
//! #              noise_psd_dbm_hz = -169.0, bandwidth_hz = 1e7 }
//!
//! [experiment]
//! num_trials = 200
//! variants = ["si", "nosi"]
//! parallelism = 4
//! out_dir = "out"
//! se_samples = 100000
//! l_grid = { start = -20.0, stop = 30.0, step = 0.05 }   # or l_values = [...]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amp::Variant;
use crate::error::{Error, Result};
use crate::model::{PhysicalLayout, ScenarioConfig};
use crate::rng::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "paper-fig3")]
    PaperFig3,
    #[serde(rename = "paper-fig4")]
    PaperFig4,
    #[serde(rename = "fig3-desk")]
    Fig3Desk,
    #[serde(rename = "fig4-desk")]
    Fig4Desk,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::PaperFig3, Preset::PaperFig4, Preset::Fig3Desk, Preset::Fig4Desk];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::PaperFig3 => "paper-fig3",
            Preset::PaperFig4 => "paper-fig4",
            Preset::Fig3Desk => "fig3-desk",
            Preset::Fig4Desk => "fig4-desk",
        }
    }

    pub fn draft(&self) -> SpecDraft {
        let (n, l, m, j, trials) = match self {
            Preset::PaperFig3 => (4000, 600, 1, 10, 100),
            Preset::PaperFig4 => (4000, 500, 2, 10, 100),
            Preset::Fig3Desk => (1000, 150, 1, 5, 200),
            Preset::Fig4Desk => (1000, 125, 2, 5, 200),
        };
        SpecDraft {
            num_devices: n,
            pilot_length: l,
            num_antennas: m,
            num_blocks: j,
            activity_rate: 0.1,
            persistence: 0.46,
            noise_variance: 1.0,
            rng_seed: 1,
            amp_max_iters: 50,
            amp_convergence_tol: 1e-6,
            gains: GainSource::Physical(PhysicalLayout::default()),
            num_trials: trials,
            l_grid: LGrid::Range {
                start: -20.0,
                stop: 30.0,
                step: 0.05,
            },
            variants: vec![Variant::Si, Variant::Nosi],
            out_dir: PathBuf::from("out"),
            parallelism: 1,
            se_samples: 100_000,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(Preset::name).collect();
                format!("unknown preset '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainSource {
    Common(f64),
    Values(Vec<f64>),
    Physical(PhysicalLayout),
}

impl GainSource {
    /// Per-device gains; physical layouts draw device distances from the
    /// `geometry` substream of `seed`.
    pub fn resolve(&self, num_devices: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            GainSource::Common(g) => Ok(vec![*g; num_devices]),
            GainSource::Values(v) => Ok(v.clone()),
            GainSource::Physical(layout) => {
                let mut rng = SeedTree::new(seed).stream("geometry", &[]);
                layout.sample_gains(num_devices, &mut rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LGrid {
    Range { start: f64, stop: f64, step: f64 },
    Values(Vec<f64>),
}

impl LGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LGrid::Values(v) => v.clone(),
            LGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        }
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub gain_source: GainSource,
    pub num_trials: usize,
    pub l_grid: Vec<f64>,
    pub variants: Vec<Variant>,
    pub out_dir: PathBuf,
    pub parallelism: usize,
    pub se_samples: usize,
}

/// Unvalidated settings; presets, config files and command-line overrides
/// all edit a draft, and [`SpecDraft::build`] validates it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecDraft {
    pub num_devices: usize,
    pub pilot_length: usize,
    pub num_antennas: usize,
    pub num_blocks: usize,
    pub activity_rate: f64,
    pub persistence: f64,
    pub noise_variance: f64,
    pub rng_seed: u64,
    pub amp_max_iters: usize,
    pub amp_convergence_tol: f64,
    pub gains: GainSource,
    pub num_trials: usize,
    pub l_grid: LGrid,
    pub variants: Vec<Variant>,
    pub out_dir: PathBuf,
    pub parallelism: usize,
    pub se_samples: usize,
}

impl SpecDraft {
    pub fn build(self) -> Result<ExperimentSpec> {
        let mut v = Vec::new();
        if self.num_trials == 0 {
            v.push("num_trials must be at least 1".to_string());
        }
        let l_grid = self.l_grid.values();
        if l_grid.is_empty() {
            v.push("l_grid must be nonempty".into());
        }
        if l_grid.iter().any(|l| !l.is_finite()) {
            v.push("l_grid entries must be finite".into());
        }
        if l_grid.windows(2).any(|w| w[0] > w[1]) {
            v.push("l_grid must be sorted ascending".into());
        }
        if self.variants.is_empty() {
            v.push("variants must name at least one of 'si', 'nosi'".into());
        }
        if self.parallelism == 0 {
            v.push("parallelism must be at least 1".into());
        }
        if self.se_samples == 0 {
            v.push("se_samples must be positive".into());
        }
        let path_losses = match &self.gains {
            GainSource::Physical(layout) => {
                let lv = layout.validate();
                if lv.is_empty() {
                    self.gains.resolve(self.num_devices, self.rng_seed).unwrap_or_else(|e| {
                        v.push(e.to_string());
                        Vec::new()
                    })
                } else {
                    v.extend(lv);
                    Vec::new()
                }
            }
            other => other.resolve(self.num_devices, self.rng_seed)?,
        };
        let scenario = ScenarioConfig {
            num_devices: self.num_devices,
            pilot_length: self.pilot_length,
            num_antennas: self.num_antennas,
            num_blocks: self.num_blocks,
            activity_rate: self.activity_rate,
            persistence: self.persistence,
            noise_variance: self.noise_variance,
            path_losses,
            rng_seed: self.rng_seed,
            amp_max_iters: self.amp_max_iters,
            amp_convergence_tol: self.amp_convergence_tol,
        };
        if !matches!(self.gains, GainSource::Physical(_)) || v.is_empty() {
            v.extend(scenario.violations());
        }
        if !v.is_empty() {
            return Err(Error::Validation(v));
        }
        let mut variants = self.variants;
        variants.dedup();
        Ok(ExperimentSpec {
            scenario,
            gain_source: self.gains,
            num_trials: self.num_trials,
            l_grid,
            variants,
            out_dir: self.out_dir,
            parallelism: self.parallelism,
            se_samples: self.se_samples,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Preset>,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    num_devices: Option<usize>,
    pilot_length: Option<usize>,
    num_antennas: Option<usize>,
    num_blocks: Option<usize>,
    activity_rate: Option<f64>,
    persistence: Option<f64>,
    noise_variance: Option<f64>,
    rng_seed: Option<u64>,
    amp_max_iters: Option<usize>,
    amp_convergence_tol: Option<f64>,
    gains: Option<RawGains>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    common: Option<f64>,
    values: Option<Vec<f64>>,
    physical: Option<RawPhysical>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysical {
    cell_radius_km: Option<f64>,
    min_radius_km: Option<f64>,
    tx_power_dbm: Option<f64>,
    noise_psd_dbm_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    num_trials: Option<usize>,
    variants: Option<Vec<Variant>>,
    parallelism: Option<usize>,
    out_dir: Option<PathBuf>,
    se_samples: Option<usize>,
    l_grid: Option<LGrid>,
    l_values: Option<Vec<f64>>,
}

/// Parses a config file into a draft (preset defaults, then file values).
pub fn load_draft(path: &Path) -> Result<SpecDraft> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_draft(&text, path)
}

pub fn parse_draft(text: &str, path: &Path) -> Result<SpecDraft> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    let mut d = raw.preset.unwrap_or(Preset::Fig3Desk).draft();
    let s = raw.scenario;
    macro_rules! set {
        ($src:expr, $($f:ident),*) => { $( if let Some(v) = $src.$f { d.$f = v; } )* };
    }
    set!(s, num_devices, pilot_length, num_antennas, num_blocks, activity_rate, persistence,
         noise_variance, rng_seed, amp_max_iters, amp_convergence_tol);
    if let Some(g) = s.gains {
        let given = [g.common.is_some(), g.values.is_some(), g.physical.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given != 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: None,
                message: "scenario.gains needs exactly one of 'common', 'values', 'physical'".into(),
            });
        }
        d.gains = if let Some(c) = g.common {
            GainSource::Common(c)
        } else if let Some(v) = g.values {
            GainSource::Values(v)
        } else {
            let p = g.physical.unwrap_or_default();
            let def = PhysicalLayout::default();
            GainSource::Physical(PhysicalLayout {
                cell_radius_km: p.cell_radius_km.unwrap_or(def.cell_radius_km),
                min_radius_km: p.min_radius_km.unwrap_or(def.min_radius_km),
                tx_power_dbm: p.tx_power_dbm.unwrap_or(def.tx_power_dbm),
                noise_psd_dbm_hz: p.noise_psd_dbm_hz.unwrap_or(def.noise_psd_dbm_hz),
                bandwidth_hz: p.bandwidth_hz.unwrap_or(def.bandwidth_hz),
            })
        };
    }
    let e = raw.experiment;
    set!(e, num_trials, variants, parallelism, out_dir, se_samples, l_grid);
    if let Some(v) = e.l_values {
        d.l_grid = LGrid::Values(v);
    }
    Ok(d)
}

/// Reads, merges and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    load_draft(path)?.build()
}
