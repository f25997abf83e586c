//! CSV files written by experiments and curve dumps.
//!
//! All floating-point values are written with 17 significant digits
//! (`{:.16e}`), which reads back to the identical `f64`.
//!
//! | file                  | columns |
//! |-----------------------|---------|
//! | `roc.csv`             | `slot_j,variant,l,P_FA,P_MD,trials,se_P_FA,se_P_MD` |
//! | `slot_summary.csv`    | `slot_j,variant,trials,P_FA_l0,P_MD_l0,nmse,tau_mean,iterations_mean,converged_fraction` |
//! | `se_trace.csv`        | `step,tau_sq,stderr` |
//! | `denoiser_curve.csv`  | `variant,x_prev_abs,x_abs,output_abs` (`x_prev_abs` empty for `nosi`) |
//! | `threshold_curve.csv` | `x_prev_abs,threshold_si,threshold_nosi` |
//! | `amp_trace.csv`       | `block,iter,tau,residual_fro,delta_X` |
//!
//! `metadata.json` holds the seed, version, wall time and the full resolved
//! experiment, and is the only output that differs between identical runs.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::amp::{IterationRecord, Variant};
use crate::detector::{RocCurve, RocPoint};
use crate::error::{Error, Result};
use crate::harness::curves::{self, CurveSetup, DenoiserCurveRow, ThresholdCurveRow};
use crate::harness::experiment::{AggregateResult, SlotCurve};
use crate::state_evolution::SeTrace;

pub const ROC_HEADER: [&str; 8] = ["slot_j", "variant", "l", "P_FA", "P_MD", "trials", "se_P_FA", "se_P_MD"];
pub const SUMMARY_HEADER: [&str; 9] = [
    "slot_j",
    "variant",
    "trials",
    "P_FA_l0",
    "P_MD_l0",
    "nmse",
    "tau_mean",
    "iterations_mean",
    "converged_fraction",
];
pub const SE_HEADER: [&str; 3] = ["step", "tau_sq", "stderr"];
pub const DENOISER_HEADER: [&str; 4] = ["variant", "x_prev_abs", "x_abs", "output_abs"];
pub const THRESHOLD_HEADER: [&str; 3] = ["x_prev_abs", "threshold_si", "threshold_nosi"];
pub const AMP_TRACE_HEADER: [&str; 5] = ["block", "iter", "tau", "residual_fro", "delta_X"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

type CsvResult = std::result::Result<(), csv::Error>;

pub fn write_roc<W: Write>(out: W, curves: &[SlotCurve]) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROC_HEADER)?;
    for c in curves {
        for p in &c.curve.points {
            w.write_record([
                c.slot.to_string(),
                c.variant.as_str().to_string(),
                fmt_f64(p.l),
                fmt_f64(p.p_fa),
                fmt_f64(p.p_md),
                c.curve.trials.to_string(),
                fmt_f64(p.se_p_fa),
                fmt_f64(p.se_p_md),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, result: &AggregateResult) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in &result.summaries {
        w.write_record([
            s.slot.to_string(),
            s.variant.as_str().to_string(),
            s.trials.to_string(),
            fmt_opt(s.metrics.p_fa()),
            fmt_opt(s.metrics.p_md()),
            fmt_opt(s.metrics.nmse()),
            fmt_f64(s.tau_mean),
            fmt_f64(s.iterations_mean),
            fmt_f64(s.converged_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_se_trace<W: Write>(out: W, trace: &SeTrace) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SE_HEADER)?;
    for (i, (t, s)) in trace.tau_sq.iter().zip(&trace.stderr).enumerate() {
        w.write_record([i.to_string(), fmt_f64(*t), fmt_f64(*s)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_denoiser_curve<W: Write>(out: W, rows: &[DenoiserCurveRow]) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DENOISER_HEADER)?;
    for r in rows {
        w.write_record([
            r.variant.as_str().to_string(),
            fmt_opt(r.x_prev_abs),
            fmt_f64(r.x_abs),
            fmt_f64(r.output_abs),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_threshold_curve<W: Write>(out: W, rows: &[ThresholdCurveRow]) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(THRESHOLD_HEADER)?;
    for r in rows {
        w.write_record([fmt_f64(r.x_prev_abs), fmt_f64(r.threshold_si), fmt_f64(r.threshold_nosi)])?;
    }
    w.flush()?;
    Ok(())
}

/// `traces[b]` is the iteration record of block `b` (written 1-based).
pub fn write_amp_trace<W: Write>(out: W, traces: &[&[IterationRecord]]) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AMP_TRACE_HEADER)?;
    for (b, recs) in traces.iter().enumerate() {
        for r in recs.iter() {
            w.write_record([
                (b + 1).to_string(),
                r.iter.to_string(),
                fmt_f64(r.tau),
                fmt_f64(r.residual_fro),
                fmt_f64(r.delta_x),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`, attaching the path
/// to any error.
pub fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<File>) -> CsvResult) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    f(&mut buf).map_err(|e| Error::csv(path, e))?;
    buf.flush().map_err(|e| Error::io(path, e))
}

/// Paths written by [`emit_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub roc: PathBuf,
    pub summary: PathBuf,
    pub se_trace: PathBuf,
    pub denoiser_curve: PathBuf,
    pub threshold_curve: PathBuf,
    pub metadata: PathBuf,
}

impl EmittedFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            roc: dir.join("roc.csv"),
            summary: dir.join("slot_summary.csv"),
            se_trace: dir.join("se_trace.csv"),
            denoiser_curve: dir.join("denoiser_curve.csv"),
            threshold_curve: dir.join("threshold_curve.csv"),
            metadata: dir.join("metadata.json"),
        }
    }

    pub fn csv_files(&self) -> [&Path; 5] {
        [&self.roc, &self.summary, &self.se_trace, &self.denoiser_curve, &self.threshold_curve]
    }
}

/// Writes every output of an experiment into `dir`. The denoiser and
/// threshold curves use the reference single-antenna setup.
pub fn emit_csv(result: &AggregateResult, dir: &Path) -> Result<EmittedFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = EmittedFiles::in_dir(dir);
    write_file(&files.roc, |w| write_roc(w, &result.curves))?;
    write_file(&files.summary, |w| write_summary(w, result))?;
    write_file(&files.se_trace, |w| write_se_trace(w, &result.se_trace))?;
    emit_reference_curves(&files.denoiser_curve, &files.threshold_curve)?;
    let json = serde_json::to_string_pretty(&result.metadata)
        .map_err(|e| Error::InvalidConfig(format!("metadata serialisation: {e}")))?;
    std::fs::write(&files.metadata, json).map_err(|e| Error::io(&files.metadata, e))?;
    Ok(files)
}

/// Denoiser curves for small and large previous magnitudes and the
/// threshold curve at `l = 0`, on the default grids.
pub fn emit_reference_curves(denoiser_path: &Path, threshold_path: &Path) -> Result<()> {
    let setup = CurveSetup::default();
    let rows = curves::denoiser_curve(&setup, &curves::default_denoiser_grid(), &curves::DEFAULT_PREV_ABS)?;
    write_file(denoiser_path, |w| write_denoiser_curve(w, &rows))?;
    let rows = curves::threshold_curve(&setup, 0.0, &curves::default_threshold_grid())?;
    write_file(threshold_path, |w| write_threshold_curve(w, &rows))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: Some(line),
        message: format!("bad {field} value '{value}'"),
    })
}

/// Reads a ROC CSV back into curves, in file order.
pub fn read_roc(path: &Path) -> Result<Vec<SlotCurve>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(ROC_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: Some(1),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut curves: Vec<SlotCurve> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        let slot: usize = parse_field(path, line, "slot_j", &rec[0])?;
        let variant: Variant = parse_field(path, line, "variant", &rec[1])?;
        let trials: usize = parse_field(path, line, "trials", &rec[5])?;
        let point = RocPoint {
            l: parse_field(path, line, "l", &rec[2])?,
            p_fa: parse_field(path, line, "P_FA", &rec[3])?,
            p_md: parse_field(path, line, "P_MD", &rec[4])?,
            se_p_fa: parse_field(path, line, "se_P_FA", &rec[6])?,
            se_p_md: parse_field(path, line, "se_P_MD", &rec[7])?,
        };
        match curves.last_mut() {
            Some(c) if c.slot == slot && c.variant == variant => c.curve.points.push(point),
            _ => curves.push(SlotCurve {
                slot,
                variant,
                curve: RocCurve {
                    points: vec![point],
                    trials,
                },
            }),
        }
    }
    Ok(curves)
}
