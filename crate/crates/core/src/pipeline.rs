//! End-to-end batch runs: configuration in, CSV artifacts and a manifest out.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    bochner_check, estimate_temperature, fit_moments, BochnerReport, ChiSample, FitOptions, MomentFit,
    TemperatureFit, TemperatureOptions,
};
use crate::config::{to_complex, DampingSweep, ExperimentConfig, ProfileSweep, TimeRange};
use crate::decoherence::{correct_signal, damping_factor, eta_from_profile, measured_signal, DecoherenceSpec};
use crate::dynamics::{ideal_measurement, sample_shots, MeasurementRecord, TestState};
use crate::error::{Error, Result};
use crate::math::C64;
use crate::network::{local_normal_convert, Basis, Direction, NetworkSpec, NormalModeDecomposition};
use crate::noise::{delta_beta_covariance, resolution_spectrum};
use crate::protocol::{beta_from_profile, build_m, default_interaction_time, synthesize_profile, CouplingProfile, Displacement};

pub const MEASUREMENTS_CSV: &str = "measurements.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const DET_M_CSV: &str = "det_m.csv";
pub const PROFILE_CSV: &str = "profile.csv";
pub const DAMPING_CSV: &str = "damping.csv";
pub const NOISE_CSV: &str = "noise.csv";

/// Marker written in the first column of the row after the last good one
/// when a run aborts.
pub const FAILURE_MARKER: &str = "FAILED";

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Everything derived from a configuration before any point is processed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: NetworkSpec,
    pub decomp: NormalModeDecomposition,
    pub t: f64,
    pub basis: Basis,
    pub points: Vec<Vec<C64>>,
    pub deco: Option<DecoherenceSpec>,
    pub state: TestState,
    pub shots: u64,
    pub seed: u64,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (spec, decomp) = cfg.network.decompose()?;
        let t = match cfg.protocol.t {
            Some(t) => t,
            None => default_interaction_time(&decomp, None)?,
        };
        let deco = cfg.decoherence.as_ref().map(|d| d.spec(&decomp.nu)).transpose()?;
        Ok(Self {
            points: cfg.protocol.points(decomp.len())?,
            state: cfg.state.build(&decomp)?,
            basis: cfg.protocol.basis,
            shots: cfg.shots,
            seed: cfg.seed_or_default(),
            spec,
            decomp,
            t,
            deco,
        })
    }

    fn kappa(&self) -> Option<&[f64]> {
        self.deco.as_ref().map(|d| d.kappa.as_slice())
    }

    /// Pulse realizing the displacement that probes `point`.
    pub fn profile_for(&self, point: &[C64], basis: Basis) -> Result<CouplingProfile> {
        let target = Displacement { basis, values: point.iter().map(|x| -0.5 * x).collect() };
        synthesize_profile(&self.decomp, &target, self.t, self.kappa())
    }

    /// The normal-basis point actually probed by `profile` and its damping
    /// exponent.
    pub fn achieved(&self, profile: &CouplingProfile) -> Result<(Vec<C64>, f64)> {
        match &self.deco {
            Some(d) => Ok((eta_from_profile(profile, d)?, damping_factor(profile, d)?)),
            None => Ok((beta_from_profile(profile).iter().map(|b| -2.0 * b).collect(), 0.0)),
        }
    }

    /// Synthesizes, simulates, samples and corrects one point.
    pub fn measure(&self, index: usize, point: &[C64]) -> Result<MeasurementRecord> {
        let profile = self.profile_for(point, self.basis)?;
        let (eta, f) = self.achieved(&profile)?;
        let local = local_normal_convert(&self.decomp, &eta, Direction::NormalToLocal);
        let signal = ideal_measurement(measured_signal(self.state.chi(&local), f))?;
        let raw = if self.shots == 0 {
            MeasurementRecord::exact(point.to_vec(), self.basis, signal)
        } else {
            let est = sample_shots(signal, self.shots, self.seed, index as u64)?;
            MeasurementRecord::new(point.to_vec(), self.basis, self.shots, est)
        };
        Ok(correct_signal(&raw, f).0)
    }
}

fn fmt_point(p: &[C64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{}{:+}i", x.re, x.im)).collect();
    format!("({})", parts.join(", "))
}

fn at_point(index: usize, point: &[C64], e: Error) -> Error {
    Error::AtPoint { index, point: fmt_point(point), source: Box::new(e) }
}

pub fn measurement_header(n: usize) -> Vec<String> {
    let mut h = vec!["basis".to_string()];
    for k in 0..n {
        h.push(format!("xi_re_{k}"));
        h.push(format!("xi_im_{k}"));
    }
    for c in ["shots", "est_s1", "est_s2", "stderr", "f", "chi_re", "chi_im", "chi_err"] {
        h.push(c.into());
    }
    h
}

fn measurement_row(r: &MeasurementRecord) -> Vec<String> {
    let mut row = vec![r.basis.to_string()];
    for x in &r.point {
        row.push(num(x.re));
        row.push(num(x.im));
    }
    row.push(r.shots.to_string());
    for v in [r.est_s1, r.est_s2, r.stderr, r.f, r.chi_corrected.re, r.chi_corrected.im, r.chi_err] {
        row.push(num(v));
    }
    row
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().flexible(true).from_path(path)?)
}

/// Writes records in order; on the first error, a failure row naming the
/// point follows the good rows and the error is returned.
pub fn write_measurements(path: &Path, n: usize, results: &[Result<MeasurementRecord>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(measurement_header(n))?;
    for r in results {
        match r {
            Ok(rec) => w.write_record(measurement_row(rec))?,
            Err(e) => {
                w.write_record([FAILURE_MARKER.to_string(), e.code().to_string(), e.to_string()])?;
                break;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads records up to (not including) a failure row.
pub fn read_measurements(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = rd.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with("xi_re_")).count();
    if n == 0 || header.len() != 1 + 2 * n + 8 {
        return Err(Error::InvalidInput(format!("{} is not a measurement file", path.display())));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {s:?} in {}", path.display())))
    };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        if &row[0] == FAILURE_MARKER {
            break;
        }
        let basis = match &row[0] {
            "local" => Basis::Local,
            "normal" => Basis::Normal,
            other => return Err(Error::InvalidInput(format!("unknown basis {other:?}"))),
        };
        let point = (0..n).map(|k| Ok(C64::new(num(&row[1 + 2 * k])?, num(&row[2 + 2 * k])?))).collect::<Result<_>>()?;
        let o = 1 + 2 * n;
        let shots = row[o].parse::<u64>().map_err(|_| Error::InvalidInput("bad shot count".into()))?;
        out.push(MeasurementRecord {
            point,
            basis,
            shots,
            est_s1: num(&row[o + 1])?,
            est_s2: num(&row[o + 2])?,
            stderr: num(&row[o + 3])?,
            f: num(&row[o + 4])?,
            chi_corrected: C64::new(num(&row[o + 5])?, num(&row[o + 6])?),
            chi_err: num(&row[o + 7])?,
        });
    }
    Ok(out)
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// `(t, Re det M, Im det M, |det M|, cond M)`.
pub fn det_m_sweep(prep: &Prepared, range: &TimeRange) -> Result<Vec<Vec<f64>>> {
    range
        .values()?
        .par_iter()
        .map(|&t| {
            let m = build_m(&prep.decomp, t, prep.kappa())?;
            Ok(vec![t, m.det.re, m.det.im, m.det.norm(), m.cond])
        })
        .collect()
}

/// `(s, g(s))` for the pulse probing the configured point.
pub fn profile_sweep(prep: &Prepared, sw: &ProfileSweep, samples_per_period: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let profile = prep.profile_for(&to_complex(&sw.point), sw.basis)?;
    let spp = samples_per_period.unwrap_or(sw.samples_per_period);
    Ok(profile.samples(spp).into_iter().map(|(s, g)| vec![s, g]).collect())
}

/// `(Re η_index, t, f, e^{−f})` at the protocol time.
pub fn damping_sweep(prep: &Prepared, sw: &DampingSweep) -> Result<Vec<Vec<f64>>> {
    let deco = prep
        .deco
        .as_ref()
        .ok_or_else(|| Error::Config("the damping sweep needs a decoherence section".into()))?;
    let base = to_complex(&sw.base);
    let values: Vec<f64> = if sw.points == 1 {
        vec![sw.re_start]
    } else {
        (0..sw.points)
            .map(|i| sw.re_start + (sw.re_stop - sw.re_start) * i as f64 / (sw.points - 1) as f64)
            .collect()
    };
    values
        .par_iter()
        .map(|&re| {
            let mut eta = base.clone();
            eta[sw.index].re = re;
            let profile = prep.profile_for(&eta, Basis::Normal)?;
            let f = damping_factor(&profile, deco)?;
            Ok(vec![re, prep.t, f, (-f).exp()])
        })
        .collect()
}

/// `(t, √λ₁, …, √λ_N)` with `λ` the eigenvalues of the noise covariance, ascending.
pub fn noise_sweep(decomp: &NormalModeDecomposition, epsilon: f64, range: &TimeRange) -> Result<Vec<Vec<f64>>> {
    range
        .values()?
        .par_iter()
        .map(|&t| {
            let v = delta_beta_covariance(decomp, t, epsilon)?;
            let mut row = vec![t];
            row.extend(resolution_spectrum(&v));
            Ok(row)
        })
        .collect()
}

pub fn noise_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((1..=n).map(|k| format!("sqrt_lambda_{k}"))).collect()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub overrides: Vec<String>,
    pub interaction_time: f64,
    pub files: Vec<String>,
    pub status: String,
    pub wall_time_s: f64,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the profile sweep sampling density.
    pub samples_per_period: Option<usize>,
    /// Command-line settings applied on top of the configuration text,
    /// recorded in the manifest.
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub records: Vec<MeasurementRecord>,
    /// Points whose corrected value was amplified beyond the warning level.
    pub over_amplified: Vec<usize>,
}

/// Runs every point and configured sweep, writes the artifacts into
/// `cfg.output` and a manifest describing the run. `config_text` is the
/// configuration as supplied by the user, embedded verbatim.
pub fn run(cfg: &ExperimentConfig, config_text: &str, opts: RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let dir = PathBuf::from(&cfg.output);
    std::fs::create_dir_all(&dir)?;
    let prep = Prepared::new(cfg)?;
    let n = prep.decomp.len();

    let results: Vec<Result<MeasurementRecord>> = prep
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| prep.measure(i, p).map_err(|e| at_point(i, p, e)))
        .collect();
    write_measurements(&dir.join(MEASUREMENTS_CSV), n, &results)?;
    let mut files = vec![MEASUREMENTS_CSV.to_string()];
    let mut failure = None;
    let mut records = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    if failure.is_none() {
        if let Err(e) = write_sweeps(cfg, &prep, &dir, &opts, &mut files) {
            failure = Some(e);
        }
    }

    let manifest = Manifest {
        version: version_string(),
        seed: cfg.seed,
        config_sha256: sha256_hex(config_text),
        config: serde_json::from_str(config_text).unwrap_or(serde_json::Value::Null),
        overrides: opts.overrides.clone(),
        interaction_time: prep.t,
        files: files.clone(),
        status: match &failure {
            None => "ok".into(),
            Some(e) => format!("failed: {e}"),
        },
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let mut mf = File::create(dir.join(MANIFEST_JSON))?;
    serde_json::to_writer_pretty(&mut mf, &manifest)?;
    writeln!(mf)?;

    if let Some(e) = failure {
        return Err(e);
    }
    let over_amplified = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.f.exp() > crate::decoherence::MAX_AMPLIFICATION)
        .map(|(i, _)| i)
        .collect();
    Ok(RunOutput { dir, files, records, over_amplified })
}

fn write_sweeps(cfg: &ExperimentConfig, prep: &Prepared, dir: &Path, opts: &RunOptions, files: &mut Vec<String>) -> Result<()> {
    let Some(sw) = &cfg.sweeps else { return Ok(()) };
    if let Some(r) = &sw.det_m {
        write_rows(&dir.join(DET_M_CSV), &header(&["t", "det_re", "det_im", "det_abs", "cond"]), &det_m_sweep(prep, r)?)?;
        files.push(DET_M_CSV.into());
    }
    if let Some(p) = &sw.profile {
        write_rows(&dir.join(PROFILE_CSV), &header(&["s", "g"]), &profile_sweep(prep, p, opts.samples_per_period)?)?;
        files.push(PROFILE_CSV.into());
    }
    if let Some(d) = &sw.damping {
        write_rows(&dir.join(DAMPING_CSV), &header(&["re_eta", "t", "f", "exp_neg_f"]), &damping_sweep(prep, d)?)?;
        files.push(DAMPING_CSV.into());
    }
    if let (Some(r), Some(ns)) = (&sw.noise, &cfg.noise) {
        let rows = noise_sweep(&prep.decomp, ns.epsilon, r)?;
        write_rows(&dir.join(NOISE_CSV), &noise_header(prep.decomp.len()), &rows)?;
        files.push(NOISE_CSV.into());
    }
    Ok(())
}

/// Writes `(s, g)` samples of one profile.
pub fn write_profile(path: &Path, profile: &CouplingProfile, samples_per_period: usize) -> Result<()> {
    let rows: Vec<Vec<f64>> = profile.samples(samples_per_period).into_iter().map(|(s, g)| vec![s, g]).collect();
    write_rows(path, &header(&["s", "g"]), &rows)
}

pub fn write_noise(path: &Path, n: usize, rows: &[Vec<f64>]) -> Result<()> {
    write_rows(path, &noise_header(n), rows)
}

/// Analyses of one set of corrected records. Each part may fail on its own
/// (too few points near the origin, no difference closure, wrong basis).
#[derive(Debug)]
pub struct Reconstruction {
    pub samples: usize,
    pub moments: Result<MomentFit>,
    pub bochner: Result<BochnerReport>,
    pub temperature: Option<Result<TemperatureFit>>,
}

pub fn samples_from_records(records: &[MeasurementRecord]) -> Vec<ChiSample> {
    records.iter().map(|r| ChiSample::new(r.point.clone(), r.chi_corrected, r.chi_err)).collect()
}

/// Moment fit, Bochner diagnostic, and (for normal-basis records with a
/// known spectrum) the thermal fit.
pub fn reconstruct(records: &[MeasurementRecord], nu: Option<&[f64]>, fit: Option<FitOptions>) -> Reconstruction {
    let samples = samples_from_records(records);
    let n = samples.first().map(|s| s.point.len()).unwrap_or(1);
    let opts = fit.unwrap_or_else(|| FitOptions::for_modes(n));
    let normal = records.iter().all(|r| r.basis == Basis::Normal);
    Reconstruction {
        samples: samples.len(),
        moments: fit_moments(&samples, 2, opts),
        bochner: bochner_check(&samples),
        temperature: match nu {
            Some(nu) if normal && !records.is_empty() => {
                Some(estimate_temperature(&samples, nu, TemperatureOptions::for_spectrum(nu)))
            }
            _ => None,
        },
    }
}

/// Shortest round-trip text for a CSV cell, switching to exponent form for
/// very small or very large magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn c(x: C64) -> String {
    format!("{:.10}{:+.10}i", x.re, x.im)
}

impl std::fmt::Display for Reconstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples: {}", self.samples)?;
        match &self.moments {
            Ok(m) => {
                writeln!(f, "moments: {} samples in window, {} coefficients, residual rms {:.3e}", m.samples_used, m.coefficients, m.residual_rms)?;
                for (j, (a, e)) in m.mean.iter().zip(&m.mean_err).enumerate() {
                    writeln!(f, "  <a_{j}> = {} ± {:.3e}", c(*a), e)?;
                }
                if let (Some(nm), Some(an)) = (&m.normal, &m.anomalous) {
                    for j in 0..nm.nrows() {
                        for k in j..nm.ncols() {
                            writeln!(f, "  <a_{j}^+ a_{k}> = {}   <a_{j} a_{k}> = {}", c(nm[(j, k)]), c(an[(j, k)]))?;
                        }
                    }
                }
            }
            Err(e) => writeln!(f, "moments: unavailable ({e})")?,
        }
        match &self.bochner {
            Ok(b) => writeln!(
                f,
                "bochner: {} on {} points, min eigenvalue {:.3e}, |chi(0) - 1| = {:.3e}, tol {:.1e}",
                if b.passed { "pass" } else { "FAIL" },
                b.used.len(),
                b.min_eigenvalue,
                b.normalization_error,
                b.tol
            )?,
            Err(e) => writeln!(f, "bochner: unavailable ({e})")?,
        }
        match &self.temperature {
            Some(Ok(t)) => writeln!(
                f,
                "temperature: {:.6e}{}, statistic {:.3e} vs {:.3e} (dof {}){}",
                t.temperature,
                if t.at_lower_bound { " (at lower bound)" } else { "" },
                t.statistic,
                t.threshold,
                t.dof,
                if t.not_thermal { ", NotThermal" } else { "" }
            )?,
            Some(Err(e)) => writeln!(f, "temperature: unavailable ({e})")?,
            None => {}
        }
        Ok(())
    }
}

/// `quantity, j, k, re, im, err` rows for the fitted moments.
pub fn write_moments(path: &Path, fit: &MomentFit) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["quantity", "j", "k", "re", "im", "err"])?;
    for (j, (a, e)) in fit.mean.iter().zip(&fit.mean_err).enumerate() {
        w.write_record(["a".into(), j.to_string(), String::new(), num(a.re), num(a.im), num(*e)])?;
    }
    let mut block = |name: &str, m: &Option<DMatrix<C64>>, e: &Option<DMatrix<f64>>| -> Result<()> {
        if let (Some(m), Some(e)) = (m, e) {
            for j in 0..m.nrows() {
                for k in 0..m.ncols() {
                    let v = m[(j, k)];
                    w.write_record([name.into(), j.to_string(), k.to_string(), num(v.re), num(v.im), num(e[(j, k)])])?;
                }
            }
        }
        Ok(())
    };
    block("adag_a", &fit.normal, &fit.normal_err)?;
    block("a_a", &fit.anomalous, &fit.anomalous_err)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vacuum_cfg(dir: &Path, shots: u64) -> (ExperimentConfig, String) {
        let text = format!(
            r#"{{
            "network": {{"chain": {{"n": 2, "omega": 1.0, "j": 0.1}}}},
            "protocol": {{"basis": "local", "grid": {{"lattice": {{"step": 0.4, "half_width": 1, "modes": [0, 1]}}}}}},
            "state": {{"kind": "vacuum"}},
            "shots": {shots},
            "seed": 42,
            "output": "{}"
        }}"#,
            dir.display()
        );
        (ExperimentConfig::from_json(&text).unwrap(), text)
    }

    #[test]
    fn exact_vacuum_identity() {
        let tmp = tempfile::tempdir().unwrap();
        let (cfg, text) = vacuum_cfg(tmp.path(), 0);
        let out = run(&cfg, &text, RunOptions::default()).unwrap();
        assert_eq!(out.records.len(), 81);
        for r in &out.records {
            let want = (-0.5 * r.point.iter().map(|x| x.norm_sqr()).sum::<f64>()).exp();
            assert!((r.chi_corrected - want).norm() <= 1e-12, "{}", (r.chi_corrected - want).norm());
        }
        let back = read_measurements(&tmp.path().join(MEASUREMENTS_CSV)).unwrap();
        assert_eq!(back, out.records);
        let rec = reconstruct(&back, None, None);
        assert!(rec.bochner.unwrap().passed);
    }

    #[test]
    fn sampled_runs_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (ca, ta) = vacuum_cfg(a.path(), 500);
        let (cb, tb) = vacuum_cfg(b.path(), 500);
        run(&ca, &ta, RunOptions::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| run(&cb, &tb, RunOptions::default())).unwrap();
        let read = |d: &Path| std::fs::read(d.join(MEASUREMENTS_CSV)).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn failure_row_is_written() {
        let tmp = tempfile::tempdir().unwrap();
        let (mut cfg, text) = vacuum_cfg(tmp.path(), 0);
        cfg.protocol.t = Some(0.05);
        let err = run(&cfg, &text, RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::AtPoint { index: 0, .. }), "{err}");
        let body = std::fs::read_to_string(tmp.path().join(MEASUREMENTS_CSV)).unwrap();
        let last = body.lines().last().unwrap();
        assert!(last.starts_with("FAILED,IllConditioned"), "{last}");
        let manifest = std::fs::read_to_string(tmp.path().join(MANIFEST_JSON)).unwrap();
        assert!(manifest.contains("\"status\": \"failed"));
        assert!(read_measurements(&tmp.path().join(MEASUREMENTS_CSV)).unwrap().is_empty());
    }
}
