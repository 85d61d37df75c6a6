use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use oscprobe::analysis::FitOptions;
use oscprobe::chain::{chain_g, chain_spectrum, ChainSpec};
use oscprobe::config::{to_complex, ExperimentConfig, NetworkConfig, TimeRange};
use oscprobe::network::{check_assumptions, diagonal_form_residual, verify_symplectic, DEFAULT_GAP_TOL, DEFAULT_G_TOL};
use oscprobe::pipeline::{self, Prepared, RunOptions};
use oscprobe::protocol::{build_m, g_max};
use oscprobe::validate::{self, Fig4Params};

#[derive(Parser, Debug)]
#[command(name = "oscprobe", version, about = "Reconstruct oscillator-network states through a single probe qubit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Evaluate signals exactly instead of sampling shots.
    #[arg(long, global = true)]
    exact: bool,
    /// Uniform chain `N,omega,J` replacing the configured network.
    #[arg(long, global = true, value_name = "N,OMEGA,J")]
    chain: Option<String>,
    /// Profile samples per period of the fastest normal mode.
    #[arg(long, global = true, value_name = "INT")]
    samples_per_period: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normal modes, probe weights and assumption checks of the network.
    Diagonalize,
    /// Coupling profile for the configured profile point (or the first protocol point).
    Synthesize {
        /// Interaction time, overriding the configuration.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Full pipeline: measurement records, sweeps and a run manifest.
    Simulate,
    /// Moment fit, Bochner diagnostic and thermal fit of measurement records.
    Reconstruct {
        /// Measurement file; defaults to measurements.csv in the output directory.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Polynomial degree of the moment fit.
        #[arg(long)]
        degree: Option<usize>,
        /// Radius of the moment-fit window.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Phase-space resolution under coupling noise as a function of t.
    NoiseScan {
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Noise strength, overriding the configuration.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Oracle suites and the eight-oscillator chain checks.
    Validate,
}

struct Loaded {
    cfg: ExperimentConfig,
    text: String,
    overrides: Vec<String>,
}

fn load(g: &Global) -> Result<Loaded> {
    let path = g.config.as_ref().ok_or_else(|| anyhow!(oscprobe::Error::Config("--config is required".into())))?;
    let (mut cfg, text) = ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    let mut overrides = Vec::new();
    if let Some(c) = &g.chain {
        cfg.network = NetworkConfig::from_chain(&ChainSpec::parse(c)?);
        overrides.push(format!("--chain {c}"));
    }
    if let Some(s) = g.seed {
        cfg.seed = Some(s);
        overrides.push(format!("--seed {s}"));
    }
    if let Some(o) = &g.out {
        cfg.output = o.display().to_string();
        overrides.push(format!("--out {}", o.display()));
    }
    if g.exact {
        cfg.shots = 0;
        overrides.push("--exact".into());
    }
    if let Some(s) = g.samples_per_period {
        overrides.push(format!("--samples-per-period {s}"));
    }
    Ok(Loaded { cfg, text, overrides })
}

fn network(g: &Global) -> Result<NetworkConfig> {
    match (&g.chain, &g.config) {
        (Some(c), _) => Ok(NetworkConfig::from_chain(&ChainSpec::parse(c)?)),
        (None, Some(_)) => Ok(load(g)?.cfg.network),
        (None, None) => Err(anyhow!(oscprobe::Error::Config("give --chain or --config".into()))),
    }
}

fn out_dir(g: &Global, cfg: Option<&ExperimentConfig>) -> PathBuf {
    g.out.clone().or_else(|| cfg.map(|c| PathBuf::from(&c.output))).unwrap_or_else(|| PathBuf::from("out"))
}

fn diagonalize(g: &Global) -> Result<()> {
    let net = network(g)?;
    let (spec, d) = net.decompose()?;
    println!("{:>3}  {:>18}  {:>18}  {:>10}", "k", "nu_k", "|G_k|", "arg G_k");
    for k in 0..d.len() {
        println!("{k:>3}  {:>18.12}  {:>18.12}  {:>10.6}", d.nu[k], d.g[k].norm(), d.g[k].arg());
    }
    let report = check_assumptions(&d, DEFAULT_G_TOL, DEFAULT_GAP_TOL);
    println!(
        "A1 (probe couples to every mode): {} (min |G_k| = {:.3e})",
        if report.probe_couples_all { "ok" } else { "VIOLATED" },
        report.min_weight
    );
    println!(
        "A2 (non-degenerate spectrum): {} (min gap = {:.3e}){}",
        if report.nondegenerate { "ok" } else { "VIOLATED" },
        report.min_gap,
        if report.near_degenerate { ", near-degenerate" } else { "" }
    );
    println!("symplectic residual: {:.3e}", verify_symplectic(&d).max());
    println!("diagonal-form residual: {:.3e}", diagonal_form_residual(&spec, &d));
    if let Some(c) = &net.chain {
        let cs = ChainSpec::new(c.n, c.omega, c.j)?;
        let mut pairs: Vec<(f64, f64)> = chain_spectrum(&cs).into_iter().zip(chain_g(&cs)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let dnu = pairs.iter().zip(&d.nu).map(|(p, v)| (p.0 - v).abs()).fold(0.0, f64::max);
        let dg = pairs.iter().zip(&d.g).map(|(p, g)| (p.1.abs() - g.norm()).abs()).fold(0.0, f64::max);
        println!("chain closed forms: max |Δν| = {dnu:.3e}, max |Δ|G|| = {dg:.3e}");
    }
    if !report.passed() {
        bail!(oscprobe::Error::AssumptionViolation { index: report.weak_modes.first().copied().unwrap_or(0), value: report.min_weight, tol: DEFAULT_G_TOL });
    }
    Ok(())
}

fn synthesize(g: &Global, t: Option<f64>) -> Result<()> {
    let mut l = load(g)?;
    if let Some(t) = t {
        l.cfg.protocol.t = Some(t);
    }
    let prep = Prepared::new(&l.cfg)?;
    let (point, basis) = match l.cfg.sweeps.as_ref().and_then(|s| s.profile.as_ref()) {
        Some(p) => (to_complex(&p.point), p.basis),
        None => (prep.points[0].clone(), prep.basis),
    };
    let m = build_m(&prep.decomp, prep.t, prep.deco.as_ref().map(|d| d.kappa.as_slice()))?;
    println!("t = {}  |det M| = {:.6e}  cond M = {:.3e}", prep.t, m.det.norm(), m.cond);
    let profile = prep.profile_for(&point, basis)?;
    let spp = g.samples_per_period.or_else(|| l.cfg.sweeps.as_ref().and_then(|s| s.profile.as_ref()).map(|p| p.samples_per_period)).unwrap_or(20);
    let dir = out_dir(g, Some(&l.cfg));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(pipeline::PROFILE_CSV);
    pipeline::write_profile(&path, &profile, spp)?;
    for (k, b) in profile.b.iter().enumerate() {
        println!("B_{k} = {:+.12e} {:+.12e}i", b.re, b.im);
    }
    println!("g_max = {:.6e}  rms g = {:.6e}", g_max(&profile, 40), profile.rms());
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(g: &Global) -> Result<()> {
    let l = load(g)?;
    let opts = RunOptions { samples_per_period: g.samples_per_period, overrides: l.overrides };
    let out = pipeline::run(&l.cfg, &l.text, opts)?;
    println!("{} points written to {}", out.records.len(), out.dir.display());
    for f in &out.files {
        println!("  {f}");
    }
    if !out.over_amplified.is_empty() {
        eprintln!(
            "warning: e^f > {} at points {:?}; corrected values there are dominated by shot noise",
            oscprobe::decoherence::MAX_AMPLIFICATION,
            out.over_amplified
        );
    }
    Ok(())
}

fn reconstruct(g: &Global, input: Option<&Path>, degree: Option<usize>, window: Option<f64>) -> Result<()> {
    let loaded = g.config.as_ref().map(|_| load(g)).transpose()?;
    let cfg = loaded.as_ref().map(|l| &l.cfg);
    let (dir, path) = match input {
        Some(p) => {
            let parent = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (g.out.clone().unwrap_or(parent), p.to_path_buf())
        }
        None => {
            let dir = out_dir(g, cfg);
            let path = dir.join(pipeline::MEASUREMENTS_CSV);
            (dir, path)
        }
    };
    let records = pipeline::read_measurements(&path).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        bail!(oscprobe::Error::InvalidInput(format!("{} holds no records", path.display())));
    }
    let nu = match cfg {
        Some(c) => Some(c.network.decompose()?.1.nu),
        None => None,
    };
    let n = records[0].point.len();
    let mut fit = FitOptions::for_modes(n);
    if let Some(d) = degree {
        fit.degree = d;
    }
    if let Some(w) = window {
        fit.window = w;
    }
    let rec = pipeline::reconstruct(&records, nu.as_deref(), Some(fit));
    print!("{rec}");
    if let Ok(m) = &rec.moments {
        std::fs::create_dir_all(&dir)?;
        let out = dir.join("moments.csv");
        pipeline::write_moments(&out, m)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn noise_scan(g: &Global, start: Option<f64>, stop: Option<f64>, points: Option<usize>, epsilon: Option<f64>) -> Result<()> {
    let loaded = g.config.as_ref().map(|_| load(g)).transpose()?;
    let cfg = loaded.as_ref().map(|l| &l.cfg);
    let (_, d) = network(g)?.decompose()?;
    let eps = epsilon
        .or_else(|| cfg.and_then(|c| c.noise).map(|n| n.epsilon))
        .ok_or_else(|| anyhow!(oscprobe::Error::Config("give --epsilon or a noise section".into())))?;
    let base = cfg.and_then(|c| c.sweeps.as_ref()).and_then(|s| s.noise.clone());
    let range = TimeRange {
        start: start.or(base.as_ref().map(|b| b.start)).unwrap_or(1.0),
        stop: stop.or(base.as_ref().map(|b| b.stop)).unwrap_or(1000.0),
        points: points.or(base.as_ref().map(|b| b.points)).unwrap_or(200),
    };
    let rows = pipeline::noise_sweep(&d, eps, &range)?;
    let dir = out_dir(g, cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(pipeline::NOISE_CSV);
    pipeline::write_noise(&path, d.len(), &rows)?;
    if let Some(last) = rows.last() {
        let t = last[0];
        println!("t = {t}: sqrt(lambda) vs |G_k| sqrt(eps t) (ascending)");
        let mut g_abs: Vec<f64> = d.g.iter().map(|x| x.norm()).collect();
        g_abs.sort_by(f64::total_cmp);
        for (k, (l, gk)) in last[1..].iter().zip(&g_abs).enumerate() {
            println!("  {k}: {l:.6e}  {:.6e}", gk * (eps * t).sqrt());
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn run_validate(g: &Global) -> Result<bool> {
    let (params, seed) = match &g.config {
        Some(_) => {
            let l = load(g)?;
            (Fig4Params::from_config(&l.cfg)?, l.cfg.seed_or_default())
        }
        None => (Fig4Params::default(), g.seed.unwrap_or(0)),
    };
    let checks = validate::run_all(&params, seed);
    for c in &checks {
        println!("{c}");
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
    Ok(passed == checks.len())
}

fn error_line(e: &anyhow::Error) -> String {
    let code = e
        .chain()
        .find_map(|c| c.downcast_ref::<oscprobe::Error>())
        .map(|c| c.code())
        .unwrap_or("Error");
    let msg = format!("{e:#}").replace('\n', " ");
    serde_json_line(code, &msg)
}

fn serde_json_line(code: &str, message: &str) -> String {
    serde_json::json!({ "error": code, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Diagonalize => diagonalize(g).map(|_| true),
        Command::Synthesize { t } => synthesize(g, *t).map(|_| true),
        Command::Simulate => simulate(g).map(|_| true),
        Command::Reconstruct { input, degree, window } => reconstruct(g, input.as_deref(), *degree, *window).map(|_| true),
        Command::NoiseScan { t_start, t_stop, points, epsilon } => noise_scan(g, *t_start, *t_stop, *points, *epsilon).map(|_| true),
        Command::Validate => run_validate(g),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}", serde_json_line("ValidationFailed", "one or more checks failed"));
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
