//! Oracle suites and the Fig. 4 reproduction checks, each reported as a
//! pass/fail line.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{bochner_check, estimate_temperature, ChiSample, TemperatureOptions};
use crate::chain::{chain_decomposition, chain_spectrum, ChainSpec};
use crate::config::{
    ChainConfig, ExperimentConfig, GridSpec, NetworkConfig, PerMode, ProtocolConfig, StateConfig,
};
use crate::decoherence::{brute_force_lindblad, damping_factor, eta_from_profile, validity_horizon, DecoherenceSpec};
use crate::dynamics::{brute_force_evolve, FockState};
use crate::error::{Error, Result};
use crate::math::{max_abs_diff, C64};
use crate::network::{
    check_assumptions, diagonal_form_residual, diagonalize, local_normal_convert, verify_symplectic, Basis, Direction, NetworkSpec,
};
use crate::noise::{default_noise_dt, delta_beta_covariance, monte_carlo_delta_beta, resolution_spectrum};
use crate::pipeline::Prepared;
use crate::protocol::{
    beta_from_profile, build_m, default_interaction_time, g_max, synthesize_profile, Displacement,
};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{:>2}] {:<4} {:<34} {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// The parameters of the eight-oscillator chain experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Params {
    pub n: usize,
    pub omega: f64,
    pub j: f64,
    pub kappa: f64,
    pub temperature: f64,
    pub epsilon: f64,
    pub t: f64,
}

impl Default for Fig4Params {
    fn default() -> Self {
        Self { n: 8, omega: 1.0, j: 0.2, kappa: 1e-6, temperature: 200.0, epsilon: 1e-5, t: 100.0 * 2.0 * PI }
    }
}

impl Fig4Params {
    /// Reads the chain, a uniform `κ`, the bath temperature, `ε` and `t`
    /// from a configuration of the Fig. 4 shape.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let bad = |what: &str| Error::Config(format!("validate needs {what} in the config"));
        let chain = cfg.network.chain.as_ref().ok_or_else(|| bad("a chain network"))?;
        let deco = cfg.decoherence.as_ref().ok_or_else(|| bad("a decoherence section"))?;
        let kappa = match deco.kappa {
            PerMode::All(k) => k,
            PerMode::Each(ref v) if !v.is_empty() && v.iter().all(|&k| k == v[0]) => v[0],
            _ => return Err(bad("a uniform decoherence.kappa")),
        };
        Ok(Self {
            n: chain.n,
            omega: chain.omega,
            j: chain.j,
            kappa,
            temperature: deco.temperature.ok_or_else(|| bad("decoherence.temperature"))?,
            epsilon: cfg.noise.ok_or_else(|| bad("a noise section"))?.epsilon,
            t: cfg.protocol.t.ok_or_else(|| bad("protocol.t"))?,
        })
    }

    pub fn chain(&self) -> Result<ChainSpec> {
        ChainSpec::new(self.n, self.omega, self.j)
    }

    pub fn deco(&self, nu: &[f64]) -> Result<DecoherenceSpec> {
        DecoherenceSpec::thermal_bath(vec![self.kappa; nu.len()], nu, self.temperature)
    }
}

fn check(id: usize, name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { id, name, passed, detail },
        Err(e) => Check { id, name, passed: false, detail: format!("error: {e}") },
    }
}

/// `|det M| > 0.01` throughout `[60, 700]/ω` and first exceeds it within `[30, 70]/ω`.
pub fn det_m_onset(p: &Fig4Params) -> Check {
    check(1, "det M invertibility onset", (|| {
        let d = chain_decomposition(&p.chain()?);
        let kappa = vec![p.kappa; p.n];
        let ts: Vec<f64> = (2..=1400).map(|i| 0.5 * i as f64 / p.omega).collect();
        let dets: Vec<f64> = ts
            .par_iter()
            .map(|&t| build_m(&d, t, Some(&kappa)).map(|m| m.det.norm()))
            .collect::<Result<_>>()?;
        let first = ts.iter().zip(&dets).find(|(_, &v)| v > 0.01).map(|(&t, _)| t);
        let late_min = ts
            .iter()
            .zip(&dets)
            .filter(|(&t, _)| t * p.omega >= 60.0)
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min);
        let first = first.unwrap_or(f64::INFINITY);
        let passed = (30.0..=70.0).contains(&(first * p.omega)) && late_min > 0.01;
        Ok((passed, format!("first |det M| > 0.01 at t = {first:.1}/ω; min over [60,700]/ω = {late_min:.4}")))
    })())
}

/// Peak coupling of the pulse reaching `β = (−1, …, −1)`.
pub fn pulse_amplitude(p: &Fig4Params) -> Check {
    check(2, "pulse amplitude g_max", (|| {
        let d = chain_decomposition(&p.chain()?);
        let kappa = vec![p.kappa; p.n];
        let target = Displacement::normal(vec![C64::new(-1.0, 0.0); p.n]);
        let profile = synthesize_profile(&d, &target, p.t, Some(&kappa))?;
        let gm = g_max(&profile, 40) / p.omega;
        Ok(((0.068..=0.092).contains(&gm), format!("g_max = {gm:.5} ω")))
    })())
}

/// `e^{−f}` at `η = (2, …, 2)` in the normal-mode basis.
pub fn boundary_damping(p: &Fig4Params) -> Check {
    check(3, "decoherence damping e^-f", (|| {
        let d = chain_decomposition(&p.chain()?);
        let deco = p.deco(&d.nu)?;
        let eta = vec![C64::new(2.0, 0.0); p.n];
        let target = Displacement::normal(eta.iter().map(|x| -0.5 * x).collect());
        let profile = synthesize_profile(&d, &target, p.t, Some(&deco.kappa))?;
        let f = damping_factor(&profile, &deco)?;
        let v = (-f).exp();
        Ok(((0.18..=0.26).contains(&v), format!("f = {f:.4}, e^-f = {v:.4} at Re η₁ = 2")))
    })())
}

/// `√λ_k` against `|G_k| √(εt)` for `t ≥ 400/ω`.
pub fn noise_asymptote(p: &Fig4Params) -> Check {
    check(4, "noise resolution asymptote", (|| {
        let d = chain_decomposition(&p.chain()?);
        let mut want_base: Vec<f64> = d.g.iter().map(|g| g.norm()).collect();
        want_base.sort_by(f64::total_cmp);
        let mut worst: f64 = 0.0;
        for i in 0..=16 {
            let t = (400.0 + 100.0 * i as f64) / p.omega;
            let got = resolution_spectrum(&delta_beta_covariance(&d, t, p.epsilon)?);
            for (g, w) in got.iter().zip(&want_base) {
                worst = worst.max((g / (w * (p.epsilon * t).sqrt()) - 1.0).abs());
            }
        }
        Ok((worst <= 0.05, format!("max relative deviation over t ∈ [400, 2000]/ω: {worst:.4}")))
    })())
}

pub fn horizon(p: &Fig4Params) -> Check {
    check(5, "validity horizon", (|| {
        let cs = p.chain()?;
        let d = chain_decomposition(&cs);
        let periods = validity_horizon(&p.deco(&d.nu)?, &cs.to_network()) / (2.0 * PI / p.omega);
        Ok(((1e3..=4e3).contains(&periods), format!("t_max = {periods:.0} periods")))
    })())
}

/// A random stable network with the probe coupled to every non-degenerate mode.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize) -> NetworkSpec {
    loop {
        let omega: Vec<f64> = (0..n).map(|_| rng.random_range(0.8..1.6)).collect();
        let mut j = DMatrix::zeros(n, n);
        let mut k = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in (a + 1)..n {
                let (x, y) = (rng.random_range(-0.12..0.12), rng.random_range(-0.06..0.06));
                j[(a, b)] = x;
                j[(b, a)] = x;
                k[(a, b)] = y;
                k[(b, a)] = y;
            }
        }
        let Ok(spec) = NetworkSpec::new(omega, j, k) else { continue };
        let Ok(d) = diagonalize(&spec) else { continue };
        let report = check_assumptions(&d, 1e-3, 1e-3);
        if report.passed() {
            return spec;
        }
    }
}

fn random_target(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::from_polar(2.0 * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI)))
        .collect()
}

/// Synthesis followed by the closed-form displacement reproduces random targets.
pub fn round_trip(seed: u64) -> Check {
    check(6, "synthesis round trip", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for case in 0..50 {
            let n = 1 + case % 6;
            let spec = random_network(&mut rng, n);
            let d = diagonalize(&spec)?;
            let t = default_interaction_time(&d, None)?;
            let alpha = random_target(&mut rng, n);
            let profile = synthesize_profile(&d, &Displacement::local(alpha.clone()), t, None)?;
            let back = local_normal_convert(&d, &beta_from_profile(&profile), Direction::NormalToLocal);
            let scale = alpha.iter().map(|x| x.norm()).fold(0.0, f64::max);
            worst = worst.max(max_abs_diff(&back, &alpha) / scale);
        }
        Ok((worst <= 1e-8, format!("50 networks, max relative error {worst:.2e}")))
    })())
}

/// A random single-mode state with negligible population near `dim`.
fn random_fock_state(rng: &mut ChaCha8Rng, case: usize, dim: usize) -> Result<(FockState, &'static str)> {
    let phase = rng.random_range(0.0..2.0 * PI);
    Ok(match case % 5 {
        0 => (FockState::coherent(C64::from_polar(rng.random_range(0.1..0.7), phase), dim)?, "coherent"),
        1 => (FockState::squeezed(rng.random_range(0.1..0.4), phase, dim)?, "squeezed"),
        2 => (FockState::thermal(rng.random_range(0.05..0.3), dim)?, "thermal"),
        3 => (FockState::number(1 + case % 2, dim)?, "number"),
        _ => (FockState::even_cat(C64::from_polar(rng.random_range(0.3..0.8), phase), dim)?, "cat"),
    })
}

fn random_single_mode(rng: &mut ChaCha8Rng) -> Result<crate::network::NormalModeDecomposition> {
    diagonalize(&NetworkSpec::uncoupled(vec![rng.random_range(0.8..1.2)])?)
}

/// Schrödinger integration in a truncated Fock space against the closed form.
pub fn schrodinger_oracle(seed: u64) -> Check {
    check(7, "closed form vs Schrödinger", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cases = Vec::new();
        for case in 0..20 {
            let d = random_single_mode(&mut rng)?;
            let (state, _) = random_fock_state(&mut rng, case, 25)?;
            let xi = C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..2.0 * PI));
            let t = default_interaction_time(&d, None)? * rng.random_range(1.0..2.0);
            cases.push((d, state, xi, t));
        }
        let errs: Vec<f64> = cases
            .par_iter()
            .map(|(d, state, xi, t)| {
                let profile = synthesize_profile(d, &Displacement::normal(vec![-0.5 * xi]), *t, None)?;
                let eta = -2.0 * beta_from_profile(&profile)[0];
                let (s1, s2) = brute_force_evolve(state, &profile)?;
                Ok((C64::new(s1, s2) - state.chi(&[eta])).norm())
            })
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        Ok((worst <= 1e-6, format!("20 cases, D = 25, max |Δχ| = {worst:.2e}")))
    })())
}

/// Master-equation integration against `χ(η) e^{−f}`.
pub fn lindblad_oracle(seed: u64) -> Check {
    check(8, "closed form vs Lindblad", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cases = Vec::new();
        for case in 0..10 {
            let d = random_single_mode(&mut rng)?;
            let nbar = if case % 2 == 0 { 0.0 } else { 0.5 };
            let gamma2 = if (case / 2) % 2 == 0 { 0.0 } else { 0.005 };
            let deco = DecoherenceSpec::new(vec![0.01], vec![nbar], 0.0, gamma2, 0.0)?;
            let (state, _) = random_fock_state(&mut rng, case, 25)?;
            let xi = C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..2.0 * PI));
            let t = default_interaction_time(&d, None)? * rng.random_range(1.0..2.0);
            cases.push((d, deco, state, xi, t));
        }
        let errs: Vec<f64> = cases
            .par_iter()
            .map(|(d, deco, state, xi, t)| {
                let target = Displacement::normal(vec![-0.5 * xi]);
                let profile = synthesize_profile(d, &target, *t, Some(&deco.kappa))?;
                let eta = eta_from_profile(&profile, deco)?[0];
                let f = damping_factor(&profile, deco)?;
                let (s1, s2) = brute_force_lindblad(state, &profile, deco)?;
                Ok((C64::new(s1, s2) - state.chi(&[eta]) * (-f).exp()).norm())
            })
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        Ok((worst <= 1e-5, format!("10 cases, κ = 0.01ω, max |Δ| = {worst:.2e}")))
    })())
}

/// Chain closed forms against numerical diagonalization.
pub fn chain_cross_check() -> Check {
    check(9, "chain closed forms", (|| {
        let (mut spec_err, mut symp, mut g_err, mut diag): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for n in 2..=10 {
            let cs = ChainSpec::new(n, 1.0, 0.2)?;
            let numeric = diagonalize(&cs.to_network())?;
            let mut closed = chain_spectrum(&cs);
            closed.sort_by(f64::total_cmp);
            spec_err = spec_err.max(closed.iter().zip(&numeric.nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            let analytic = chain_decomposition(&cs);
            symp = symp.max(verify_symplectic(&numeric).max()).max(verify_symplectic(&analytic).max());
            g_err = g_err.max(max_abs_diff(&numeric.g, &analytic.g));
            diag = diag.max(diagonal_form_residual(&cs.to_network(), &analytic));
        }
        Ok((
            spec_err <= 1e-10 && symp <= 1e-12 && g_err <= 1e-10 && diag <= 1e-10,
            format!("N = 2..10: spectrum {spec_err:.2e}, symplectic {symp:.2e}, G {g_err:.2e}, diagonal form {diag:.2e}"),
        ))
    })())
}

/// Monte Carlo noise covariance against the closed form.
pub fn noise_monte_carlo(seed: u64) -> Check {
    check(10, "noise covariance Monte Carlo", (|| {
        let spec = NetworkSpec::new(
            vec![1.0, 1.37],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.11, 0.11, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.05, 0.05, 0.0]),
        )?;
        let d = diagonalize(&spec)?;
        let (t, eps) = (20.0, 1e-3);
        let exact = delta_beta_covariance(&d, t, eps)?;
        let mc = monte_carlo_delta_beta(&d, t, eps, 10_000, default_noise_dt(&d), seed)?;
        let z = (0..4)
            .map(|i| (mc.cov[(i / 2, i % 2)] - exact[(i / 2, i % 2)]).abs() / mc.cov_stderr[(i / 2, i % 2)])
            .fold(0.0, f64::max);
        let diag = (0..2)
            .map(|k| (mc.cov[(k, k)] / (d.g[k].norm_sqr() * eps * t) - 1.0).abs())
            .fold(0.0, f64::max);
        Ok((z <= 5.0 && diag <= 0.05, format!("10⁴ realizations: max |z| = {z:.2}, diagonal deviation {diag:.4}")))
    })())
}

fn small_chain_config(state: StateConfig, basis: Basis, grid: GridSpec, shots: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        network: NetworkConfig { chain: Some(ChainConfig { n: 2, omega: 1.0, j: 0.1 }), ..NetworkConfig::default() },
        protocol: ProtocolConfig { t: None, basis, points: None, grid: Some(grid) },
        decoherence: None,
        noise: None,
        state,
        shots,
        seed: Some(seed),
        output: String::new(),
        sweeps: None,
    }
}

fn pipeline_samples(cfg: &ExperimentConfig) -> Result<Vec<ChiSample>> {
    let prep = Prepared::new(cfg)?;
    prep.points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let r = prep.measure(i, p)?;
            Ok(ChiSample::new(r.point, r.chi_corrected, r.chi_err))
        })
        .collect()
}

/// Finite-shot vacuum reconstruction covers the truth.
pub fn shot_coverage(seed: u64) -> Check {
    check(11, "statistical reconstruction", (|| {
        let grid = GridSpec::Lattice { step: 0.5, half_width: 1, modes: vec![0] };
        let cfg = small_chain_config(StateConfig::Vacuum {}, Basis::Local, grid, 10_000, seed);
        let samples = pipeline_samples(&cfg)?;
        let covered = samples
            .iter()
            .filter(|s| {
                let want = (-0.5 * s.point.iter().map(|x| x.norm_sqr()).sum::<f64>()).exp();
                (s.value - want).norm() <= 3.0 * s.err
            })
            .count();
        Ok((samples.len() == 9 && covered >= 8, format!("{covered}/{} points within 3σ at 10⁴ shots", samples.len())))
    })())
}

/// Thermal fit on exact normal-basis samples of the chain.
pub fn temperature_recovery(p: &Fig4Params) -> Check {
    check(12, "temperature recovery", (|| {
        let network = NetworkConfig::from_chain(&p.chain()?);
        let make = |state: StateConfig| ExperimentConfig {
            network: network.clone(),
            protocol: ProtocolConfig {
                t: Some(p.t),
                basis: Basis::Normal,
                points: None,
                grid: Some(GridSpec::Star { radius: 0.06, rings: 2, angles: 4, modes: (0..p.n).collect() }),
            },
            decoherence: None,
            noise: None,
            state,
            shots: 0,
            seed: None,
            output: String::new(),
            sweeps: None,
        };
        let nu = network.decompose()?.1.nu;
        let opts = TemperatureOptions::for_spectrum(&nu);
        let thermal = estimate_temperature(&pipeline_samples(&make(StateConfig::Thermal { temperature: p.temperature }))?, &nu, opts)?;
        let alpha = vec![[0.3, 0.0]; p.n];
        let coherent = estimate_temperature(&pipeline_samples(&make(StateConfig::Coherent { alpha }))?, &nu, opts)?;
        let rel = (thermal.temperature / p.temperature - 1.0).abs();
        Ok((
            rel <= 5e-3 && !thermal.not_thermal && coherent.not_thermal,
            format!(
                "T̂ = {:.4} (rel. error {rel:.1e}); coherent state {}",
                thermal.temperature,
                if coherent.not_thermal { "flagged NotThermal" } else { "NOT flagged" }
            ),
        ))
    })())
}

/// The catalog states used by the Bochner check, on a two-oscillator chain.
pub fn catalog() -> Vec<(&'static str, StateConfig, Vec<usize>)> {
    vec![
        ("vacuum", StateConfig::Vacuum {}, vec![0]),
        ("coherent", StateConfig::Coherent { alpha: vec![[0.4, -0.2], [0.1, 0.3]] }, vec![0]),
        ("thermal", StateConfig::Thermal { temperature: 0.7 }, vec![0]),
        ("squeezed", StateConfig::Squeezed { mode: 0, r: 0.4, phi: 0.6 }, vec![0]),
        ("two-mode squeezed", StateConfig::TwoModeSqueezed { modes: [0, 1], r: 0.3 }, vec![0, 1]),
        ("cat", StateConfig::Cat { mode: 0, alpha: [1.0, 0.5], dim: 30 }, vec![0]),
    ]
}

/// Catalog states pass the Bochner diagnostic; a forged normalization fails.
pub fn bochner_catalog() -> Check {
    check(13, "Bochner diagnostic", (|| {
        let mut worst = f64::INFINITY;
        let mut failed = Vec::new();
        for (name, state, modes) in catalog() {
            let grid = if modes.len() == 1 {
                GridSpec::Lattice { step: 0.4, half_width: 2, modes }
            } else {
                GridSpec::Lattice { step: 0.5, half_width: 1, modes }
            };
            let samples = pipeline_samples(&small_chain_config(state, Basis::Local, grid, 0, 0))?;
            let r = bochner_check(&samples)?;
            worst = worst.min(r.min_eigenvalue);
            if !(r.passed && r.min_eigenvalue >= -1e-10) {
                failed.push(name);
            }
        }
        let mut forged = pipeline_samples(&small_chain_config(
            StateConfig::Vacuum {},
            Basis::Local,
            GridSpec::Lattice { step: 0.4, half_width: 2, modes: vec![0] },
            0,
            0,
        ))?;
        let origin = forged
            .iter()
            .position(|s| s.point.iter().all(|x| x.norm() == 0.0))
            .ok_or_else(|| Error::InvalidInput("grid lacks the origin".into()))?;
        forged[origin].value = C64::new(1.5, 0.0);
        let forged_fails = !bochner_check(&forged)?.passed;
        Ok((
            failed.is_empty() && forged_fails,
            format!(
                "{} catalog states, smallest eigenvalue {worst:.2e}{}; forged χ(0) = 1.5 {}",
                catalog().len(),
                if failed.is_empty() { String::new() } else { format!(", failing: {}", failed.join(", ")) },
                if forged_fails { "rejected" } else { "ACCEPTED" }
            ),
        ))
    })())
}

/// Every check, in order.
pub fn run_all(p: &Fig4Params, seed: u64) -> Vec<Check> {
    vec![
        det_m_onset(p),
        pulse_amplitude(p),
        boundary_damping(p),
        noise_asymptote(p),
        horizon(p),
        round_trip(seed),
        schrodinger_oracle(seed),
        lindblad_oracle(seed),
        chain_cross_check(),
        noise_monte_carlo(seed),
        shot_coverage(seed),
        temperature_recovery(p),
        bochner_catalog(),
    ]
}
