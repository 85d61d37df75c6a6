//! Markovian decoherence in closed form.
//!
//! Each normal mode `b_k` is damped at rate `κ_k` towards a bath with
//! occupation `𝒩_k`; the qubit relaxes at `Γ₁` (bath occupation `𝒩_q`) and
//! dephases at `Γ₂`. The qubit readout becomes `χ(η) e^{−f}` with
//!
//! ```text
//! η_k  = 2i G_k* ∫₀ᵗ g(s) e^{iν_k s − κ_k s/2} ds
//! μ_k  = 2i G_k* / sinh(κ_k t/2) ∫₀ᵗ g(s) e^{iν_k s} sinh(κ_k s/2) ds
//! f    = γ t + Σ_k [ Δ_k (1 − e^{−κ_k t}) |μ_k(t)|² + κ_k Δ_k ∫₀ᵗ |μ_k(s)|² ds ]
//! ```
//!
//! where `Δ_k = 𝒩_k + ½` and `γ = Γ₁(𝒩_q + ½) + 2Γ₂`.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FockState, MeasurementRecord, LEAK_LIMIT};
use crate::error::{Error, Result};
use crate::math::{bose_occupation, exp_integral, sinh_weighted_integral, C64, I};
use crate::network::NetworkSpec;
use crate::ode::{self, OdeOptions};
use crate::protocol::CouplingProfile;
use crate::quad::{integrate_real, QuadOptions};

/// Amplification `e^f` beyond which a corrected value is flagged.
pub const MAX_AMPLIFICATION: f64 = 100.0;

/// Largest Fock truncation the Lindblad oracle accepts.
pub const MAX_LINDBLAD_DIM: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSpec {
    pub kappa: Vec<f64>,
    pub nbar: Vec<f64>,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default)]
    pub nq: f64,
}

impl DecoherenceSpec {
    pub fn new(kappa: Vec<f64>, nbar: Vec<f64>, gamma1: f64, gamma2: f64, nq: f64) -> Result<Self> {
        let spec = Self { kappa, nbar, gamma1, gamma2, nq };
        spec.validate()?;
        Ok(spec)
    }

    /// Modes damped at `kappa` into baths at temperature `T`.
    pub fn thermal_bath(kappa: Vec<f64>, nu: &[f64], temperature: f64) -> Result<Self> {
        let nbar = nu.iter().map(|&v| bose_occupation(v, temperature)).collect();
        Self::new(kappa, nbar, 0.0, 0.0, 0.0)
    }

    /// No decoherence on any of `n` modes.
    pub fn none(n: usize) -> Self {
        Self { kappa: vec![0.0; n], nbar: vec![0.0; n], gamma1: 0.0, gamma2: 0.0, nq: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: &f64| x.is_finite() && *x >= 0.0;
        if self.kappa.len() != self.nbar.len() {
            return Err(Error::InvalidInput("kappa and nbar must have one entry per mode".into()));
        }
        if !self.kappa.iter().all(ok) || !self.nbar.iter().all(ok) {
            return Err(Error::InvalidInput("decoherence rates and occupations must be non-negative".into()));
        }
        if ![self.gamma1, self.gamma2, self.nq].iter().all(ok) {
            return Err(Error::InvalidInput("qubit rates must be non-negative".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// `γ = Γ₁(𝒩_q + ½) + 2Γ₂`.
    pub fn gamma(&self) -> f64 {
        self.gamma1 * (self.nq + 0.5) + 2.0 * self.gamma2
    }

    /// `Δ_k = 𝒩_k + ½`.
    pub fn delta(&self, k: usize) -> f64 {
        self.nbar[k] + 0.5
    }

    fn check_modes(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.len() != n {
            return Err(Error::InvalidInput(format!(
                "decoherence spec covers {} modes, network has {n}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `η_k = 2i G_k* ∫₀ᵗ g(s) e^{iν_k s − κ_k s/2} ds`, in closed form.
pub fn eta_from_profile(profile: &CouplingProfile, deco: &DecoherenceSpec) -> Result<Vec<C64>> {
    let d = &profile.decomp;
    deco.check_modes(d.len())?;
    let tones = profile.tones();
    Ok((0..d.len())
        .map(|k| {
            let sum: C64 = tones
                .iter()
                .map(|(c, w)| c * exp_integral(I * (d.nu[k] + w) - 0.5 * deco.kappa[k], profile.t))
                .sum();
            2.0 * I * d.g[k].conj() * sum
        })
        .collect())
}

/// `μ_k(s)` for every mode, at any `s ∈ [0, t]`. The `κ_k → 0` limit
/// `(2i G_k*/s) ∫₀ˢ g(u) u e^{iν_k u} du` is built into the kernel.
pub fn mu_k(profile: &CouplingProfile, deco: &DecoherenceSpec, s: f64) -> Result<Vec<C64>> {
    let d = &profile.decomp;
    deco.check_modes(d.len())?;
    let tones = profile.tones();
    Ok((0..d.len()).map(|k| mu_single(&tones, d.g[k], d.nu[k], deco.kappa[k], s)).collect())
}

fn mu_single(tones: &[(C64, f64)], g: C64, nu: f64, kappa: f64, s: f64) -> C64 {
    let sum: C64 = tones
        .iter()
        .map(|(c, w)| c * sinh_weighted_integral(I * (nu + w), 0.5 * kappa, s))
        .sum();
    2.0 * I * g.conj() * sum
}

/// The damping exponent `f ≥ 0` at the end of the profile.
pub fn damping_factor(profile: &CouplingProfile, deco: &DecoherenceSpec) -> Result<f64> {
    let d = &profile.decomp;
    deco.check_modes(d.len())?;
    let t = profile.t;
    let tones = profile.tones();
    // one panel per half period of the fastest beat in |μ_k(s)|²
    let panels = ((t * 2.0 * d.nu_max() / std::f64::consts::PI).ceil() as usize + 1).min(100_000);
    let opts = QuadOptions::default().with_rel_tol(1e-8).with_panels(panels);
    let terms: Vec<f64> = (0..d.len())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let kappa = deco.kappa[k];
            if kappa == 0.0 {
                return Ok(0.0);
            }
            let delta = deco.delta(k);
            let end = mu_single(&tones, d.g[k], d.nu[k], kappa, t).norm_sqr();
            let tau = integrate_real(|s| mu_single(&tones, d.g[k], d.nu[k], kappa, s).norm_sqr(), 0.0, t, opts)?;
            Ok(delta * (-(kappa * t)).exp_m1().abs() * end + kappa * delta * tau)
        })
        .collect::<Result<_>>()?;
    Ok((deco.gamma() * t + terms.iter().sum::<f64>()).max(0.0))
}

/// `χ(η) e^{−f}`.
pub fn measured_signal(chi_true: C64, f: f64) -> C64 {
    chi_true * (-f).exp()
}

/// The correction factor `e^f` exceeded [`MAX_AMPLIFICATION`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverAmplified {
    pub factor: f64,
}

impl fmt::Display for OverAmplified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "correction factor e^f = {:.3e} exceeds {MAX_AMPLIFICATION}", self.factor)
    }
}

/// Undoes the damping: `χ = (s₁ + i s₂) e^f`, with the error scaled alike.
pub fn correct_signal(record: &MeasurementRecord, f: f64) -> (MeasurementRecord, Option<OverAmplified>) {
    let factor = f.exp();
    let mut out = record.clone();
    out.f = f;
    out.chi_corrected = C64::new(record.est_s1, record.est_s2) * factor;
    out.chi_err = record.stderr * factor;
    let warning = (factor > MAX_AMPLIFICATION).then_some(OverAmplified { factor });
    (out, warning)
}

/// `κ_k = 2π [f_env(ν_k)]²`.
pub fn kappa_from_spectral_density<F: Fn(f64) -> f64>(f_env: F, nu: &[f64]) -> Vec<f64> {
    nu.iter().map(|&v| 2.0 * std::f64::consts::PI * f_env(v).powi(2)).collect()
}

/// `min_k [1/(κ_k 𝒩_k)] · min_n ω_n / max |K_nm|`; infinite when there are
/// no active couplings or no thermal damping.
pub fn validity_horizon(deco: &DecoherenceSpec, spec: &NetworkSpec) -> f64 {
    let rate = deco
        .kappa
        .iter()
        .zip(&deco.nbar)
        .map(|(k, n)| k * n)
        .fold(0.0, f64::max);
    let k_max = spec.active().amax();
    if rate == 0.0 || k_max == 0.0 {
        return f64::INFINITY;
    }
    let omega_min = spec.omega().iter().copied().fold(f64::INFINITY, f64::min);
    omega_min / k_max / rate
}

/// Applies `X ↦ op(X)` on a column-major `D × D` block.
struct Block<'a> {
    x: &'a [C64],
    d: usize,
}

impl Block<'_> {
    fn at(&self, m: isize, n: isize) -> C64 {
        let d = self.d as isize;
        if m < 0 || n < 0 || m >= d || n >= d {
            C64::new(0.0, 0.0)
        } else {
            self.x[(m + d * n) as usize]
        }
    }
}

/// Adds `scale · (h X + sign · X h)` with `h = u b† + u* b`.
fn add_hamiltonian(x: &Block, u: C64, scale: C64, sign: f64, out: &mut [C64]) {
    let d = x.d;
    let v = u.conj();
    for n in 0..d {
        for m in 0..d {
            let (mi, ni) = (m as isize, n as isize);
            let (mf, nf) = (m as f64, n as f64);
            let left = u * mf.sqrt() * x.at(mi - 1, ni) + v * (mf + 1.0).sqrt() * x.at(mi + 1, ni);
            let right = u * (nf + 1.0).sqrt() * x.at(mi, ni + 1) + v * nf.sqrt() * x.at(mi, ni - 1);
            out[m + d * n] += scale * (left + sign * right);
        }
    }
}

/// Adds the oscillator dissipator of one mode acting on a block.
fn add_dissipator(x: &Block, kappa: f64, nbar: f64, out: &mut [C64]) {
    let d = x.d;
    let top = d - 1;
    let down = 0.5 * kappa * (nbar + 1.0);
    let up = 0.5 * kappa * nbar;
    // truncated b b† has no entry on the top level
    let bbd = |m: usize| if m < top { (m + 1) as f64 } else { 0.0 };
    for n in 0..d {
        for m in 0..d {
            let (mi, ni) = (m as isize, n as isize);
            let (mf, nf) = (m as f64, n as f64);
            let xmn = x.at(mi, ni);
            let jump_down = 2.0 * ((mf + 1.0) * (nf + 1.0)).sqrt() * x.at(mi + 1, ni + 1);
            let jump_up = 2.0 * (mf * nf).sqrt() * x.at(mi - 1, ni - 1);
            out[m + d * n] += down * (jump_down - (mf + nf) * xmn) + up * (jump_up - (bbd(m) + bbd(n)) * xmn);
        }
    }
}

/// Integrates the full qubit–oscillator master equation for a single normal
/// mode in a truncated Fock space, starting from `|+⟩⟨+| ⊗ ρ`. Returns
/// `(⟨σ₁⟩, ⟨σ₂⟩)` at the end of the profile.
pub fn brute_force_lindblad(
    initial: &FockState,
    profile: &CouplingProfile,
    deco: &DecoherenceSpec,
) -> Result<(f64, f64)> {
    let decomp = &profile.decomp;
    if decomp.len() != 1 || initial.modes() != 1 {
        return Err(Error::InvalidInput("the Lindblad oracle handles a single mode only".into()));
    }
    deco.check_modes(1)?;
    let d = initial.dim();
    if d > MAX_LINDBLAD_DIM {
        return Err(Error::InvalidInput(format!("truncation {d} exceeds {MAX_LINDBLAD_DIM}")));
    }
    let leak = initial.boundary_population();
    if leak > LEAK_LIMIT {
        return Err(Error::TruncationLeak { population: leak, limit: LEAK_LIMIT });
    }
    let size = d * d;
    let tones = profile.tones();
    let (nu, g) = (decomp.nu[0], decomp.g[0]);
    let (kappa, nbar) = (deco.kappa[0], deco.nbar[0]);
    let (relax, excite) = (deco.gamma1 * (deco.nq + 1.0), deco.gamma1 * deco.nq);
    let gamma = deco.gamma();

    // blocks ee, eg, ge, gg
    let half: Vec<C64> = initial.rho().iter().map(|x| x * 0.5).collect();
    let mut y: Vec<C64> = (0..4).flat_map(|_| half.iter().copied()).collect();

    let opts = OdeOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        max_step: 2.0 * std::f64::consts::PI / nu / 16.0,
        ..OdeOptions::default()
    };
    let boundary = |y: &[C64]| -> f64 { (y[(d - 1) * (d + 1)] + y[3 * size + (d - 1) * (d + 1)]).re };
    ode::integrate(
        |s, y, dy| {
            let gs: f64 = tones.iter().map(|(c, w)| c * C64::new(0.0, w * s).exp()).sum::<C64>().re;
            let u = gs * g.conj() * C64::new(0.0, nu * s).exp();
            dy.fill(C64::new(0.0, 0.0));
            // (qubit sign on the left, sign on the right) for ee, eg, ge, gg
            let signs = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
            for (b, &(l, r)) in signs.iter().enumerate() {
                let x = Block { x: &y[b * size..(b + 1) * size], d };
                let out = &mut dy[b * size..(b + 1) * size];
                // −i(σ_l h X − σ_r X h)
                add_hamiltonian(&x, u, -I * l, -r / l, out);
                add_dissipator(&x, kappa, nbar, out);
            }
            for i in 0..size {
                let (ee, eg, ge, gg) = (y[i], y[size + i], y[2 * size + i], y[3 * size + i]);
                dy[i] += -relax * ee + excite * gg;
                dy[3 * size + i] += relax * ee - excite * gg;
                dy[size + i] -= gamma * eg;
                dy[2 * size + i] -= gamma * ge;
            }
        },
        &mut y,
        0.0,
        profile.t,
        opts,
        |_, y| {
            let pop = boundary(y);
            if pop > LEAK_LIMIT {
                Err(Error::TruncationLeak { population: pop, limit: LEAK_LIMIT })
            } else {
                Ok(())
            }
        },
    )?;

    let full = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let b = 2 * (i / d) + j / d;
        y[b * size + (i % d) + d * (j % d)]
    });
    let trace = full.trace().re;
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::Integration(format!("trace drifted to {trace:.12}")));
    }
    let herm = (&full + full.adjoint()) * C64::new(0.5, 0.0);
    let floor = herm.symmetric_eigen().eigenvalues.min();
    if floor < -1e-8 {
        return Err(Error::Integration(format!("density matrix lost positivity ({floor:.3e})")));
    }
    let signal: C64 = 2.0 * (0..d).map(|m| y[2 * size + m * (d + 1)]).sum::<C64>();
    Ok((signal.re, signal.im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_decomposition, ChainSpec};
    use crate::dynamics::{brute_force_evolve, ShotEstimate};
    use crate::network::{diagonalize, Basis, NormalModeDecomposition};
    use crate::protocol::{beta_from_profile, default_interaction_time, synthesize_profile, Displacement};
    use crate::quad::integrate;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pair() -> NormalModeDecomposition {
        let spec = NetworkSpec::new(
            vec![1.0, 1.37],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.11, 0.11, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.05, 0.05, 0.0]),
        )
        .unwrap();
        diagonalize(&spec).unwrap()
    }

    fn free() -> NormalModeDecomposition {
        diagonalize(&NetworkSpec::uncoupled(vec![1.0]).unwrap()).unwrap()
    }

    fn quad_eta(p: &CouplingProfile, kappa: &[f64]) -> Vec<C64> {
        let d = &p.decomp;
        let panels = (p.t * d.nu_max()).ceil() as usize + 1;
        (0..d.len())
            .map(|k| {
                let v = integrate(
                    |s| p.evaluate_g(s) * C64::new(-0.5 * kappa[k] * s, d.nu[k] * s).exp(),
                    0.0,
                    p.t,
                    QuadOptions::default().with_rel_tol(1e-12).with_panels(panels),
                )
                .unwrap();
                2.0 * I * d.g[k].conj() * v
            })
            .collect()
    }

    fn profile(d: &NormalModeDecomposition) -> CouplingProfile {
        let t = default_interaction_time(d, None).unwrap();
        let target: Vec<C64> = (0..d.len()).map(|k| c(0.3 - 0.2 * k as f64, 0.1 + 0.15 * k as f64)).collect();
        synthesize_profile(d, &Displacement::normal(target), t, None).unwrap()
    }

    #[test]
    fn eta_without_damping_is_minus_twice_beta() {
        let p = profile(&pair());
        let eta = eta_from_profile(&p, &DecoherenceSpec::none(2)).unwrap();
        for (e, b) in eta.iter().zip(beta_from_profile(&p)) {
            assert!((e + 2.0 * b).norm() < 1e-12);
        }
        let zero = CouplingProfile::zero(&pair(), 10.0);
        assert!(eta_from_profile(&zero, &DecoherenceSpec::none(2)).unwrap().iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn eta_strong_damping_matches_quadrature() {
        let d = free();
        let t = 10.0;
        // a single tone resonant with the mode
        let p = CouplingProfile { b: vec![c(0.0, 0.5)], t, decomp: d.clone(), kappa: None };
        let kappa = vec![1.0];
        let deco = DecoherenceSpec::new(kappa.clone(), vec![0.0], 0.0, 0.0, 0.0).unwrap();
        let eta = eta_from_profile(&p, &deco).unwrap();
        let want = quad_eta(&p, &kappa);
        assert!((eta[0] - want[0]).norm() < 1e-10);
        let undamped = eta_from_profile(&p, &DecoherenceSpec::none(1)).unwrap();
        // the resonant part shrinks by (1 − e^{−κt/2})/(κt/2)
        let ratio = eta[0].norm() / undamped[0].norm();
        assert!((ratio - (1.0 - (-5.0f64).exp()) / 5.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn mu_limit_and_quadrature() {
        let p = profile(&pair());
        let s = 0.8 * p.t;
        let zero = mu_k(&p, &DecoherenceSpec::none(2), s).unwrap();
        let tiny = mu_k(&p, &DecoherenceSpec::new(vec![1e-13; 2], vec![0.0; 2], 0.0, 0.0, 0.0).unwrap(), s).unwrap();
        for (a, b) in zero.iter().zip(&tiny) {
            assert!((a - b).norm() < 1e-10);
        }

        let d = &p.decomp;
        let panels = (s * d.nu_max()).ceil() as usize + 1;
        let opts = QuadOptions::default().with_rel_tol(1e-12).with_panels(panels);
        // κ = 0: (2iG*/s) ∫ g u e^{iνu} du
        for k in 0..2 {
            let v = integrate(|u| p.evaluate_g(u) * u * C64::new(0.0, d.nu[k] * u).exp(), 0.0, s, opts).unwrap();
            let want = 2.0 * I * d.g[k].conj() * v / s;
            assert!((zero[k] - want).norm() < 1e-9);
        }
        let kappa = 1e-6;
        let deco = DecoherenceSpec::new(vec![kappa; 2], vec![0.0; 2], 0.0, 0.0, 0.0).unwrap();
        let got = mu_k(&p, &deco, s).unwrap();
        for k in 0..2 {
            let v = integrate(
                |u| p.evaluate_g(u) * (0.5 * kappa * u).sinh() * C64::new(0.0, d.nu[k] * u).exp(),
                0.0,
                s,
                opts,
            )
            .unwrap();
            let want = 2.0 * I * d.g[k].conj() * v / (0.5 * kappa * s).sinh();
            assert!((got[k] - want).norm() < 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn damping_limits() {
        let p = profile(&pair());
        assert_eq!(damping_factor(&p, &DecoherenceSpec::none(2)).unwrap(), 0.0);
        let qubit_only = DecoherenceSpec::new(vec![0.0; 2], vec![3.0; 2], 0.01, 0.002, 0.5).unwrap();
        let f = damping_factor(&p, &qubit_only).unwrap();
        assert!((f - (0.01 * 1.0 + 0.004) * p.t).abs() < 1e-14);
        let osc = DecoherenceSpec::new(vec![1e-3; 2], vec![0.5; 2], 0.0, 0.0, 0.0).unwrap();
        assert!(damping_factor(&p, &osc).unwrap() > 0.0);
        // κ → 0 continuity
        let tiny = DecoherenceSpec::new(vec![1e-13; 2], vec![0.5; 2], 0.0, 0.0, 0.0).unwrap();
        assert!(damping_factor(&p, &tiny).unwrap() < 1e-9);
    }

    #[test]
    fn signal_and_correction() {
        assert_eq!(measured_signal(c(0.3, 0.2), 0.0), c(0.3, 0.2));
        assert!((measured_signal(c(1.0, 0.0), 2f64.ln()) - 0.5).norm() < 1e-15);

        let rec = MeasurementRecord::new(vec![c(0.1, 0.0)], Basis::Normal, 100, ShotEstimate { s1: 0.2, s2: -0.1, stderr: 0.01 });
        let (out, warn) = correct_signal(&rec, 5f64.ln());
        assert!((out.chi_err - 0.05).abs() < 1e-15 && warn.is_none());
        let (same, _) = correct_signal(&rec, 0.0);
        assert_eq!(same, rec);
        let (_, warn) = correct_signal(&rec, 5.0);
        assert!(warn.is_some());

        let truth = c(0.4, -0.3);
        let f = 1.7;
        let m = measured_signal(truth, f);
        let exact = MeasurementRecord::exact(vec![c(0.0, 0.0)], Basis::Local, (m.re, m.im));
        let (back, _) = correct_signal(&exact, f);
        assert!((back.chi_corrected - truth).norm() < 1e-15);
    }

    #[test]
    fn spectral_density_rates() {
        assert_eq!(kappa_from_spectral_density(|_| 0.0, &[1.0, 2.0]), vec![0.0, 0.0]);
        let k = kappa_from_spectral_density(|_| 0.1, &[1.0, 2.0]);
        assert!(k.iter().all(|&x| (x - 2.0 * std::f64::consts::PI * 0.01).abs() < 1e-15));
        let k = kappa_from_spectral_density(|v: f64| 0.1 * v.sqrt(), &[1.0, 2.0]);
        assert!((k[1] / k[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn horizon_scaling() {
        let cs = ChainSpec::new(8, 1.0, 0.2).unwrap();
        let spec = cs.to_network();
        let d = chain_decomposition(&cs);
        assert_eq!(validity_horizon(&DecoherenceSpec::none(8), &spec), f64::INFINITY);
        let deco = DecoherenceSpec::thermal_bath(vec![1e-6; 8], &d.nu, 200.0).unwrap();
        let t = validity_horizon(&deco, &spec);
        let periods = t / (2.0 * std::f64::consts::PI);
        assert!((1e3..4e3).contains(&periods), "{periods}");
        let mut doubled = deco.clone();
        doubled.kappa.iter_mut().for_each(|k| *k *= 2.0);
        assert!((validity_horizon(&doubled, &spec) - t / 2.0).abs() < 1e-9 * t);
    }

    #[test]
    fn lindblad_without_rates_matches_schrodinger() {
        let d = free();
        let t = default_interaction_time(&d, None).unwrap();
        let p = synthesize_profile(&d, &Displacement::normal(vec![c(-0.3, 0.2)]), t, None).unwrap();
        let state = FockState::coherent(c(0.2, 0.3), 20).unwrap();
        let a = brute_force_lindblad(&state, &p, &DecoherenceSpec::none(1)).unwrap();
        let b = brute_force_evolve(&state, &p).unwrap();
        assert!((a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8);
    }

    #[test]
    fn lindblad_matches_closed_form() {
        let d = free();
        let t = default_interaction_time(&d, None).unwrap();
        let deco = DecoherenceSpec::new(vec![0.01], vec![0.5], 0.0, 0.005, 0.0).unwrap();
        let target = vec![c(-0.35, 0.15)];
        let p = synthesize_profile(&d, &Displacement::normal(target), t, Some(&deco.kappa)).unwrap();
        let state = FockState::thermal(0.2, 25).unwrap();
        let got = brute_force_lindblad(&state, &p, &deco).unwrap();
        let eta = eta_from_profile(&p, &deco).unwrap();
        let f = damping_factor(&p, &deco).unwrap();
        let want = measured_signal(state.chi(&eta), f);
        assert!((c(got.0, got.1) - want).norm() < 1e-5, "{got:?} vs {want}");
    }

    #[test]
    fn dephasing_only_scales_closed_system() {
        let d = free();
        let t = default_interaction_time(&d, None).unwrap();
        let p = synthesize_profile(&d, &Displacement::normal(vec![c(0.2, -0.25)]), t, None).unwrap();
        let state = FockState::vacuum(20).unwrap();
        let deco = DecoherenceSpec::new(vec![0.0], vec![0.0], 0.0, 0.01, 0.0).unwrap();
        let a = brute_force_lindblad(&state, &p, &deco).unwrap();
        let b = brute_force_evolve(&state, &p).unwrap();
        let damp = (-2.0 * 0.01 * t).exp();
        assert!((a.0 - b.0 * damp).abs() < 1e-8 && (a.1 - b.1 * damp).abs() < 1e-8);
    }
}
