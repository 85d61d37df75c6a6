//! Coupling-profile synthesis.
//!
//! The qubit–network coupling is restricted to the ansatz
//!
//! ```text
//! g(s) = (i/t) Σ_l [ (B_l / G_l*) e^{-iν_l s} − (B_l* / G_l) e^{iν_l s} ]
//! ```
//!
//! which is real by construction. The achieved normal-mode displacement is
//! linear in `B`: `(−β*, β) = M (−B*, B)`, with `M → 𝟙` for long interaction
//! times on non-degenerate spectra. Inverting `M` gives the profile that
//! realizes any target displacement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp_integral, C64, I};
use crate::network::{local_normal_convert, Basis, Direction, NormalModeDecomposition, DEFAULT_GAP_TOL, DEFAULT_G_TOL};

/// Largest condition number of `M` accepted for synthesis.
pub const MAX_CONDITION: f64 = 1e8;

/// `π / min_{j≠k} |ν_j − ν_k|`. A single mode has no gap to resolve; there
/// the `±ν` pair of the counter-rotating block sets the scale, `π / (2ν)`.
pub fn min_interaction_time(decomp: &NormalModeDecomposition, gap_tol: f64) -> Result<f64> {
    match decomp.min_gap() {
        None => Ok(std::f64::consts::PI / (2.0 * decomp.nu[0])),
        Some(gap) if gap <= gap_tol => Err(Error::DegenerateSpectrum { gap, tol: gap_tol }),
        Some(gap) => Ok(std::f64::consts::PI / gap),
    }
}

/// `max(2 · min_interaction_time, requested)`.
pub fn default_interaction_time(decomp: &NormalModeDecomposition, requested: Option<f64>) -> Result<f64> {
    let floor = 2.0 * min_interaction_time(decomp, DEFAULT_GAP_TOL)?;
    Ok(requested.map_or(floor, |t| t.max(floor)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrix {
    /// The full `2N × 2N` matrix `[[M₁, M₂], [M₂*, M₁*]]`.
    pub m: DMatrix<C64>,
    pub t: f64,
    pub kappa: Option<Vec<f64>>,
    pub det: C64,
    pub cond: f64,
}

impl MMatrix {
    fn block(&self, r: usize, c: usize) -> DMatrix<C64> {
        let n = self.m.nrows() / 2;
        self.m.view((r * n, c * n), (n, n)).into_owned()
    }

    pub fn m1(&self) -> DMatrix<C64> {
        self.block(0, 0)
    }

    pub fn m2(&self) -> DMatrix<C64> {
        self.block(0, 1)
    }

    pub fn m3(&self) -> DMatrix<C64> {
        self.block(1, 0)
    }

    pub fn m4(&self) -> DMatrix<C64> {
        self.block(1, 1)
    }
}

fn check_weights(decomp: &NormalModeDecomposition) -> Result<()> {
    for (index, g) in decomp.g.iter().enumerate() {
        if g.norm() <= DEFAULT_G_TOL {
            return Err(Error::AssumptionViolation { index, value: g.norm(), tol: DEFAULT_G_TOL });
        }
    }
    Ok(())
}

fn validate_kappa(kappa: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(k) = kappa {
        if k.len() != n || k.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput(format!("kappa must be {n} non-negative rates")));
        }
    }
    Ok(())
}

/// Closed-form `M`. With damping rates `κ_k` each row `k` picks up the factor
/// `e^{−κ_k s/2}` inside the time integrals.
pub fn build_m(decomp: &NormalModeDecomposition, t: f64, kappa: Option<&[f64]>) -> Result<MMatrix> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(format!("interaction time must be positive, got {t}")));
    }
    check_weights(decomp)?;
    let n = decomp.len();
    validate_kappa(kappa, n)?;
    let (nu, g) = (&decomp.nu, &decomp.g);
    let rate = |k: usize| kappa.map_or(0.0, |kk| kk[k]);

    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let half = 0.5 * rate(k);
        for l in 0..n {
            let integral = exp_integral(-(I * (nu[k] - nu[l]) + half), t) / t;
            let m1 = if k == l { integral } else { g[k] / g[l] * integral };
            let m2 = g[k] / g[l].conj() / t * exp_integral(-(I * (nu[k] + nu[l]) + half), t);
            m[(k, l)] = m1;
            m[(k, l + n)] = m2;
            m[(k + n, l)] = m2.conj();
            m[(k + n, l + n)] = m1.conj();
        }
    }
    let det = m.clone().lu().determinant();
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let cond = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    Ok(MMatrix { m, t, kappa: kappa.map(<[f64]>::to_vec), det, cond })
}

/// A displacement to be realized, in either basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub basis: Basis,
    pub values: Vec<C64>,
}

impl Displacement {
    pub fn local(values: Vec<C64>) -> Self {
        Self { basis: Basis::Local, values }
    }

    pub fn normal(values: Vec<C64>) -> Self {
        Self { basis: Basis::Normal, values }
    }

    /// The normal-mode displacement `β` this target corresponds to.
    pub fn to_normal(&self, decomp: &NormalModeDecomposition) -> Vec<C64> {
        match self.basis {
            Basis::Normal => self.values.clone(),
            Basis::Local => local_normal_convert(decomp, &self.values, Direction::LocalToNormal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub b: Vec<C64>,
    pub t: f64,
    pub decomp: NormalModeDecomposition,
    /// Damping rates the profile was synthesized against, if any.
    pub kappa: Option<Vec<f64>>,
}

impl CouplingProfile {
    pub fn zero(decomp: &NormalModeDecomposition, t: f64) -> Self {
        Self { b: vec![C64::new(0.0, 0.0); decomp.len()], t, decomp: decomp.clone(), kappa: None }
    }

    /// `g(s) = Σ_j c_j e^{iω_j s}` as `(c_j, ω_j)` pairs, `2N` of them.
    pub fn tones(&self) -> Vec<(C64, f64)> {
        let inv_t = 1.0 / self.t;
        let mut out = Vec::with_capacity(2 * self.b.len());
        for ((b, g), &nu) in self.b.iter().zip(&self.decomp.g).zip(&self.decomp.nu) {
            out.push((I * inv_t * b / g.conj(), -nu));
            out.push((-I * inv_t * b.conj() / g, nu));
        }
        out
    }

    /// Complex value of the ansatz; its imaginary part is roundoff.
    pub fn evaluate_complex(&self, s: f64) -> C64 {
        self.tones().iter().map(|(c, w)| c * C64::new(0.0, w * s).exp()).sum()
    }

    pub fn evaluate_g(&self, s: f64) -> f64 {
        let v = self.evaluate_complex(s);
        debug_assert!(v.im.abs() <= 1e-12 * v.norm().max(1e-300) + 1e-300 || v.im.abs() < 1e-15);
        v.re
    }

    /// Root mean square of `g` over `[0, t]`, in closed form.
    pub fn rms(&self) -> f64 {
        let tones = self.tones();
        let mut acc = C64::new(0.0, 0.0);
        for (c1, w1) in &tones {
            for (c2, w2) in &tones {
                acc += c1 * c2 * exp_integral(I * (w1 + w2), self.t);
            }
        }
        (acc.re / self.t).max(0.0).sqrt()
    }

    /// Samples `(s, g(s))` with `samples_per_period` points per period of the
    /// fastest normal mode.
    pub fn samples(&self, samples_per_period: usize) -> Vec<(f64, f64)> {
        let period = 2.0 * std::f64::consts::PI / self.decomp.nu_max();
        let steps = ((self.t / period) * samples_per_period.max(1) as f64).ceil() as usize;
        let steps = steps.max(1);
        (0..=steps)
            .map(|i| {
                let s = self.t * i as f64 / steps as f64;
                (s, self.evaluate_g(s))
            })
            .collect()
    }
}

/// Solves for the profile coefficients realizing `target`. Without damping
/// the target is the displacement itself; with rates `κ` the achieved
/// damped displacement `η` satisfies `η = −2 β_target`.
pub fn synthesize_profile(
    decomp: &NormalModeDecomposition,
    target: &Displacement,
    t: f64,
    kappa: Option<&[f64]>,
) -> Result<CouplingProfile> {
    let n = decomp.len();
    if target.values.len() != n {
        return Err(Error::InvalidInput(format!("target has {} components, network has {n}", target.values.len())));
    }
    if target.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::InvalidInput("target must be finite".into()));
    }
    let mm = build_m(decomp, t, kappa)?;
    if !(mm.cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond: mm.cond, limit: MAX_CONDITION });
    }
    let beta = target.to_normal(decomp);
    let rhs = DVector::from_iterator(2 * n, beta.iter().map(|b| -b.conj()).chain(beta.iter().copied()));
    let x = mm
        .m
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned { cond: f64::INFINITY, limit: MAX_CONDITION })?;

    // x = (−B*, B); both halves must agree
    let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mismatch = (0..n).map(|k| (x[k] + x[k + n].conj()).norm()).fold(0.0, f64::max);
    let allowed = 1e-10f64.max(100.0 * mm.cond * f64::EPSILON) * scale.max(1e-300);
    if scale > 0.0 && mismatch > allowed {
        return Err(Error::SymmetryBroken { mismatch: mismatch / scale });
    }
    let b = (0..n).map(|k| 0.5 * (x[k + n] - x[k].conj())).collect();
    Ok(CouplingProfile { b, t, decomp: decomp.clone(), kappa: kappa.map(<[f64]>::to_vec) })
}

/// `β_k = −i G_k* ∫₀ᵗ g(s) e^{iν_k s} ds` from the profile's tones.
pub fn beta_from_profile(profile: &CouplingProfile) -> Vec<C64> {
    let tones = profile.tones();
    profile
        .decomp
        .g
        .iter()
        .zip(&profile.decomp.nu)
        .map(|(g, &nu)| {
            let integral: C64 = tones.iter().map(|(c, w)| c * exp_integral(I * (nu + w), profile.t)).sum();
            -I * g.conj() * integral
        })
        .collect()
}

/// Maximum of `|g|` on `[0, t]`: uniform scan at `sample_density` points per
/// `1/ν_max`, then a parabolic refinement around each extremum.
pub fn g_max(profile: &CouplingProfile, sample_density: usize) -> f64 {
    let density = sample_density.max(20) as f64;
    let h_target = 1.0 / (profile.decomp.nu_max() * density);
    let steps = (profile.t / h_target).ceil().max(2.0) as usize;
    let h = profile.t / steps as f64;
    let vals: Vec<f64> = (0..=steps).map(|i| profile.evaluate_g(i as f64 * h)).collect();
    let mut best = vals[0].abs().max(vals[steps].abs());
    for i in 1..steps {
        let (a, b, c) = (vals[i - 1], vals[i], vals[i + 1]);
        if b.abs() < a.abs() || b.abs() < c.abs() {
            continue;
        }
        let curv = a - 2.0 * b + c;
        let s = i as f64 * h;
        let shift = if curv != 0.0 { (0.5 * h * (a - c) / curv).clamp(-h, h) } else { 0.0 };
        let refined = profile.evaluate_g((s + shift).clamp(0.0, profile.t)).abs();
        best = best.max(b.abs()).max(refined);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_decomposition, ChainSpec};
    use crate::network::{diagonalize, NetworkSpec};
    use crate::quad::{integrate, QuadOptions};
    use std::f64::consts::PI;

    fn free() -> NormalModeDecomposition {
        diagonalize(&NetworkSpec::uncoupled(vec![1.0]).unwrap()).unwrap()
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

    #[test]
    fn interaction_time_from_gap() {
        let d = NormalModeDecomposition::from_blocks(
            vec![1.0, 2.0],
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            0,
        )
        .unwrap();
        assert!((min_interaction_time(&d, 1e-8).unwrap() - PI).abs() < 1e-15);

        let d = NormalModeDecomposition::from_blocks(
            vec![1.0, 1.0 + 1e-9],
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            0,
        )
        .unwrap();
        assert!(matches!(min_interaction_time(&d, 1e-8), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn chain_time_is_consistent_with_invertibility_onset() {
        let d = chain_decomposition(&ChainSpec::new(8, 1.0, 0.2).unwrap());
        let t0 = min_interaction_time(&d, 1e-8).unwrap();
        // smallest chain gap is between the two highest modes
        assert!(t0 > 50.0 && t0 < 65.0, "{t0}");
        assert!(build_m(&d, t0, None).unwrap().det.norm() > 0.01);
    }

    #[test]
    fn full_period_m_is_identity() {
        for m in 1..4 {
            let mm = build_m(&free(), PI * m as f64, None).unwrap();
            let dev = (&mm.m - DMatrix::<C64>::identity(2, 2)).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-15, "{dev}");
        }
    }

    #[test]
    fn block_structure() {
        let mm = build_m(&pair(), 7.3, Some(&[0.01, 0.02])).unwrap();
        assert_eq!(mm.m3(), mm.m2().map(|x| x.conj()));
        assert_eq!(mm.m4(), mm.m1().map(|x| x.conj()));
        let mm = build_m(&pair(), 7.3, None).unwrap();
        assert!((0..2).all(|k| mm.m1()[(k, k)] == C64::new(1.0, 0.0)));
    }

    #[test]
    fn m_entries_match_quadrature() {
        let d = pair();
        let t = 7.3;
        let mm = build_m(&d, t, None).unwrap();
        let opts = QuadOptions::default().with_rel_tol(1e-12).with_panels(8);
        for k in 0..2 {
            for l in 0..2 {
                let m1 = integrate(|s| (-I * (d.nu[k] - d.nu[l]) * s).exp(), 0.0, t, opts).unwrap() * d.g[k] / d.g[l] / t;
                let m2 = integrate(|s| (-I * (d.nu[k] + d.nu[l]) * s).exp(), 0.0, t, opts).unwrap() * d.g[k]
                    / d.g[l].conj()
                    / t;
                assert!((mm.m1()[(k, l)] - m1).norm() < 1e-10);
                assert!((mm.m2()[(k, l)] - m2).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn weak_probe_weight_is_rejected() {
        let d = diagonalize(&NetworkSpec::uncoupled(vec![1.0, 1.3]).unwrap()).unwrap();
        assert!(matches!(build_m(&d, 10.0, None), Err(Error::AssumptionViolation { index: 1, .. })));
    }

    #[test]
    fn zero_target_gives_zero_profile() {
        let d = pair();
        let p = synthesize_profile(&d, &Displacement::normal(vec![C64::new(0.0, 0.0); 2]), 60.0, None).unwrap();
        assert!(p.b.iter().all(|b| b.norm() == 0.0));
        assert!((0..50).all(|i| p.evaluate_g(i as f64) == 0.0));
        assert_eq!(g_max(&p, 20), 0.0);
    }

    #[test]
    fn single_tone_expands_to_cosine() {
        let mut p = CouplingProfile::zero(&free(), 1.0);
        p.b = vec![C64::new(0.0, 0.5)];
        for i in 0..10 {
            let s = i as f64 * 0.1;
            let v = p.evaluate_complex(s);
            assert!((v.re + s.cos()).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn free_oscillator_roundtrip_against_quadrature() {
        let d = free();
        let target = vec![C64::new(-0.5, 0.0)];
        let t = 4.0 * PI;
        let p = synthesize_profile(&d, &Displacement::normal(target.clone()), t, None).unwrap();
        // independent route: integrate the real profile directly
        let opts = QuadOptions::default().with_rel_tol(1e-13).with_panels(16);
        let beta = -I * d.g[0].conj() * integrate(|s| p.evaluate_g(s) * (I * d.nu[0] * s).exp(), 0.0, t, opts).unwrap();
        assert!((beta - target[0]).norm() < 1e-10);
        assert!((beta_from_profile(&p)[0] - target[0]).norm() < 1e-12);
    }

    #[test]
    fn closed_form_beta_matches_quadrature_for_arbitrary_coefficients() {
        let d = pair();
        let mut p = CouplingProfile::zero(&d, 31.0);
        p.b = vec![C64::new(0.3, -0.2), C64::new(-0.1, 0.7)];
        let opts = QuadOptions::default().with_rel_tol(1e-13).with_panels(64);
        let closed = beta_from_profile(&p);
        for k in 0..2 {
            let q = -I
                * d.g[k].conj()
                * integrate(|s| p.evaluate_g(s) * (I * d.nu[k] * s).exp(), 0.0, p.t, opts).unwrap();
            assert!((closed[k] - q).norm() < 1e-11, "{k}: {} vs {q}", closed[k]);
        }
    }

    #[test]
    fn constant_drive_over_full_period_gives_no_displacement() {
        // a constant g is not on the tone basis; integrate it directly
        let t = 2.0 * PI;
        let opts = QuadOptions::default().with_rel_tol(1e-13);
        let beta = -I * integrate(|s| 0.3 * (I * s).exp(), 0.0, t, opts).unwrap();
        assert!(beta.norm() < 1e-14);
    }

    #[test]
    fn local_target_roundtrip() {
        let d = pair();
        let alpha = vec![C64::new(0.4, -1.1), C64::new(-0.7, 0.2)];
        let p = synthesize_profile(&d, &Displacement::local(alpha.clone()), 80.0, None).unwrap();
        let beta = beta_from_profile(&p);
        let back = local_normal_convert(&d, &beta, Direction::NormalToLocal);
        assert!(crate::math::max_abs_diff(&alpha, &back) < 1e-10);
    }

    #[test]
    fn short_time_is_ill_conditioned() {
        let d = chain_decomposition(&ChainSpec::new(8, 1.0, 0.2).unwrap());
        let err = synthesize_profile(&d, &Displacement::normal(vec![C64::new(-1.0, 0.0); 8]), 10.0, None);
        assert!(matches!(err, Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn g_max_matches_dense_grid() {
        let d = pair();
        let p = synthesize_profile(&d, &Displacement::normal(vec![C64::new(-1.0, 0.3), C64::new(0.5, 0.5)]), 50.0, None)
            .unwrap();
        let coarse = g_max(&p, 20);
        let n = 400_000;
        let dense = (0..=n).map(|i| p.evaluate_g(p.t * i as f64 / n as f64).abs()).fold(0.0, f64::max);
        assert!((coarse - dense).abs() <= 1e-4 * dense, "{coarse} vs {dense}");
    }

    #[test]
    fn single_tone_peak() {
        // |B| = c on one tone: g = −(2c/t)·cos(νs + φ)/|G|, peak 2c/(t|G|)
        let d = free();
        let mut p = CouplingProfile::zero(&d, 9.0);
        p.b = vec![C64::from_polar(0.35, 0.4)];
        let want = 2.0 * 0.35 / 9.0;
        assert!((g_max(&p, 20) - want).abs() < 1e-4 * want);
    }

    #[test]
    fn rms_matches_quadrature() {
        let d = pair();
        let mut p = CouplingProfile::zero(&d, 23.0);
        p.b = vec![C64::new(0.2, 0.1), C64::new(-0.3, 0.4)];
        let opts = QuadOptions::default().with_rel_tol(1e-12).with_panels(32);
        let ms = crate::quad::integrate_real(|s| p.evaluate_g(s).powi(2), 0.0, p.t, opts).unwrap() / p.t;
        assert!((p.rms() - ms.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn default_time_enforces_margin() {
        let d = pair();
        let t0 = min_interaction_time(&d, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(default_interaction_time(&d, None).unwrap(), 2.0 * t0);
        assert_eq!(default_interaction_time(&d, Some(1.0)).unwrap(), 2.0 * t0);
        assert_eq!(default_interaction_time(&d, Some(1e4)).unwrap(), 1e4);
    }
}
