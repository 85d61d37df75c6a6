//! Test states, their characteristic functions, and the simulated qubit
//! readout.
//!
//! Quadratures are ordered `(x₁…x_N, p₁…p_N)` with `a = (x + ip)/√2`, so the
//! vacuum covariance is `𝟙/2`. The characteristic function of a Gaussian
//! state with mean `d` and covariance `V` is
//! `χ(ξ) = exp(i ζ·d − ½ ζᵀVζ)` with `ζ = √2 (Im ξ, −Re ξ)`, which gives
//! `exp(−|ξ|²/2 + ξα* − ξ*α)` for the coherent state `|α⟩`.
//!
//! With the qubit prepared in `|+⟩` and the network displaced by `±β`
//! conditioned on `σ₃`, the readout is `⟨σ₁⟩ + i⟨σ₂⟩ = χ(−2β)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{bose_occupation, C64, I};
use crate::network::{Basis, NormalModeDecomposition};
use crate::ode::{self, OdeOptions};
use crate::protocol::CouplingProfile;

/// Slack above `|χ| = 1` tolerated before a value is declared non-physical.
pub const CHI_SLACK: f64 = 1e-9;

/// Largest population allowed on the top Fock level of any mode.
pub const LEAK_LIMIT: f64 = 1e-6;

/// Largest Fock truncation the Schrödinger oracle accepts.
pub const MAX_FOCK_DIM: usize = 30;

/// The symplectic form for `(x…, p…)` ordering.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j == i + n {
            1.0
        } else if i >= n && j + n == i {
            -1.0
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Validates symmetry and the uncertainty relation `V + iΩ/2 ⪰ 0`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if m == 0 || m % 2 != 0 || cov.shape() != (m, m) {
            return Err(Error::InvalidInput(format!(
                "Gaussian state needs a 2N mean and 2N x 2N covariance, got {m} and {:?}",
                cov.shape()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("Gaussian moments must be finite".into()));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("covariance matrix is not symmetric".into()));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let omega = symplectic_form(m / 2);
        let h = DMatrix::from_fn(m, m, |i, j| C64::new(cov[(i, j)], 0.5 * omega[(i, j)]));
        let min_eig = h.symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-10 * scale {
            return Err(Error::InvalidInput(format!(
                "covariance violates the uncertainty relation (eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum(n: usize) -> Self {
        Self { mean: DVector::zeros(2 * n), cov: DMatrix::identity(2 * n, 2 * n) * 0.5 }
    }

    /// Product of coherent states `|α₁⟩ ⊗ … ⊗ |α_N⟩`.
    pub fn coherent(alpha: &[C64]) -> Self {
        let n = alpha.len();
        let mut s = Self::vacuum(n);
        for (k, a) in alpha.iter().enumerate() {
            s.mean[k] = std::f64::consts::SQRT_2 * a.re;
            s.mean[k + n] = std::f64::consts::SQRT_2 * a.im;
        }
        s
    }

    /// Product of thermal states with the given mean occupations.
    pub fn thermal(occupations: &[f64]) -> Result<Self> {
        if occupations.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("thermal occupations must be non-negative".into()));
        }
        let n = occupations.len();
        let diag = DVector::from_fn(2 * n, |i, _| occupations[i % n] + 0.5);
        Ok(Self { mean: DVector::zeros(2 * n), cov: DMatrix::from_diagonal(&diag) })
    }

    /// Squeezed vacuum `exp(½(ζ* a² − ζ a†²))|0⟩`, `ζ = r e^{iφ}`, on one mode
    /// of an otherwise empty `n`-mode network.
    pub fn squeezed(n: usize, mode: usize, r: f64, phi: f64) -> Result<Self> {
        if mode >= n || !r.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidInput(format!("bad squeezing on mode {mode} of {n}")));
        }
        let (s, c) = (0.5 * phi).sin_cos();
        let (lo, hi) = (0.5 * (-2.0 * r).exp(), 0.5 * (2.0 * r).exp());
        let mut st = Self::vacuum(n);
        st.cov[(mode, mode)] = c * c * lo + s * s * hi;
        st.cov[(mode + n, mode + n)] = s * s * lo + c * c * hi;
        st.cov[(mode, mode + n)] = c * s * (lo - hi);
        st.cov[(mode + n, mode)] = c * s * (lo - hi);
        Ok(st)
    }

    /// Two-mode squeezed vacuum `exp(r (a_i a_j − a_i† a_j†))|0⟩`.
    pub fn two_mode_squeezed(n: usize, i: usize, j: usize, r: f64) -> Result<Self> {
        if i >= n || j >= n || i == j || !r.is_finite() {
            return Err(Error::InvalidInput(format!("bad two-mode squeezing on ({i}, {j}) of {n}")));
        }
        let (ch, sh) = (0.5 * (2.0 * r).cosh(), 0.5 * (2.0 * r).sinh());
        let mut st = Self::vacuum(n);
        for m in [i, j] {
            st.cov[(m, m)] = ch;
            st.cov[(m + n, m + n)] = ch;
        }
        st.cov[(i, j)] = -sh;
        st.cov[(j, i)] = -sh;
        st.cov[(i + n, j + n)] = sh;
        st.cov[(j + n, i + n)] = sh;
        Ok(st)
    }

    /// Thermal equilibrium of the network Hamiltonian at temperature `T`,
    /// expressed in local quadratures.
    pub fn thermal_normal(decomp: &NormalModeDecomposition, temperature: f64) -> Result<Self> {
        let occ: Vec<f64> = decomp.nu.iter().map(|&nu| bose_occupation(nu, temperature)).collect();
        let normal = Self::thermal(&occ)?;
        let inverse = decomp
            .quadrature_map()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("quadrature map is singular".into()))?;
        Ok(normal.transformed(&inverse))
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// The state after the linear quadrature map `r ↦ S r`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Self {
        let cov = s * &self.cov * s.transpose();
        Self { mean: s * &self.mean, cov: (&cov + cov.transpose()) * 0.5 }
    }

    /// Reduced state of the listed modes.
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        let n = self.modes();
        if keep.is_empty() || keep.iter().any(|&k| k >= n) {
            return Err(Error::InvalidInput(format!("cannot keep modes {keep:?} of {n}")));
        }
        let idx: Vec<usize> = keep.iter().copied().chain(keep.iter().map(|k| k + n)).collect();
        let m = idx.len();
        Ok(Self {
            mean: DVector::from_fn(m, |i, _| self.mean[idx[i]]),
            cov: DMatrix::from_fn(m, m, |i, j| self.cov[(idx[i], idx[j])]),
        })
    }

    pub fn chi(&self, xi: &[C64]) -> C64 {
        let n = self.modes();
        assert_eq!(xi.len(), n, "point dimension must match the mode count");
        let zeta = DVector::from_fn(2 * n, |i, _| {
            if i < n {
                std::f64::consts::SQRT_2 * xi[i].im
            } else {
                -std::f64::consts::SQRT_2 * xi[i - n].re
            }
        });
        let quad = zeta.dot(&(&self.cov * &zeta));
        let lin = zeta.dot(&self.mean);
        C64::new(-0.5 * quad, lin).exp()
    }
}

pub fn chi_gaussian(state: &GaussianState, xi: &[C64]) -> C64 {
    state.chi(xi)
}

/// `exp(−Σ_k [𝒩(ν_k) + ½] |η_k|²)`.
pub fn thermal_chi(eta: &[C64], temperature: f64, nu: &[f64]) -> C64 {
    let e: f64 = eta
        .iter()
        .zip(nu)
        .map(|(x, &v)| (bose_occupation(v, temperature) + 0.5) * x.norm_sqr())
        .sum();
    C64::new((-e).exp(), 0.0)
}

/// `(⟨σ₁⟩, ⟨σ₂⟩) = (Re χ, Im χ)`.
pub fn ideal_measurement(chi: C64) -> Result<(f64, f64)> {
    if !(chi.norm() <= 1.0 + CHI_SLACK) {
        return Err(Error::NonPhysicalChi(chi.norm()));
    }
    Ok((chi.re, chi.im))
}

/// `ξ_keep ↦ χ(ξ)` with the discarded components pinned to zero.
pub fn reduced_chi<F>(chi: F, modes: usize, keep: Vec<usize>) -> impl Fn(&[C64]) -> C64
where
    F: Fn(&[C64]) -> C64,
{
    move |x: &[C64]| {
        let mut full = vec![C64::new(0.0, 0.0); modes];
        for (&k, &v) in keep.iter().zip(x) {
            full[k] = v;
        }
        chi(&full)
    }
}

/// One phase-space point of a reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub point: Vec<C64>,
    pub basis: Basis,
    /// Shots per observable; zero marks an exact (unsampled) record.
    pub shots: u64,
    pub est_s1: f64,
    pub est_s2: f64,
    pub stderr: f64,
    pub f: f64,
    pub chi_corrected: C64,
    pub chi_err: f64,
}

impl MeasurementRecord {
    /// A record with no damping applied yet.
    pub fn new(point: Vec<C64>, basis: Basis, shots: u64, est: ShotEstimate) -> Self {
        Self {
            point,
            basis,
            shots,
            est_s1: est.s1,
            est_s2: est.s2,
            stderr: est.stderr,
            f: 0.0,
            chi_corrected: C64::new(est.s1, est.s2),
            chi_err: est.stderr,
        }
    }

    pub fn exact(point: Vec<C64>, basis: Basis, signal: (f64, f64)) -> Self {
        Self::new(point, basis, 0, ShotEstimate { s1: signal.0, s2: signal.1, stderr: 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotEstimate {
    pub s1: f64,
    pub s2: f64,
    /// The larger of the two per-observable standard errors.
    pub stderr: f64,
}

fn sample_pauli(mean: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let p = (0.5 * (1.0 + mean)).clamp(0.0, 1.0);
    let dist = Binomial::new(shots, p).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let up = dist.sample(rng);
    let n = shots as f64;
    let est = (2.0 * up as f64 - n) / n;
    let se = if shots > 1 { ((1.0 - est * est).max(0.0) / (n - 1.0)).sqrt() } else { 1.0 };
    Ok((est, se))
}

/// Simulates `shots` single-shot readouts of `σ₁` and, in separate runs,
/// of `σ₂`. The two observables draw from streams `2·stream` and
/// `2·stream + 1` of a generator seeded by `seed`, so each point is
/// reproducible on its own.
pub fn sample_shots(truth: (f64, f64), shots: u64, seed: u64, stream: u64) -> Result<ShotEstimate> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * stream);
    let (s1, se1) = sample_pauli(truth.0, shots, &mut rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * stream + 1);
    let (s2, se2) = sample_pauli(truth.1, shots, &mut rng)?;
    Ok(ShotEstimate { s1, s2, stderr: se1.max(se2) })
}

/// `⟨m|D(ξ)|n⟩` for `m, n < dim`.
pub fn displacement_matrix(xi: C64, dim: usize) -> DMatrix<C64> {
    let x = xi.norm_sqr();
    let gauss = (-0.5 * x).exp();
    let mut out = DMatrix::zeros(dim, dim);
    for lo in 0..dim {
        for hi in lo..dim {
            let a = (hi - lo) as f64;
            // generalized Laguerre L_lo^{(a)}(x) by the three-term recurrence
            let (mut prev, mut cur) = (1.0, 1.0 + a - x);
            let lag = if lo == 0 {
                1.0
            } else {
                for k in 1..lo {
                    let k = k as f64;
                    let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
                    prev = cur;
                    cur = next;
                }
                cur
            };
            let ratio: f64 = ((lo + 1)..=hi).map(|j| 1.0 / (j as f64).sqrt()).product();
            let base = ratio * gauss * lag;
            let p = hi - lo;
            out[(hi, lo)] = base * xi.powu(p as u32);
            if p > 0 {
                out[(lo, hi)] = base * (-xi.conj()).powu(p as u32);
            }
        }
    }
    out
}

/// Density operator on a truncated product Fock space. Multi-index layout is
/// `n₀ + D n₁ + D² n₂ + …`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    dim: usize,
    rho: DMatrix<C64>,
    pure: Option<DVector<C64>>,
    /// Probability mass lost to truncation before renormalization.
    leak: f64,
}

impl FockState {
    fn check_shape(modes: usize, dim: usize) -> Result<usize> {
        if modes == 0 || dim < 2 {
            return Err(Error::InvalidInput("Fock state needs at least one mode and two levels".into()));
        }
        u32::try_from(modes)
            .ok()
            .and_then(|m| dim.checked_pow(m))
            .filter(|&s| s <= 1 << 16)
            .ok_or_else(|| Error::InvalidInput(format!("Fock space {dim}^{modes} too large")))
    }

    /// Normalizes the amplitudes; any missing norm is recorded as leakage.
    pub fn pure(modes: usize, dim: usize, amplitudes: Vec<C64>) -> Result<Self> {
        let size = Self::check_shape(modes, dim)?;
        if amplitudes.len() != size {
            return Err(Error::InvalidInput(format!("expected {size} amplitudes, got {}", amplitudes.len())));
        }
        let psi = DVector::from_vec(amplitudes);
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("state vector must be non-zero".into()));
        }
        let psi = psi / C64::new(norm, 0.0);
        let rho = &psi * psi.adjoint();
        Ok(Self { modes, dim, rho, pure: Some(psi), leak: (1.0 - norm * norm).max(0.0) })
    }

    /// Normalizes a Hermitian, positive density matrix to unit trace.
    pub fn mixed(modes: usize, dim: usize, rho: DMatrix<C64>) -> Result<Self> {
        let size = Self::check_shape(modes, dim)?;
        if rho.shape() != (size, size) {
            return Err(Error::InvalidInput(format!("density matrix must be {size} x {size}")));
        }
        if (&rho - rho.adjoint()).iter().any(|x| x.norm() > 1e-12) {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        let tr = rho.trace().re;
        if !(tr > 0.0) || rho.clone().symmetric_eigen().eigenvalues.min() < -1e-12 * tr {
            return Err(Error::InvalidInput("density matrix is not positive".into()));
        }
        Ok(Self { modes, dim, rho: rho / C64::new(tr, 0.0), pure: None, leak: (1.0 - tr).max(0.0) })
    }

    pub fn number(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidInput(format!("level {n} outside truncation {dim}")));
        }
        let mut amp = vec![C64::new(0.0, 0.0); dim];
        amp[n] = C64::new(1.0, 0.0);
        Self::pure(1, dim, amp)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::number(0, dim)
    }

    pub fn coherent(alpha: C64, dim: usize) -> Result<Self> {
        let mut amp = Vec::with_capacity(dim);
        let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            amp.push(c);
            c *= alpha / ((n + 1) as f64).sqrt();
        }
        Self::pure(1, dim, amp)
    }

    /// Squeezed vacuum with the same convention as [`GaussianState::squeezed`].
    pub fn squeezed(r: f64, phi: f64, dim: usize) -> Result<Self> {
        let mut amp = vec![C64::new(0.0, 0.0); dim];
        let q = -C64::from_polar(r.tanh(), phi);
        let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
        for m in 0..dim.div_ceil(2) {
            amp[2 * m] = c;
            // c_{2m+2} = c_{2m} q √((2m+1)(2m+2)) / (2(m+1))
            let m = m as f64;
            c *= q * ((2.0 * m + 1.0) * (2.0 * m + 2.0)).sqrt() / (2.0 * (m + 1.0));
        }
        Self::pure(1, dim, amp)
    }

    /// `|α⟩ + |−α⟩`, normalized.
    pub fn even_cat(alpha: C64, dim: usize) -> Result<Self> {
        let mut amp = Vec::with_capacity(dim);
        let mut c = C64::new(1.0, 0.0);
        for n in 0..dim {
            amp.push(if n % 2 == 0 { c } else { C64::new(0.0, 0.0) });
            c *= alpha / ((n + 1) as f64).sqrt();
        }
        // Σ_{n even} |α|^{2n}/n! for the untruncated state
        let full = alpha.norm_sqr().cosh();
        let kept: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
        let mut st = Self::pure(1, dim, amp)?;
        st.leak = (1.0 - kept / full).max(0.0);
        Ok(st)
    }

    pub fn thermal(occupation: f64, dim: usize) -> Result<Self> {
        if !(occupation.is_finite() && occupation >= 0.0) {
            return Err(Error::InvalidInput("occupation must be non-negative".into()));
        }
        let q = occupation / (1.0 + occupation);
        let diag = DVector::from_fn(dim, |n, _| C64::new(q.powi(n as i32) / (1.0 + occupation), 0.0));
        Self::mixed(1, dim, DMatrix::from_diagonal(&diag))
    }

    /// Two-mode squeezed vacuum with the convention of
    /// [`GaussianState::two_mode_squeezed`].
    pub fn two_mode_squeezed(r: f64, dim: usize) -> Result<Self> {
        let mut amp = vec![C64::new(0.0, 0.0); dim * dim];
        let q = -r.tanh();
        for n in 0..dim {
            amp[n + dim * n] = C64::new(q.powi(n as i32) / r.cosh(), 0.0);
        }
        Self::pure(2, dim, amp)
    }

    /// `self ⊗ other`, with `self` on the lower mode indices.
    pub fn tensor(&self, other: &FockState) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::InvalidInput("tensor factors need equal truncation".into()));
        }
        let modes = self.modes + other.modes;
        Self::check_shape(modes, self.dim)?;
        let pure = match (&self.pure, &other.pure) {
            (Some(a), Some(b)) => Some(b.kronecker(a)),
            _ => None,
        };
        Ok(Self {
            modes,
            dim: self.dim,
            rho: other.rho.kronecker(&self.rho),
            pure,
            leak: 1.0 - (1.0 - self.leak) * (1.0 - other.leak),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    fn level(&self, index: usize, mode: usize) -> usize {
        (index / self.dim.pow(mode as u32)) % self.dim
    }

    /// Largest population on the top level of any single mode.
    pub fn boundary_population(&self) -> f64 {
        (0..self.modes)
            .map(|k| {
                (0..self.rho.nrows())
                    .filter(|&i| self.level(i, k) == self.dim - 1)
                    .map(|i| self.rho[(i, i)].re)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `tr{ρ D(ξ)}` from the Laguerre matrix elements of `D`.
    pub fn chi(&self, xi: &[C64]) -> C64 {
        assert_eq!(xi.len(), self.modes, "point dimension must match the mode count");
        let mats: Vec<DMatrix<C64>> = xi.iter().map(|&x| displacement_matrix(x, self.dim)).collect();
        let size = self.rho.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..size {
            for b in 0..size {
                let r = self.rho[(a, b)];
                if r == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut d = C64::new(1.0, 0.0);
                for (k, m) in mats.iter().enumerate() {
                    d *= m[(self.level(b, k), self.level(a, k))];
                }
                acc += r * d;
            }
        }
        acc
    }

    /// Pure-state decomposition `ρ = Σ w |ψ⟩⟨ψ|` with negligible weights dropped.
    fn ensemble(&self) -> Vec<(f64, DVector<C64>)> {
        if let Some(psi) = &self.pure {
            return vec![(1.0, psi.clone())];
        }
        let eig = self.rho.clone().symmetric_eigen();
        eig.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-12)
            .map(|(i, &w)| (w, eig.eigenvectors.column(i).into_owned()))
            .collect()
    }
}

/// A catalog state, always stored in the local basis. Fock-represented
/// factors occupy the listed modes; every other mode is in vacuum.
#[derive(Debug, Clone, PartialEq)]
pub enum TestState {
    Gaussian(GaussianState),
    Fock { factor: FockState, modes: Vec<usize>, total: usize },
}

impl TestState {
    pub fn modes(&self) -> usize {
        match self {
            TestState::Gaussian(g) => g.modes(),
            TestState::Fock { total, .. } => *total,
        }
    }

    /// `χ` at a local-basis point.
    pub fn chi(&self, xi: &[C64]) -> C64 {
        match self {
            TestState::Gaussian(g) => g.chi(xi),
            TestState::Fock { factor, modes, .. } => {
                let sub: Vec<C64> = modes.iter().map(|&k| xi[k]).collect();
                let rest: f64 = xi
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !modes.contains(k))
                    .map(|(_, x)| x.norm_sqr())
                    .sum();
                factor.chi(&sub) * (-0.5 * rest).exp()
            }
        }
    }
}

/// Integrates the qubit–network Schrödinger equation in the interaction
/// picture, `H(s) = σ₃ g(s) Σ_k (G_k* e^{iν_k s} b_k† + G_k e^{−iν_k s} b_k)`,
/// for a network of at most two normal modes whose initial state is given in
/// the normal-mode Fock basis. Returns `(⟨σ₁⟩, ⟨σ₂⟩)` at the end of the
/// profile with the qubit starting in `|+⟩`.
pub fn brute_force_evolve(initial: &FockState, profile: &CouplingProfile) -> Result<(f64, f64)> {
    let decomp = &profile.decomp;
    let n = decomp.len();
    if n != initial.modes || n > 2 {
        return Err(Error::InvalidInput(format!(
            "Schrödinger oracle needs a matching state with at most 2 modes (network {n}, state {})",
            initial.modes
        )));
    }
    if initial.dim > MAX_FOCK_DIM {
        return Err(Error::InvalidInput(format!("truncation {} exceeds {MAX_FOCK_DIM}", initial.dim)));
    }
    let leak = initial.boundary_population();
    if leak > LEAK_LIMIT {
        return Err(Error::TruncationLeak { population: leak, limit: LEAK_LIMIT });
    }
    let dim = initial.dim;
    let size = initial.rho.nrows();
    let tones = profile.tones();
    let strides: Vec<usize> = (0..n).map(|k| dim.pow(k as u32)).collect();
    let lowering = |psi: &[C64], k: usize, out: &mut [C64], coef: C64| {
        let st = strides[k];
        for (i, o) in out.iter_mut().enumerate() {
            let nk = (i / st) % dim;
            if nk + 1 < dim {
                *o += coef * ((nk + 1) as f64).sqrt() * psi[i + st];
            }
        }
    };
    let raising = |psi: &[C64], k: usize, out: &mut [C64], coef: C64| {
        let st = strides[k];
        for (i, o) in out.iter_mut().enumerate() {
            let nk = (i / st) % dim;
            if nk > 0 {
                *o += coef * (nk as f64).sqrt() * psi[i - st];
            }
        }
    };
    let boundary = |psi: &[C64]| -> f64 {
        (0..n)
            .map(|k| {
                psi.iter()
                    .enumerate()
                    .filter(|(i, _)| (i / strides[k]) % dim == dim - 1)
                    .map(|(_, x)| x.norm_sqr())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    };

    let opts = OdeOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        max_step: 2.0 * std::f64::consts::PI / decomp.nu_max() / 16.0,
        ..OdeOptions::default()
    };
    let mut signal = C64::new(0.0, 0.0);
    for (w, psi) in initial.ensemble() {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mut y: Vec<C64> = psi.iter().chain(psi.iter()).map(|x| x * half).collect();
        ode::integrate(
            |s, y, dy| {
                let g: f64 = tones.iter().map(|(c, w)| c * C64::new(0.0, w * s).exp()).sum::<C64>().re;
                dy.fill(C64::new(0.0, 0.0));
                for (branch, sign) in [(0usize, 1.0), (1, -1.0)] {
                    let (src, dst) = (&y[branch * size..(branch + 1) * size], branch * size);
                    let out = &mut dy[dst..dst + size];
                    for k in 0..n {
                        let phase = C64::new(0.0, decomp.nu[k] * s).exp();
                        let up = -I * sign * g * decomp.g[k].conj() * phase;
                        let down = -I * sign * g * decomp.g[k] * phase.conj();
                        raising(src, k, out, up);
                        lowering(src, k, out, down);
                    }
                }
            },
            &mut y,
            0.0,
            profile.t,
            opts,
            |_, y| {
                let pop = 2.0 * w * boundary(&y[..size]).max(boundary(&y[size..]));
                if pop > LEAK_LIMIT {
                    Err(Error::TruncationLeak { population: pop, limit: LEAK_LIMIT })
                } else {
                    Ok(())
                }
            },
        )?;
        let norm: f64 = y.iter().map(|x| x.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Integration(format!("norm drifted to {norm:.12}")));
        }
        let overlap: C64 = y[..size].iter().zip(&y[size..]).map(|(e, g)| e.conj() * g).sum();
        signal += 2.0 * w * overlap;
    }
    Ok((signal.re, signal.im))
}
