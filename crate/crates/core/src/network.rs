//! Quadratic oscillator networks and their normal-mode decomposition.
//!
//! A network of `N` oscillators with local frequencies `ω_n`, hopping terms
//! `J_nm (a_n a_m† + h.c.)` and active terms `K_nm (a_n a_m + h.c.)` is brought
//! to the diagonal form `Σ ν_k b_k† b_k` by a Bogoliubov transformation
//! `b = S₁ a + S₂ a*`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::C64;

pub const DEFAULT_G_TOL: f64 = 1e-8;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;
/// Gaps below this (but above the tolerance) are accepted with a warning.
pub const NEAR_DEGENERATE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    omega: Vec<f64>,
    hopping: DMatrix<f64>,
    active: DMatrix<f64>,
}

impl NetworkSpec {
    /// Builds a network from full coupling matrices. Only the strict upper
    /// triangle of `hopping`/`active` is read; the result is symmetrized.
    pub fn new(omega: Vec<f64>, hopping: DMatrix<f64>, active: DMatrix<f64>) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::InvalidInput("network needs at least one oscillator".into()));
        }
        if let Some((i, w)) = omega.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidInput(format!("omega[{i}] = {w} must be positive")));
        }
        for (name, m) in [("J", &hopping), ("K", &active)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
            for i in 0..n {
                if m[(i, i)] != 0.0 {
                    return Err(Error::InvalidInput(format!("{name}[{i},{i}] must be zero")));
                }
                for j in (i + 1)..n {
                    let (u, l) = (m[(i, j)], m[(j, i)]);
                    if l != 0.0 && (u - l).abs() > 1e-12 * u.abs().max(l.abs()) {
                        return Err(Error::InvalidInput(format!("{name} is not symmetric at ({i},{j})")));
                    }
                }
            }
        }
        let sym = |m: DMatrix<f64>| DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { m[(i.min(j), i.max(j))] });
        let hopping = sym(hopping);
        let active = sym(active);
        Ok(Self { omega, hopping, active })
    }

    /// Network with no couplings.
    pub fn uncoupled(omega: Vec<f64>) -> Result<Self> {
        let n = omega.len();
        Self::new(omega, DMatrix::zeros(n, n), DMatrix::zeros(n, n))
    }

    /// Sets `J_nm = J_mn = j` and `K_nm = K_mn = k` for one pair.
    pub fn with_coupling(mut self, n: usize, m: usize, j: f64, k: f64) -> Result<Self> {
        if n == m || n >= self.len() || m >= self.len() {
            return Err(Error::InvalidInput(format!("bad coupling pair ({n},{m})")));
        }
        self.hopping[(n, m)] = j;
        self.hopping[(m, n)] = j;
        self.active[(n, m)] = k;
        self.active[(m, n)] = k;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn hopping(&self) -> &DMatrix<f64> {
        &self.hopping
    }

    pub fn active(&self) -> &DMatrix<f64> {
        &self.active
    }

    /// Relabels the oscillators: node `i` of the result is node `perm[i]` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidInput("not a permutation".into()));
        }
        Ok(Self {
            omega: perm.iter().map(|&p| self.omega[p]).collect(),
            hopping: DMatrix::from_fn(n, n, |i, j| self.hopping[(perm[i], perm[j])]),
            active: DMatrix::from_fn(n, n, |i, j| self.active[(perm[i], perm[j])]),
        })
    }

    fn passive_block(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.omega)) + &self.hopping
    }
}

/// Coefficient matrix of `H₀ = ½ (a†, a) H (a, a†)ᵀ + const`.
pub fn build_quadratic_form(spec: &NetworkSpec) -> DMatrix<C64> {
    let n = spec.len();
    let a = spec.passive_block();
    let b = spec.active();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let v = if bi == bj { a[(i % n, j % n)] } else { b[(i % n, j % n)] };
        C64::new(v, 0.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalModeDecomposition {
    /// Eigenfrequencies, ascending.
    pub nu: Vec<f64>,
    pub s1: DMatrix<C64>,
    pub s2: DMatrix<C64>,
    /// Probe weights `G_k = (S₁ − S₂)*_{k, probe}`.
    pub g: Vec<C64>,
    /// Index of the oscillator the qubit couples to.
    pub probe: usize,
}

impl NormalModeDecomposition {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Assembles a decomposition from its blocks: fixes the phase gauge and
    /// derives `G` from the probed column.
    pub fn from_blocks(nu: Vec<f64>, s1: DMatrix<C64>, s2: DMatrix<C64>, probe: usize) -> Result<Self> {
        let n = nu.len();
        if s1.shape() != (n, n) || s2.shape() != (n, n) || probe >= n {
            return Err(Error::InvalidInput("inconsistent decomposition shapes".into()));
        }
        let mut d = Self { nu, s1, s2, g: vec![C64::new(0.0, 0.0); n], probe };
        d.fix_gauge();
        Ok(d)
    }

    fn fix_gauge(&mut self) {
        let n = self.len();
        for k in 0..n {
            let gk = (self.s1[(k, self.probe)] - self.s2[(k, self.probe)]).conj();
            let phase = if gk.norm() > 1e-12 {
                // b_k -> e^{iθ} b_k multiplies G_k by e^{-iθ}
                gk / gk.norm()
            } else {
                let (_, big) = (0..n)
                    .map(|m| (self.s1[(k, m)].norm(), self.s1[(k, m)]))
                    .fold((0.0, C64::new(1.0, 0.0)), |acc, x| if x.0 > acc.0 { x } else { acc });
                big.conj() / big.norm()
            };
            for m in 0..n {
                self.s1[(k, m)] *= phase;
                self.s2[(k, m)] *= phase;
            }
            self.g[k] = (self.s1[(k, self.probe)] - self.s2[(k, self.probe)]).conj();
        }
    }

    /// The full `2N × 2N` symplectic matrix `[[S₁, S₂], [S₂*, S₁*]]`.
    pub fn symplectic(&self) -> DMatrix<C64> {
        let n = self.len();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.s1[(i, j)],
            (true, false) => self.s2[(i, j - n)],
            (false, true) => self.s2[(i - n, j)].conj(),
            (false, false) => self.s1[(i - n, j - n)].conj(),
        })
    }

    /// Real symplectic matrix acting on quadratures ordered `(x₁…x_N, p₁…p_N)`,
    /// mapping local to normal-mode quadratures.
    pub fn quadrature_map(&self) -> DMatrix<f64> {
        let n = self.len();
        let plus = &self.s1 + &self.s2;
        let minus = &self.s1 - &self.s2;
        DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => plus[(i, j)].re,
            (true, false) => -minus[(i, j - n)].im,
            (false, true) => plus[(i - n, j)].im,
            (false, false) => minus[(i - n, j - n)].re,
        })
    }

    pub fn nu_max(&self) -> f64 {
        self.nu.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_gap(&self) -> Option<f64> {
        self.nu.windows(2).map(|w| (w[1] - w[0]).abs()).reduce(f64::min)
    }
}

pub fn diagonalize(spec: &NetworkSpec) -> Result<NormalModeDecomposition> {
    diagonalize_with_probe(spec, 0)
}

/// Normal-mode decomposition via the quadrature form
/// `H₀ = ½ xᵀ Q x + ½ pᵀ P p` with `Q = A + K`, `P = A − K`, `A = diag(ω) + J`.
/// Stability (`ν_k > 0`) is equivalent to `P` and `Q` being positive definite;
/// the frequencies are the square roots of the eigenvalues of `P^{½} Q P^{½}`.
pub fn diagonalize_with_probe(spec: &NetworkSpec, probe: usize) -> Result<NormalModeDecomposition> {
    let n = spec.len();
    if probe >= n {
        return Err(Error::InvalidInput(format!("probe index {probe} out of range for {n} modes")));
    }
    let a = spec.passive_block();
    let p = &a - spec.active();
    let q = &a + spec.active();

    let pe = SymmetricEigen::new(p.clone());
    let p_min = pe.eigenvalues.min();
    if p_min <= 0.0 {
        return Err(unstable_from_product(&q, &p));
    }
    let sqrt_p = &pe.eigenvectors
        * DMatrix::from_diagonal(&pe.eigenvalues.map(f64::sqrt))
        * pe.eigenvectors.transpose();
    let inv_sqrt_p = &pe.eigenvectors
        * DMatrix::from_diagonal(&pe.eigenvalues.map(|x| 1.0 / x.sqrt()))
        * pe.eigenvectors.transpose();
    let mut w = &sqrt_p * &q * &sqrt_p;
    w = (&w + w.transpose()) * 0.5;
    let we = SymmetricEigen::new(w);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| we.eigenvalues[i].total_cmp(&we.eigenvalues[j]));
    let scale = we.eigenvalues.amax().max(1.0);
    for (rank, &i) in order.iter().enumerate() {
        let lam = we.eigenvalues[i];
        if lam <= 1e-14 * scale {
            let (re, im) = if lam >= 0.0 { (lam.sqrt(), 0.0) } else { (0.0, (-lam).sqrt()) };
            return Err(Error::UnstableNetwork { index: rank, nu_re: re, nu_im: im });
        }
    }
    let nu: Vec<f64> = order.iter().map(|&i| we.eigenvalues[i].sqrt()).collect();
    let o = DMatrix::from_fn(n, n, |r, c| we.eigenvectors[(r, order[c])]);

    // b = ½(U + V) a + ½(U − V) a*, U = ν^{½} Oᵀ P^{-½}, V = ν^{-½} Oᵀ P^{½}
    let ot = o.transpose();
    let u = DMatrix::from_diagonal(&DVector::from_iterator(n, nu.iter().map(|v| v.sqrt()))) * &ot * &inv_sqrt_p;
    let v = DMatrix::from_diagonal(&DVector::from_iterator(n, nu.iter().map(|v| 1.0 / v.sqrt()))) * &ot * &sqrt_p;
    let s1 = ((&u + &v) * 0.5).map(|x| C64::new(x, 0.0));
    let s2 = ((&u - &v) * 0.5).map(|x| C64::new(x, 0.0));
    NormalModeDecomposition::from_blocks(nu, s1, s2, probe)
}

/// Locates the offending frequency when the quadrature form is not positive
/// definite: `ν² ∈ spec(Q P)`.
fn unstable_from_product(q: &DMatrix<f64>, p: &DMatrix<f64>) -> Error {
    let mut lams: Vec<_> = (q * p).complex_eigenvalues().iter().copied().collect();
    lams.sort_by(|x, y| x.re.total_cmp(&y.re));
    for (i, lam) in lams.iter().enumerate() {
        let nu = lam.sqrt();
        if lam.re <= 0.0 || nu.im.abs() > 1e-10 {
            return Error::UnstableNetwork { index: i, nu_re: nu.re, nu_im: nu.im };
        }
    }
    // Positive ν² but indefinite energy: a negative-frequency mode.
    let nu = lams[0].sqrt();
    Error::UnstableNetwork { index: 0, nu_re: -nu.re, nu_im: nu.im }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticResidual {
    /// `‖S₁†S₁ − (S₂†S₂)* − 𝟙‖_max`
    pub normalization: f64,
    /// `‖S₁†S₂ − (S₂†S₁)*‖_max`
    pub symmetry: f64,
}

impl SymplecticResidual {
    pub fn max(&self) -> f64 {
        self.normalization.max(self.symmetry)
    }
}

pub fn verify_symplectic(decomp: &NormalModeDecomposition) -> SymplecticResidual {
    let n = decomp.len();
    let (s1, s2) = (&decomp.s1, &decomp.s2);
    let r1 = s1.adjoint() * s1 - (s2.adjoint() * s2).map(|x| x.conj()) - DMatrix::<C64>::identity(n, n);
    let r2 = s1.adjoint() * s2 - (s2.adjoint() * s1).map(|x| x.conj());
    let maxnorm = |m: &DMatrix<C64>| m.iter().map(|x| x.norm()).fold(0.0, f64::max);
    SymplecticResidual { normalization: maxnorm(&r1), symmetry: maxnorm(&r2) }
}

/// Largest entry of `𝒮† diag(ν, ν) 𝒮 − H`: how well the decomposition
/// reproduces the quadratic form it came from.
pub fn diagonal_form_residual(spec: &NetworkSpec, decomp: &NormalModeDecomposition) -> f64 {
    let s = decomp.symplectic();
    let nu2: Vec<C64> = decomp.nu.iter().chain(decomp.nu.iter()).map(|&v| C64::new(v, 0.0)).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(nu2));
    let r = s.adjoint() * d * &s - build_quadratic_form(spec);
    r.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub probe_couples_all: bool,
    /// Modes with `|G_k| <= g_tol`.
    pub weak_modes: Vec<usize>,
    pub min_weight: f64,
    pub nondegenerate: bool,
    /// Pairs `(j, k)` with `|ν_j − ν_k| <= gap_tol`.
    pub degenerate_pairs: Vec<(usize, usize)>,
    pub min_gap: f64,
    /// Spectrum passes but some gap is below [`NEAR_DEGENERATE_GAP`].
    pub near_degenerate: bool,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.probe_couples_all && self.nondegenerate
    }
}

pub fn check_assumptions(decomp: &NormalModeDecomposition, g_tol: f64, gap_tol: f64) -> AssumptionReport {
    let weak_modes: Vec<usize> = decomp
        .g
        .iter()
        .enumerate()
        .filter(|(_, g)| g.norm() <= g_tol)
        .map(|(k, _)| k)
        .collect();
    let min_weight = decomp.g.iter().map(|g| g.norm()).fold(f64::INFINITY, f64::min);
    let n = decomp.len();
    let mut degenerate_pairs = Vec::new();
    let mut min_gap = f64::INFINITY;
    for j in 0..n {
        for k in (j + 1)..n {
            let gap = (decomp.nu[j] - decomp.nu[k]).abs();
            min_gap = min_gap.min(gap);
            if gap <= gap_tol {
                degenerate_pairs.push((j, k));
            }
        }
    }
    let nondegenerate = degenerate_pairs.is_empty();
    AssumptionReport {
        probe_couples_all: weak_modes.is_empty(),
        weak_modes,
        min_weight,
        nondegenerate,
        degenerate_pairs,
        min_gap,
        near_degenerate: nondegenerate && min_gap < NEAR_DEGENERATE_GAP,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Local,
    Normal,
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Local => "local",
            Basis::Normal => "normal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LocalToNormal,
    NormalToLocal,
}

/// Maps displacement parameters between bases using
/// `(−α*, α) = 𝒮ᵀ (−β*, β)`, i.e. `β = S₁α + S₂α*` and `α = S₁†β − S₂ᵀβ*`.
pub fn local_normal_convert(decomp: &NormalModeDecomposition, v: &[C64], direction: Direction) -> Vec<C64> {
    let n = decomp.len();
    assert_eq!(v.len(), n, "vector length must match the mode count");
    let x = DVector::from_column_slice(v);
    let xc = x.map(|c| c.conj());
    let out = match direction {
        Direction::LocalToNormal => &decomp.s1 * &x + &decomp.s2 * &xc,
        Direction::NormalToLocal => decomp.s1.adjoint() * &x - decomp.s2.transpose() * &xc,
    };
    out.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(omega: f64, j: f64, k: f64) -> NetworkSpec {
        NetworkSpec::uncoupled(vec![omega, omega]).unwrap().with_coupling(0, 1, j, k).unwrap()
    }

    fn chain3() -> NetworkSpec {
        NetworkSpec::uncoupled(vec![1.0; 3])
            .unwrap()
            .with_coupling(0, 1, 0.2, 0.2)
            .unwrap()
            .with_coupling(1, 2, 0.2, 0.2)
            .unwrap()
    }

    #[test]
    fn quadratic_form_single_oscillator() {
        let h = build_quadratic_form(&NetworkSpec::uncoupled(vec![1.0]).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0].map(|x| C64::new(x, 0.0))));
    }

    #[test]
    fn quadratic_form_blocks() {
        let h = build_quadratic_form(&pair(1.0, 0.2, 0.0));
        assert_eq!(h[(0, 1)], C64::new(0.2, 0.0));
        assert_eq!(h[(1, 0)], C64::new(0.2, 0.0));
        assert_eq!(h[(0, 0)], C64::new(1.0, 0.0));
        assert!((0..2).all(|i| (2..4).all(|j| h[(i, j)] == C64::new(0.0, 0.0))));

        let h = build_quadratic_form(&pair(1.0, 0.2, 0.2));
        let off = h.view((0, 2), (2, 2)).into_owned();
        assert_eq!(off, DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2, 0.0].map(|x| C64::new(x, 0.0))));
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(NetworkSpec::uncoupled(vec![]).is_err());
        assert!(NetworkSpec::uncoupled(vec![1.0, -1.0]).is_err());
        let mut j = DMatrix::zeros(2, 2);
        j[(0, 0)] = 0.1;
        assert!(NetworkSpec::new(vec![1.0, 1.0], j, DMatrix::zeros(2, 2)).is_err());
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.3, 0.0]);
        assert!(NetworkSpec::new(vec![1.0, 1.0], j, DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn free_oscillator_is_identity() {
        let d = diagonalize(&NetworkSpec::uncoupled(vec![1.0]).unwrap()).unwrap();
        assert!((d.nu[0] - 1.0).abs() < 1e-15);
        assert!((d.s1[(0, 0)] - 1.0).norm() < 1e-15);
        assert!(d.s2[(0, 0)].norm() < 1e-15);
        assert!((d.g[0] - 1.0).norm() < 1e-15);
        let r = verify_symplectic(&d);
        assert!(r.max() < 1e-15);
    }

    #[test]
    fn three_site_chain_spectrum() {
        let d = diagonalize(&chain3()).unwrap();
        // ν_k = sqrt(1 + 0.8 cos(πk/4)), k = 3, 2, 1 in ascending order
        let want = [
            (1.0 + 0.8 * (3.0 * std::f64::consts::PI / 4.0).cos()).sqrt(),
            1.0,
            (1.0 + 0.8 * (std::f64::consts::PI / 4.0).cos()).sqrt(),
        ];
        for (a, b) in d.nu.iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((d.nu[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_instability() {
        let spec = NetworkSpec::uncoupled(vec![0.1, 0.1]).unwrap().with_coupling(0, 1, 0.2, 0.2).unwrap();
        match diagonalize(&spec) {
            Err(Error::UnstableNetwork { nu_im, .. }) => assert!(nu_im > 0.1),
            other => panic!("expected instability, got {other:?}"),
        }
        // indefinite P as well
        let spec = NetworkSpec::uncoupled(vec![0.1, 0.1]).unwrap().with_coupling(0, 1, 0.2, -0.2).unwrap();
        assert!(matches!(diagonalize(&spec), Err(Error::UnstableNetwork { .. })));
    }

    #[test]
    fn corrupted_blocks_fail_symplectic_check() {
        let mut d = diagonalize(&chain3()).unwrap();
        d.s2[(1, 2)] += 0.1;
        let r = verify_symplectic(&d);
        assert!(r.max() >= 0.05, "{r:?}");
    }

    #[test]
    fn decomposition_reproduces_quadratic_form() {
        let spec = chain3();
        let d = diagonalize(&spec).unwrap();
        assert!(diagonal_form_residual(&spec, &d) < 1e-12);
    }

    #[test]
    fn assumption_failures_are_reported() {
        let d = diagonalize(&pair(1.0, 0.0, 0.0)).unwrap();
        let r = check_assumptions(&d, DEFAULT_G_TOL, DEFAULT_GAP_TOL);
        assert!(!r.nondegenerate);
        assert_eq!(r.degenerate_pairs, vec![(0, 1)]);

        // node 2 decoupled from the probe
        let spec = NetworkSpec::uncoupled(vec![1.0, 1.3]).unwrap();
        let d = diagonalize(&spec).unwrap();
        let r = check_assumptions(&d, DEFAULT_G_TOL, DEFAULT_GAP_TOL);
        assert!(!r.probe_couples_all);
        assert_eq!(r.weak_modes, vec![1]);
        assert!(r.nondegenerate);
        // gauge for G = 0 rows: largest S1 entry real positive
        assert!(d.s1[(1, 1)].re > 0.0 && d.s1[(1, 1)].im == 0.0);
    }

    #[test]
    fn near_degenerate_is_flagged() {
        let spec = NetworkSpec::uncoupled(vec![1.0, 1.0 + 5e-7]).unwrap().with_coupling(0, 1, 1e-9, 0.0).unwrap();
        let d = diagonalize(&spec).unwrap();
        let r = check_assumptions(&d, 1e-12, DEFAULT_GAP_TOL);
        assert!(r.nondegenerate && r.near_degenerate);
    }

    #[test]
    fn convert_roundtrip_and_fixed_points() {
        let d = diagonalize(&chain3()).unwrap();
        let alpha = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let beta = local_normal_convert(&d, &alpha, Direction::LocalToNormal);
        for k in 0..3 {
            // real α on the probe node picks out S₁ + S₂ in column 0
            let want = d.s1[(k, 0)] + d.s2[(k, 0)];
            assert!((beta[k] - want).norm() < 1e-14);
        }
        let back = local_normal_convert(&d, &beta, Direction::NormalToLocal);
        assert!(crate::math::max_abs_diff(&alpha, &back) < 1e-12);

        let zero = vec![C64::new(0.0, 0.0); 3];
        assert_eq!(local_normal_convert(&d, &zero, Direction::NormalToLocal), zero);

        let id = diagonalize(&NetworkSpec::uncoupled(vec![1.0]).unwrap()).unwrap();
        let v = vec![C64::new(0.3, -0.7)];
        assert!(crate::math::max_abs_diff(&v, &local_normal_convert(&id, &v, Direction::LocalToNormal)) < 1e-15);
    }
}
