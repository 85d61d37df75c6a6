//! White noise on the coupling profile and the phase-space resolution it
//! leaves.
//!
//! With `g(s) → g(s) + ζ(s)`, `⟨ζ(s)ζ(s')⟩ = ε δ(s − s')`, the achieved
//! displacement picks up a zero-mean error
//! `δβ_k = −i G_k* ∫₀ᵗ ζ(s) e^{iν_k s} ds` whose covariance is
//! `V_{kk'} = ε Re{G_k* G_k' ∫₀ᵗ e^{i(ν_k − ν_k')s} ds}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp_integral, C64, I};
use crate::network::NormalModeDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub epsilon: f64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!("noise strength must be non-negative, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }
}

fn check(t: f64, eps: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(format!("interaction time must be positive, got {t}")));
    }
    NoiseSpec::new(eps).map(|_| ())
}

/// Covariance of `δβ` in closed form.
pub fn delta_beta_covariance(decomp: &NormalModeDecomposition, t: f64, eps: f64) -> Result<DMatrix<f64>> {
    check(t, eps)?;
    let (g, nu) = (&decomp.g, &decomp.nu);
    let n = decomp.len();
    let mut v = DMatrix::zeros(n, n);
    for k in 0..n {
        v[(k, k)] = eps * g[k].norm_sqr() * t;
        for l in (k + 1)..n {
            let x = eps * (g[k].conj() * g[l] * exp_integral(I * (nu[k] - nu[l]), t)).re;
            v[(k, l)] = x;
            v[(l, k)] = x;
        }
    }
    Ok(v)
}

/// Square roots of the eigenvalues of `V`, ascending. Roundoff-negative
/// eigenvalues are clamped to zero.
pub fn resolution_spectrum(v: &DMatrix<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = SymmetricEigen::new(v.clone()).eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Eigenvectors of `V` as columns, ordered like [`resolution_spectrum`].
pub fn resolution_axes(v: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(v.clone());
    let mut order: Vec<usize> = (0..v.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| eig.eigenvectors[(i, order[j])])
}

/// Step `0.005 / ν_max` used by default for the Monte Carlo discretization.
pub fn default_noise_dt(decomp: &NormalModeDecomposition) -> f64 {
    0.005 / decomp.nu_max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub realizations: usize,
    pub dt: f64,
    pub mean: Vec<C64>,
    /// Standard error of each mean component, `√(E|δβ_k|² / R)`.
    pub mean_stderr: Vec<f64>,
    /// Sample estimate of `V`.
    pub cov: DMatrix<f64>,
    pub cov_stderr: DMatrix<f64>,
}

/// Samples `δβ` by integrating piecewise-constant white noise. Each step
/// draws `ζ ~ 𝒩(0, ε/dt)` and weights it with the exact step integral of
/// `e^{iν_k s}`. Realization `r` uses stream `r` of a generator seeded by
/// `seed`, so the result does not depend on scheduling.
pub fn monte_carlo_delta_beta(
    decomp: &NormalModeDecomposition,
    t: f64,
    eps: f64,
    realizations: usize,
    dt: f64,
    seed: u64,
) -> Result<MonteCarloSummary> {
    check(t, eps)?;
    if realizations < 2 {
        return Err(Error::InvalidInput("need at least two realizations".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let n = decomp.len();
    let steps = (t / dt).ceil() as usize;
    let h = t / steps as f64;
    let sd = (eps / h).sqrt();
    // weights[j * n + k] = −i G_k* ∫_{jh}^{(j+1)h} e^{iν_k s} ds
    let weights: Vec<C64> = (0..steps)
        .flat_map(|j| {
            (0..n).map(move |k| {
                let nu = decomp.nu[k];
                -I * decomp.g[k].conj() * C64::new(0.0, nu * j as f64 * h).exp() * exp_integral(I * nu, h)
            })
        })
        .collect();

    let samples: Vec<Vec<C64>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut db = vec![C64::new(0.0, 0.0); n];
            if eps == 0.0 {
                return db;
            }
            for j in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                let z = sd * z;
                for (k, d) in db.iter_mut().enumerate() {
                    *d += z * weights[j * n + k];
                }
            }
            db
        })
        .collect();

    let rn = realizations as f64;
    let mean: Vec<C64> = (0..n).map(|k| samples.iter().map(|s| s[k]).sum::<C64>() / rn).collect();
    let mut cov = DMatrix::zeros(n, n);
    let mut cov_stderr = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            let x: Vec<f64> = samples
                .iter()
                .map(|s| ((s[k] - mean[k]) * (s[l] - mean[l]).conj()).re)
                .collect();
            let m = x.iter().sum::<f64>() / (rn - 1.0);
            let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (rn - 1.0);
            cov[(k, l)] = m;
            cov_stderr[(k, l)] = (var / rn).sqrt();
        }
    }
    let mean_stderr = (0..n).map(|k| (cov[(k, k)] / rn).sqrt()).collect();
    Ok(MonteCarloSummary { realizations, dt: h, mean, mean_stderr, cov, cov_stderr })
}
