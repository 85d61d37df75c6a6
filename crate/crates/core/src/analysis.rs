//! Post-processing of reconstructed characteristic-function samples.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dynamics::thermal_chi;
use crate::error::{Error, Result};
use crate::math::C64;

/// One reconstructed value `χ(ξ) ± err`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSample {
    pub point: Vec<C64>,
    pub value: C64,
    pub err: f64,
}

impl ChiSample {
    pub fn new(point: Vec<C64>, value: C64, err: f64) -> Self {
        Self { point, value, err }
    }
}

/// Samples with zero error get unit weight; otherwise weights are `1/err²`.
fn weights(samples: &[&ChiSample]) -> Vec<f64> {
    if samples.iter().all(|s| s.err > 0.0) {
        samples.iter().map(|s| 1.0 / (s.err * s.err)).collect()
    } else {
        vec![1.0; samples.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Only samples with `‖ξ‖ ≤ window` enter the fit.
    pub window: f64,
    /// Total degree of the polynomial in `(ξ, ξ*)`; at least the moment order.
    pub degree: usize,
}

impl FitOptions {
    /// Window 0.3, degree shrinking with the mode count so the number of
    /// coefficients stays manageable.
    pub fn for_modes(n: usize) -> Self {
        let degree = match n {
            1 => 10,
            2 => 6,
            3 | 4 => 4,
            _ => 2,
        };
        Self { window: 0.3, degree }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFit {
    /// `⟨a_j⟩`.
    pub mean: Vec<C64>,
    pub mean_err: Vec<f64>,
    /// `⟨a_j† a_k⟩`, when second moments were requested.
    pub normal: Option<DMatrix<C64>>,
    pub normal_err: Option<DMatrix<f64>>,
    /// `⟨a_j a_k⟩`, when second moments were requested.
    pub anomalous: Option<DMatrix<C64>>,
    pub anomalous_err: Option<DMatrix<f64>>,
    pub samples_used: usize,
    pub coefficients: usize,
    /// Root-mean-square of the weighted residuals.
    pub residual_rms: f64,
}

/// Exponent vectors over `(u₁…u_N, u₁*…u_N*)` with total degree `≤ degree`,
/// grouped by degree.
fn monomials(n: usize, degree: usize) -> Vec<Vec<u32>> {
    fn fill(pos: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e as u32;
            fill(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        fill(0, d, &mut vec![0; 2 * n], &mut out);
    }
    out
}

fn monomial_value(exp: &[u32], u: &[C64]) -> C64 {
    let n = u.len();
    let mut v = C64::new(1.0, 0.0);
    for (m, &x) in u.iter().enumerate() {
        if exp[m] > 0 {
            v *= x.powu(exp[m]);
        }
        if exp[n + m] > 0 {
            v *= x.conj().powu(exp[n + m]);
        }
    }
    v
}

/// Least-squares fit of `χ` as a polynomial in `(ξ, ξ*)` near the origin,
/// read out as first and (for `order = 2`) second moments:
///
/// ```text
/// χ ≈ 1 + Σ_j (ξ_j ⟨a_j†⟩ − ξ_j* ⟨a_j⟩)
///       + Σ_{j<k} (ξ_j ξ_k ⟨a_j†a_k†⟩ + ξ_j* ξ_k* ⟨a_j a_k⟩) + ½ Σ_j (ξ_j² ⟨a_j†²⟩ + ξ_j*² ⟨a_j²⟩)
///       − Σ_{jk} ξ_j ξ_k* (⟨a_j†a_k⟩ + ½ δ_jk) + …
/// ```
pub fn fit_moments(samples: &[ChiSample], order: usize, opts: FitOptions) -> Result<MomentFit> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidInput(format!("moment order must be 1 or 2, got {order}")));
    }
    let n = samples.first().map(|s| s.point.len()).unwrap_or(0);
    if n == 0 || samples.iter().any(|s| s.point.len() != n) {
        return Err(Error::InvalidInput("samples must share a non-zero dimension".into()));
    }
    if !(opts.window > 0.0) {
        return Err(Error::InvalidInput("fit window must be positive".into()));
    }
    let degree = opts.degree.max(order);
    let used: Vec<&ChiSample> = samples
        .iter()
        .filter(|s| s.point.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() <= opts.window * (1.0 + 1e-12))
        .collect();
    let exps = monomials(n, degree);
    let p = exps.len();
    let m = used.len();
    if m < p {
        return Err(Error::TooFewSamples { inside: m, needed: p, window: opts.window });
    }
    let w = weights(&used);
    let scale = opts.window;
    let a = DMatrix::from_fn(m, p, |i, j| {
        let u: Vec<C64> = used[i].point.iter().map(|x| x / scale).collect();
        monomial_value(&exps[j], &u) * w[i].sqrt()
    });
    let b = DVector::from_fn(m, |i, _| used[i].value * w[i].sqrt());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * smax).count();
    if rank < p {
        return Err(Error::RankDeficient { rank, needed: p });
    }
    let x = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let resid = &a * &x - &b;
    let rss: f64 = resid.iter().map(|r| r.norm_sqr()).sum();
    // absolute errors when supplied; otherwise scale by the residual variance
    let sigma2 = if used.iter().all(|s| s.err > 0.0) {
        1.0
    } else if m > p {
        rss / (m - p) as f64
    } else {
        0.0
    };
    let v_t = svd.v_t.as_ref().expect("requested");
    let coef_err: Vec<f64> = (0..p)
        .map(|j| {
            let var: f64 = (0..p)
                .map(|k| v_t[(k, j)].norm_sqr() / svd.singular_values[k].powi(2))
                .sum();
            (sigma2 * var).sqrt()
        })
        .collect();

    let index: HashMap<&[u32], usize> = exps.iter().enumerate().map(|(i, e)| (e.as_slice(), i)).collect();
    let unit = |pairs: &[(usize, u32)]| {
        let mut e = vec![0u32; 2 * n];
        for &(i, k) in pairs {
            e[i] += k;
        }
        index[e.as_slice()]
    };
    let coef = |i: usize| x[i] / scale.powi(exps[i].iter().sum::<u32>() as i32);
    let cerr = |i: usize| coef_err[i] / scale.powi(exps[i].iter().sum::<u32>() as i32);

    let mut mean = Vec::with_capacity(n);
    let mut mean_err = Vec::with_capacity(n);
    for j in 0..n {
        let (up, down) = (unit(&[(j, 1)]), unit(&[(n + j, 1)]));
        mean.push(0.5 * (coef(up).conj() - coef(down)));
        mean_err.push(0.5 * (cerr(up).powi(2) + cerr(down).powi(2)).sqrt());
    }

    let (mut normal, mut normal_err, mut anomalous, mut anomalous_err) = (None, None, None, None);
    if order == 2 {
        let mut nm = DMatrix::zeros(n, n);
        let mut ne = DMatrix::zeros(n, n);
        let mut an = DMatrix::zeros(n, n);
        let mut ae = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let i = unit(&[(j, 1), (n + k, 1)]);
                nm[(j, k)] = -coef(i) - if j == k { 0.5 } else { 0.0 };
                ne[(j, k)] = cerr(i);
                let factor = if j == k { 2.0 } else { 1.0 };
                // ξ_j* ξ_k* carries ⟨a_j a_k⟩, ξ_j ξ_k carries ⟨a_j† a_k†⟩ = ⟨a_k a_j⟩*
                let down = unit(&[(n + j, 1), (n + k, 1)]);
                let up = unit(&[(j, 1), (k, 1)]);
                an[(j, k)] = factor * 0.5 * (coef(down) + coef(up).conj());
                ae[(j, k)] = factor * 0.5 * (cerr(down).powi(2) + cerr(up).powi(2)).sqrt();
            }
        }
        // enforce Hermiticity of ⟨a†a⟩ by averaging the two estimates
        let nm = (&nm + nm.adjoint()) * C64::new(0.5, 0.0);
        normal = Some(nm);
        normal_err = Some(ne);
        anomalous = Some(an);
        anomalous_err = Some(ae);
    }
    Ok(MomentFit {
        mean,
        mean_err,
        normal,
        normal_err,
        anomalous,
        anomalous_err,
        samples_used: m,
        coefficients: p,
        residual_rms: (rss / m as f64).sqrt(),
    })
}

/// Error floor used when weighting exact samples in the thermal fit.
pub const TEMPERATURE_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureOptions {
    pub t_min: f64,
    pub t_max: f64,
    /// Significance level of the thermal hypothesis test.
    pub alpha: f64,
}

impl TemperatureOptions {
    /// Search `[10⁻³ ν_min, 10⁴ ν_max]`, test at the 1% level.
    pub fn for_spectrum(nu: &[f64]) -> Self {
        let lo = nu.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nu.iter().copied().fold(0.0, f64::max);
        Self { t_min: 1e-3 * lo, t_max: 1e4 * hi, alpha: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureFit {
    pub temperature: f64,
    /// Weighted sum of squared residuals at the optimum.
    pub residual: f64,
    /// Same as `residual`; χ²-distributed with `dof` degrees of freedom
    /// under the thermal hypothesis.
    pub statistic: f64,
    pub dof: usize,
    /// The `1 − alpha` quantile of the statistic.
    pub threshold: f64,
    /// The fit sits on the lower search bound.
    pub at_lower_bound: bool,
    /// Flag raised when the thermal hypothesis is rejected.
    pub not_thermal: bool,
}

/// Fits `χ̄_T(η) = exp(−Σ_k [𝒩(ν_k) + ½] |η_k|²)` to normal-basis samples.
pub fn estimate_temperature(samples: &[ChiSample], nu: &[f64], opts: TemperatureOptions) -> Result<TemperatureFit> {
    let n = nu.len();
    if n == 0 || samples.iter().any(|s| s.point.len() != n) {
        return Err(Error::InvalidInput("sample dimension must match the spectrum".into()));
    }
    for k in 0..n {
        if !samples.iter().any(|s| s.point[k].norm() > 0.0) {
            return Err(Error::InvalidInput(format!("no sample probes mode {k}")));
        }
    }
    if !(opts.t_min > 0.0 && opts.t_max > opts.t_min) {
        return Err(Error::InvalidInput("temperature bounds must satisfy 0 < t_min < t_max".into()));
    }
    let w: Vec<f64> = samples.iter().map(|s| 1.0 / s.err.max(TEMPERATURE_ERR_FLOOR).powi(2)).collect();
    let cost = |log_t: f64| -> f64 {
        let t = log_t.exp();
        samples
            .iter()
            .zip(&w)
            .map(|(s, wi)| wi * (s.value - thermal_chi(&s.point, t, nu)).norm_sqr())
            .sum()
    };

    let (lo, hi) = (opts.t_min.ln(), opts.t_max.ln());
    let grid = 400;
    let xs: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| cost(x)).collect();
    let best = (0..=grid).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("non-empty grid");

    let (mut x_best, mut f_best) = (xs[best], vals[best]);
    if best > 0 {
        // golden-section search on the bracketing cells
        let (mut a, mut b) = (xs[best - 1], xs[(best + 1).min(grid)]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (cost(c), cost(d));
        while (b - a).abs() > 1e-10 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = cost(d);
            }
        }
        let x = 0.5 * (a + b);
        let fx = cost(x);
        if fx < f_best {
            x_best = x;
            f_best = fx;
        }
    }
    // a flat cost down to the lower bound means the data cannot tell T from 0
    let at_lower_bound = best == 0 || vals[0] <= f_best;
    let mut temperature = x_best.exp();
    if at_lower_bound {
        temperature = opts.t_min;
        f_best = vals[0];
    }
    let dof = (2 * samples.len()).saturating_sub(1).max(1);
    let threshold = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(1.0 - opts.alpha);
    Ok(TemperatureFit {
        temperature,
        residual: f_best,
        statistic: f_best,
        dof,
        threshold,
        at_lower_bound,
        not_thermal: f_best > threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BochnerReport {
    /// Smallest eigenvalue of the kernel on the usable subset.
    pub min_eigenvalue: f64,
    pub tol: f64,
    /// `|χ(0) − 1|`.
    pub normalization_error: f64,
    pub passed: bool,
    /// Indices of the samples forming the difference-closed subset.
    pub used: Vec<usize>,
}

fn key(point: &[C64]) -> Vec<i64> {
    point
        .iter()
        .flat_map(|x| [(x.re * 1e9).round() as i64, (x.im * 1e9).round() as i64])
        .collect()
}

/// Positivity test of `B_jk = χ(ξ_j − ξ_k) exp(½(ξ_j·ξ_k* − ξ_j*·ξ_k))` on the
/// largest difference-closed subset of the sample points, together with
/// the normalization `χ(0) = 1`. Passes when both hold to
/// `tol = max(3 · max err, 10⁻¹⁰)`.
pub fn bochner_check(samples: &[ChiSample]) -> Result<BochnerReport> {
    let n = samples.first().map(|s| s.point.len()).unwrap_or(0);
    if samples.iter().any(|s| s.point.len() != n) {
        return Err(Error::InvalidInput("samples must share a dimension".into()));
    }
    let lookup: HashMap<Vec<i64>, usize> = samples.iter().enumerate().map(|(i, s)| (key(&s.point), i)).collect();
    let diff = |a: usize, b: usize| -> Vec<C64> {
        samples[a].point.iter().zip(&samples[b].point).map(|(x, y)| x - y).collect()
    };

    // drop the worst-connected point until every difference is available
    let absent = |a: usize, b: usize| !lookup.contains_key(&key(&diff(a, b)));
    let mut alive: Vec<usize> = (0..samples.len()).collect();
    let mut missing: Vec<usize> = alive.iter().map(|&a| alive.iter().filter(|&&b| absent(a, b)).count()).collect();
    while let Some((pos, _)) = missing.iter().enumerate().filter(|(_, &m)| m > 0).max_by_key(|(i, &m)| (m, *i)) {
        let gone = alive.remove(pos);
        missing.remove(pos);
        for (m, &a) in missing.iter_mut().zip(&alive) {
            if absent(a, gone) {
                *m -= 1;
            }
        }
    }
    let needed = 3.min(samples.len()).max(1);
    if alive.len() < needed {
        return Err(Error::InsufficientClosure { usable: alive.len(), needed });
    }

    let chi = |p: &[C64]| samples[lookup[&key(p)]].value;
    let m = alive.len();
    let kernel = DMatrix::from_fn(m, m, |j, k| {
        let (a, b) = (&samples[alive[j]].point, &samples[alive[k]].point);
        let cross: C64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj() - x.conj() * y).sum();
        chi(&diff(alive[j], alive[k])) * (0.5 * cross).exp()
    });
    let herm = (&kernel + kernel.adjoint()) * C64::new(0.5, 0.0);
    let min_eigenvalue = herm.symmetric_eigen().eigenvalues.min();
    let max_err = alive.iter().map(|&i| samples[i].err).fold(0.0, f64::max);
    let tol = (3.0 * max_err).max(1e-10);
    let normalization_error = (chi(&vec![C64::new(0.0, 0.0); n]) - 1.0).norm();
    Ok(BochnerReport {
        min_eigenvalue,
        tol,
        normalization_error,
        passed: min_eigenvalue >= -tol && normalization_error <= tol,
        used: alive,
    })
}

/// `{Σ_m c_m e_m}` lattice points in each mode with integer coefficients
/// `|c| ≤ radius_steps`, spacing `step`; closed under differences up to
/// the boundary, which the Bochner check trims.
pub fn lattice_points(modes: usize, step: f64, radius_steps: i32) -> Vec<Vec<C64>> {
    let per_mode: Vec<C64> = (-radius_steps..=radius_steps)
        .flat_map(|i| (-radius_steps..=radius_steps).map(move |j| C64::new(i as f64 * step, j as f64 * step)))
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..modes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<C64>| {
                per_mode.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}
