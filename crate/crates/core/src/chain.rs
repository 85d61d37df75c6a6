//! Closed forms for the uniform linear chain with `J_{n,n+1} = K_{n,n+1} = J`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::C64;
use crate::network::{NetworkSpec, NormalModeDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    n: usize,
    omega: f64,
    j: f64,
}

impl ChainSpec {
    pub fn new(n: usize, omega: f64, j: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one site".into()));
        }
        if !(omega.is_finite() && omega > 0.0) || !j.is_finite() {
            return Err(Error::InvalidInput(format!("bad chain parameters omega={omega}, J={j}")));
        }
        let cs = Self { n, omega, j };
        for (k, e) in cs.epsilons().into_iter().enumerate() {
            let value = omega + 2.0 * e;
            if value <= 0.0 {
                return Err(Error::UnstableChain { k: k + 1, value });
            }
        }
        Ok(cs)
    }

    /// Parses the `N,omega,J` shorthand.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidInput(format!("expected N,omega,J but got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = parts[0].parse().map_err(|_| bad())?;
        let omega = parts[1].parse().map_err(|_| bad())?;
        let j = parts[2].parse().map_err(|_| bad())?;
        Self::new(n, omega, j)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn hopping(&self) -> f64 {
        self.j
    }

    fn epsilons(&self) -> Vec<f64> {
        let l = (self.n + 1) as f64;
        (1..=self.n).map(|k| 2.0 * self.j * (PI * k as f64 / l).cos()).collect()
    }

    fn squeezing(&self) -> Vec<f64> {
        self.epsilons()
            .into_iter()
            .zip(chain_spectrum(self))
            .map(|(e, nu)| (e / (self.omega + e + nu)).atanh())
            .collect()
    }

    pub fn to_network(&self) -> NetworkSpec {
        let mut net = NetworkSpec::uncoupled(vec![self.omega; self.n]).expect("omega validated");
        for i in 0..self.n.saturating_sub(1) {
            net = net.with_coupling(i, i + 1, self.j, self.j).expect("neighbouring pair");
        }
        net
    }
}

/// `ν_k = √(ω(ω + 2ε_k))`, `ε_k = 2J cos(πk/(N+1))`, in chain order `k = 1..N`.
pub fn chain_spectrum(cs: &ChainSpec) -> Vec<f64> {
    cs.epsilons().into_iter().map(|e| (cs.omega * (cs.omega + 2.0 * e)).sqrt()).collect()
}

/// `G_k = √(2/(N+1)) e^{−r_k} sin(πk/(N+1))` in chain order, where
/// `e^{−r_k} = √(ω/ν_k)`.
pub fn chain_g(cs: &ChainSpec) -> Vec<f64> {
    let l = (cs.n + 1) as f64;
    let norm = (2.0 / l).sqrt();
    cs.squeezing()
        .into_iter()
        .enumerate()
        .map(|(i, r)| norm * (-r).exp() * (PI * (i + 1) as f64 / l).sin())
        .collect()
}

/// Analytic decomposition, rows reordered so `ν` ascends. The chain blocks
/// are real with `G_k > 0`, which is already the canonical gauge.
pub fn chain_decomposition(cs: &ChainSpec) -> NormalModeDecomposition {
    let n = cs.n;
    let l = (n + 1) as f64;
    let norm = (2.0 / l).sqrt();
    let nu = chain_spectrum(cs);
    let r = cs.squeezing();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nu[a].total_cmp(&nu[b]));

    let sine = |k: usize, m: usize| (PI * ((k + 1) * (m + 1)) as f64 / l).sin();
    let s1 = DMatrix::from_fn(n, n, |row, m| {
        let k = order[row];
        C64::new(norm * r[k].cosh() * sine(k, m), 0.0)
    });
    let s2 = DMatrix::from_fn(n, n, |row, m| {
        let k = order[row];
        C64::new(norm * r[k].sinh() * sine(k, m), 0.0)
    });
    let nu_sorted = order.iter().map(|&k| nu[k]).collect();
    NormalModeDecomposition::from_blocks(nu_sorted, s1, s2, 0).expect("square blocks")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::verify_symplectic;

    #[test]
    fn three_site_values() {
        let nu = chain_spectrum(&ChainSpec::new(3, 1.0, 0.2).unwrap());
        let want = [1.25128, 1.0, 0.65903];
        for (a, b) in nu.iter().zip(want) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn middle_mode_of_odd_chain_sits_at_omega() {
        for n in [1, 3, 5, 9] {
            let nu = chain_spectrum(&ChainSpec::new(n, 1.7, 0.3).unwrap());
            assert!((nu[(n + 1) / 2 - 1] - 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_chain() {
        let cs = ChainSpec::new(4, 1.0, 0.0).unwrap();
        assert!(chain_spectrum(&cs).iter().all(|&v| v == 1.0));
        let d = chain_decomposition(&cs);
        assert!(d.s2.iter().all(|x| x.norm() == 0.0));
        // S₁ is the orthogonal sine transform
        let st = d.s1.transpose() * &d.s1;
        assert!((st - DMatrix::<C64>::identity(4, 4)).iter().all(|x| x.norm() < 1e-14));
        let g = chain_g(&cs);
        for (k, gk) in g.iter().enumerate() {
            let want = (2.0f64 / 5.0).sqrt() * (PI * (k + 1) as f64 / 5.0).sin();
            assert!((gk - want).abs() < 1e-15);
        }
    }

    #[test]
    fn single_site() {
        let cs = ChainSpec::new(1, 1.0, 0.2).unwrap();
        assert_eq!(chain_g(&cs), vec![1.0]);
        assert_eq!(chain_spectrum(&cs), vec![1.0]);
    }

    #[test]
    fn nodal_structure() {
        let cs = ChainSpec::new(5, 1.0, 0.2).unwrap();
        let d = chain_decomposition(&cs);
        // rows are sorted ascending: row 0 is chain mode k = 5; k*n = 6*m zero at n = 6 only (out of range),
        // chain mode k = 3 (middle, row 2) vanishes on n = 2 and n = 4
        assert!(d.s1[(2, 1)].norm() < 1e-15 && d.s1[(2, 3)].norm() < 1e-15);
        assert!(d.s2[(2, 1)].norm() < 1e-15);
    }

    #[test]
    fn eight_site_symplectic_and_g_closure() {
        let cs = ChainSpec::new(8, 1.0, 0.2).unwrap();
        let d = chain_decomposition(&cs);
        assert!(verify_symplectic(&d).max() < 1e-12);
        let g = chain_g(&cs);
        let nu = chain_spectrum(&cs);
        for (row, &v) in d.nu.iter().enumerate() {
            let k = nu.iter().position(|&x| x == v).unwrap();
            assert!(g[k] > 0.0);
            assert!((d.g[row].re - g[k]).abs() < 1e-12 && d.g[row].im == 0.0);
        }
    }

    #[test]
    fn closed_form_diagonalizes_the_chain() {
        use crate::network::{diagonal_form_residual, diagonalize};
        for n in [2, 5, 8] {
            let cs = ChainSpec::new(n, 1.0, 0.2).unwrap();
            let closed = chain_decomposition(&cs);
            assert!(diagonal_form_residual(&cs.to_network(), &closed) < 1e-12);
            let numeric = diagonalize(&cs.to_network()).unwrap();
            for k in 0..n {
                assert!((closed.g[k] - numeric.g[k]).norm() < 1e-12);
                let want = (2.0 / (n + 1) as f64).sqrt() * (1.0 / closed.nu[k]).sqrt();
                assert!(closed.g[k].re <= want + 1e-15);
            }
        }
    }

    #[test]
    fn unstable_chain_rejected() {
        assert!(matches!(ChainSpec::new(8, 1.0, 0.3), Err(Error::UnstableChain { .. })));
        assert!(ChainSpec::new(8, 1.0, 0.2).is_ok());
    }

    #[test]
    fn shorthand() {
        let cs = ChainSpec::parse("8, 1, 0.2").unwrap();
        assert_eq!((cs.len(), cs.omega(), cs.hopping()), (8, 1.0, 0.2));
        assert!(ChainSpec::parse("8,1").is_err());
    }
}
