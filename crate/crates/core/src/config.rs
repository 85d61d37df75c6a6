//! JSON experiment configuration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::decoherence::DecoherenceSpec;
use crate::dynamics::{FockState, GaussianState, TestState};
use crate::error::{Error, Result};
use crate::math::{bose_occupation, C64};
use crate::network::{diagonalize_with_probe, Basis, NetworkSpec, NormalModeDecomposition};
use crate::noise::NoiseSpec;

/// Complex numbers are written as `[re, im]`.
pub type Pair = [f64; 2];

fn to_c(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

pub fn to_complex(ps: &[Pair]) -> Vec<C64> {
    ps.iter().map(to_c).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    pub omega: f64,
    pub j: f64,
}

/// Either the chain shorthand or explicit `ω`, `J`, `K`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopping: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<Vec<f64>>>,
    /// Index of the probed oscillator.
    #[serde(default)]
    pub probe: usize,
}

fn matrix(rows: &[Vec<f64>], n: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("network.{name} must be {n}×{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl NetworkConfig {
    pub fn from_chain(cs: &ChainSpec) -> Self {
        Self {
            chain: Some(ChainConfig { n: cs.len(), omega: cs.omega(), j: cs.hopping() }),
            ..Self::default()
        }
    }

    pub fn spec(&self) -> Result<NetworkSpec> {
        match (&self.chain, &self.omega) {
            (Some(c), None) if self.hopping.is_none() && self.active.is_none() => {
                Ok(ChainSpec::new(c.n, c.omega, c.j)?.to_network())
            }
            (None, Some(omega)) => {
                let n = omega.len();
                let zero = DMatrix::zeros(n, n);
                let j = self.hopping.as_ref().map(|r| matrix(r, n, "hopping")).transpose()?.unwrap_or(zero.clone());
                let k = self.active.as_ref().map(|r| matrix(r, n, "active")).transpose()?.unwrap_or(zero);
                NetworkSpec::new(omega.clone(), j, k)
            }
            _ => Err(Error::Config("network needs either `chain` or `omega` (with optional `hopping`, `active`)".into())),
        }
    }

    pub fn decompose(&self) -> Result<(NetworkSpec, NormalModeDecomposition)> {
        let spec = self.spec()?;
        let decomp = diagonalize_with_probe(&spec, self.probe)?;
        Ok((spec, decomp))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Square lattice `step·(i + i j)`, `|i|, |j| ≤ half_width`, in each listed mode jointly.
    Lattice { step: f64, half_width: i32, modes: Vec<usize> },
    /// Origin plus `rings × angles` points per listed mode, one mode at a time.
    Star { radius: f64, rings: usize, angles: usize, modes: Vec<usize> },
}

impl GridSpec {
    pub fn points(&self, n: usize) -> Result<Vec<Vec<C64>>> {
        let modes = match self {
            GridSpec::Lattice { modes, .. } | GridSpec::Star { modes, .. } => modes,
        };
        if modes.is_empty() || modes.iter().any(|&m| m >= n) {
            return Err(Error::Config(format!("grid modes must be non-empty indices below {n}")));
        }
        let embed = |vals: &[C64]| {
            let mut p = vec![C64::new(0.0, 0.0); n];
            for (&m, &v) in modes.iter().zip(vals) {
                p[m] = v;
            }
            p
        };
        match *self {
            GridSpec::Lattice { step, half_width, .. } => {
                if !(step > 0.0) || half_width < 0 {
                    return Err(Error::Config("lattice needs step > 0 and half_width ≥ 0".into()));
                }
                Ok(crate::analysis::lattice_points(modes.len(), step, half_width)
                    .iter()
                    .map(|v| embed(v))
                    .collect())
            }
            GridSpec::Star { radius, rings, angles, .. } => {
                if !(radius > 0.0) || rings == 0 || angles == 0 {
                    return Err(Error::Config("star needs radius > 0, rings ≥ 1, angles ≥ 1".into()));
                }
                let mut out = vec![vec![C64::new(0.0, 0.0); n]];
                for &m in modes {
                    for r in 1..=rings {
                        let rho = radius * r as f64 / rings as f64;
                        for a in 0..angles {
                            let th = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
                            let mut p = vec![C64::new(0.0, 0.0); n];
                            p[m] = C64::from_polar(rho, th);
                            out.push(p);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Interaction time; `2 · min_interaction_time` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<Pair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl ProtocolConfig {
    /// Explicit points first, then grid points.
    pub fn points(&self, n: usize) -> Result<Vec<Vec<C64>>> {
        let mut out = Vec::new();
        if let Some(ps) = &self.points {
            for p in ps {
                if p.len() != n {
                    return Err(Error::Config(format!("protocol point has {} components, network has {n}", p.len())));
                }
                out.push(to_complex(p));
            }
        }
        if let Some(g) = &self.grid {
            out.extend(g.points(n)?);
        }
        if out.is_empty() {
            return Err(Error::Config("protocol needs at least one point".into()));
        }
        if out.iter().flatten().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::Config("protocol points must be finite".into()));
        }
        Ok(out)
    }
}

/// A single value applied to every mode, or one per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerMode {
    All(f64),
    Each(Vec<f64>),
}

impl PerMode {
    pub fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            PerMode::All(x) => Ok(vec![*x; n]),
            PerMode::Each(v) if v.len() == n => Ok(v.clone()),
            PerMode::Each(v) => Err(Error::Config(format!("{name} has {} entries, network has {n} modes", v.len()))),
        }
    }
}

/// Damping rates with bath occupations given directly or through a
/// temperature (occupations then follow the normal-mode frequencies).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceConfig {
    pub kappa: PerMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<PerMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default)]
    pub nq: f64,
}

impl DecoherenceConfig {
    pub fn spec(&self, nu: &[f64]) -> Result<DecoherenceSpec> {
        let n = nu.len();
        let kappa = self.kappa.expand(n, "decoherence.kappa")?;
        let nbar = match (&self.nbar, self.temperature) {
            (Some(_), Some(_)) => return Err(Error::Config("give either decoherence.nbar or temperature, not both".into())),
            (Some(nb), None) => nb.expand(n, "decoherence.nbar")?,
            (None, Some(t)) => {
                if !(t > 0.0) {
                    return Err(Error::Config("decoherence.temperature must be positive".into()));
                }
                nu.iter().map(|&v| bose_occupation(v, t)).collect()
            }
            (None, None) => vec![0.0; n],
        };
        DecoherenceSpec::new(kappa, nbar, self.gamma1, self.gamma2, self.nq)
    }
}

fn default_cat_dim() -> usize {
    30
}

/// The test-state catalog. Amplitudes and mode indices refer to the local
/// oscillators, except `thermal`, which is thermal in the normal modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Vacuum {},
    Coherent { alpha: Vec<Pair> },
    Thermal { temperature: f64 },
    Squeezed { mode: usize, r: f64, phi: f64 },
    TwoModeSqueezed { modes: [usize; 2], r: f64 },
    Cat {
        mode: usize,
        alpha: Pair,
        #[serde(default = "default_cat_dim")]
        dim: usize,
    },
}

impl StateConfig {
    pub fn build(&self, decomp: &NormalModeDecomposition) -> Result<TestState> {
        let n = decomp.len();
        let check_mode = |m: usize| {
            if m < n {
                Ok(())
            } else {
                Err(Error::Config(format!("state mode {m} out of range for {n} modes")))
            }
        };
        Ok(match self {
            StateConfig::Vacuum {} => TestState::Gaussian(GaussianState::vacuum(n)),
            StateConfig::Coherent { alpha } => {
                if alpha.len() != n {
                    return Err(Error::Config(format!("coherent alpha needs {n} entries")));
                }
                TestState::Gaussian(GaussianState::coherent(&to_complex(alpha)))
            }
            StateConfig::Thermal { temperature } => TestState::Gaussian(GaussianState::thermal_normal(decomp, *temperature)?),
            StateConfig::Squeezed { mode, r, phi } => {
                check_mode(*mode)?;
                TestState::Gaussian(GaussianState::squeezed(n, *mode, *r, *phi)?)
            }
            StateConfig::TwoModeSqueezed { modes, r } => {
                check_mode(modes[0])?;
                check_mode(modes[1])?;
                TestState::Gaussian(GaussianState::two_mode_squeezed(n, modes[0], modes[1], *r)?)
            }
            StateConfig::Cat { mode, alpha, dim } => {
                check_mode(*mode)?;
                TestState::Fock { factor: FockState::even_cat(to_c(alpha), *dim)?, modes: vec![*mode], total: n }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TimeRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start > 0.0 && self.stop >= self.start && self.points >= 1) {
            return Err(Error::Config("sweep range needs 0 < start ≤ stop and points ≥ 1".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        Ok((0..self.points)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.points - 1) as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSweep {
    /// Phase-space point whose profile is exported; the pulse targets `−point/2`.
    pub point: Vec<Pair>,
    pub basis: Basis,
    #[serde(default = "default_spp")]
    pub samples_per_period: usize,
}

fn default_spp() -> usize {
    20
}

/// `e^{−f}` along `Re η_index` with the other components fixed at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSweep {
    pub base: Vec<Pair>,
    pub index: usize,
    pub re_start: f64,
    pub re_stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_m: Option<TimeRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<TimeRange>,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub protocol: ProtocolConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<DecoherenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub state: StateConfig,
    /// Shots per observable and point; `0` evaluates the signal exactly.
    #[serde(default)]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::from_json(&text)?, text))
    }

    /// Checks cross-section consistency without running anything expensive.
    pub fn validate(&self) -> Result<()> {
        let (_, decomp) = self.network.decompose()?;
        let n = decomp.len();
        self.protocol.points(n)?;
        if let Some(t) = self.protocol.t {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config("protocol.t must be positive".into()));
            }
        }
        if let Some(d) = &self.decoherence {
            d.spec(&decomp.nu)?;
        }
        if let Some(ns) = &self.noise {
            NoiseSpec::new(ns.epsilon)?;
        }
        self.state.build(&decomp)?;
        if self.shots > 0 && self.seed.is_none() {
            return Err(Error::Config("a seed is required when shots > 0".into()));
        }
        if let Some(sw) = &self.sweeps {
            if let Some(r) = &sw.det_m {
                r.values()?;
            }
            if let Some(r) = &sw.noise {
                r.values()?;
                if self.noise.is_none() {
                    return Err(Error::Config("the noise sweep needs a noise section".into()));
                }
            }
            if let Some(p) = &sw.profile {
                if p.point.len() != n || p.samples_per_period == 0 {
                    return Err(Error::Config("profile sweep point must match the network size".into()));
                }
            }
            if let Some(d) = &sw.damping {
                if d.base.len() != n || d.index >= n || d.points == 0 {
                    return Err(Error::Config("damping sweep base/index must match the network size".into()));
                }
                if self.decoherence.is_none() {
                    return Err(Error::Config("the damping sweep needs a decoherence section".into()));
                }
            }
        }
        Ok(())
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "network": {"chain": {"n": 2, "omega": 1.0, "j": 0.1}},
        "protocol": {"basis": "local", "grid": {"lattice": {"step": 0.5, "half_width": 1, "modes": [0]}}},
        "state": {"kind": "vacuum"}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.protocol.points(2).unwrap().len(), 9);
        assert_eq!(cfg.output, "out");
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("\"state\"", "\"stat\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("\"kind\": \"vacuum\"", "\"kind\": \"vacuum\", \"r\": 1");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("\"j\": 0.1", "\"j\": 0.1, \"k\": 0.1");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn seed_required_for_shots() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.shots = 100;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.seed = Some(3);
        cfg.validate().unwrap();
    }

    #[test]
    fn explicit_network_matches_chain() {
        let explicit = NetworkConfig {
            omega: Some(vec![1.0, 1.0]),
            hopping: Some(vec![vec![0.0, 0.1], vec![0.1, 0.0]]),
            active: Some(vec![vec![0.0, 0.1], vec![0.1, 0.0]]),
            ..NetworkConfig::default()
        };
        let chain = ExperimentConfig::from_json(MINIMAL).unwrap().network;
        assert_eq!(explicit.spec().unwrap(), chain.spec().unwrap());
        let both = NetworkConfig { chain: chain.chain.clone(), ..explicit };
        assert!(both.spec().is_err());
    }

    #[test]
    fn catalog_builds() {
        let (_, d) = ExperimentConfig::from_json(MINIMAL).unwrap().network.decompose().unwrap();
        for s in [
            r#"{"kind": "coherent", "alpha": [[0.3, 0.0], [0.0, -0.2]]}"#,
            r#"{"kind": "thermal", "temperature": 0.5}"#,
            r#"{"kind": "squeezed", "mode": 1, "r": 0.3, "phi": 0.2}"#,
            r#"{"kind": "two_mode_squeezed", "modes": [0, 1], "r": 0.2}"#,
            r#"{"kind": "cat", "mode": 0, "alpha": [1.0, 0.0], "dim": 20}"#,
        ] {
            let st: StateConfig = serde_json::from_str(s).unwrap();
            let t = st.build(&d).unwrap();
            assert!((t.chi(&[C64::new(0.0, 0.0); 2]) - 1.0).norm() < 1e-12);
        }
        let bad: StateConfig = serde_json::from_str(r#"{"kind": "squeezed", "mode": 5, "r": 0.3, "phi": 0.2}"#).unwrap();
        assert!(bad.build(&d).is_err());
    }

    #[test]
    fn decoherence_forms() {
        let nu = [1.0, 2.0];
        let d: DecoherenceConfig = serde_json::from_str(r#"{"kappa": 0.01, "temperature": 1.0}"#).unwrap();
        let s = d.spec(&nu).unwrap();
        assert_eq!(s.kappa, vec![0.01, 0.01]);
        assert!((s.nbar[1] - 1.0 / (2f64.exp() - 1.0)).abs() < 1e-15);
        let d: DecoherenceConfig = serde_json::from_str(r#"{"kappa": [0.1, 0.2], "nbar": 0.5}"#).unwrap();
        assert_eq!(d.spec(&nu).unwrap().nbar, vec![0.5, 0.5]);
        let d: DecoherenceConfig = serde_json::from_str(r#"{"kappa": [0.1], "nbar": 0.5}"#).unwrap();
        assert!(d.spec(&nu).is_err());
    }
}
