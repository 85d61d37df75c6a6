use thiserror::Error;

/// Everything that can go wrong between a network description and a
/// reconstructed characteristic function.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unstable network: normal mode {index} has frequency {nu_re:+.3e}{nu_im:+.3e}i")]
    UnstableNetwork { index: usize, nu_re: f64, nu_im: f64 },

    #[error("unstable chain: omega + 2*eps_{k} = {value:.3e} <= 0")]
    UnstableChain { k: usize, value: f64 },

    #[error("degenerate spectrum: smallest gap {gap:.3e} <= tolerance {tol:.3e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("assumption violated: |G_{index}| = {value:.3e} <= {tol:.3e}")]
    AssumptionViolation { index: usize, value: f64, tol: f64 },

    #[error("M matrix ill-conditioned: cond = {cond:.3e} > {limit:.1e} (interaction time too short?)")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("solution lost its conjugate-pair structure (mismatch {mismatch:.3e})")]
    SymmetryBroken { mismatch: f64 },

    #[error("non-physical characteristic function value: |chi| = {0:.6}")]
    NonPhysicalChi(f64),

    #[error("Fock truncation leak: boundary population {population:.3e} > {limit:.1e}")]
    TruncationLeak { population: f64, limit: f64 },

    #[error("least-squares design matrix is rank deficient (rank {rank} < {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("only {inside} samples inside the fit window {window}, need {needed}")]
    TooFewSamples { inside: usize, needed: usize, window: f64 },

    #[error("only {usable} difference-closed points available, need {needed}")]
    InsufficientClosure { usable: usize, needed: usize },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("point {index} {point}: {source}")]
    AtPoint { index: usize, point: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier for machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::UnstableNetwork { .. } => "UnstableNetwork",
            Error::UnstableChain { .. } => "UnstableChain",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::AssumptionViolation { .. } => "AssumptionViolation",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::SymmetryBroken { .. } => "SymmetryBroken",
            Error::NonPhysicalChi(_) => "NonPhysicalChi",
            Error::TruncationLeak { .. } => "TruncationLeak",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InsufficientClosure { .. } => "InsufficientClosure",
            Error::Integration(_) => "Integration",
            Error::Config(_) => "Config",
            Error::AtPoint { source, .. } => source.code(),
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
