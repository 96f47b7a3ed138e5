use thiserror::Error;

#[derive(Debug, Error)]
pub enum RydError {
    #[error("invalid quantum numbers n={n}, l={l}, m={m}")]
    InvalidQuantumNumbers { n: u32, l: u32, m: i32 },

    #[error("quantum defect {delta} >= n = {n} gives an unphysical effective quantum number")]
    UnphysicalDefect { n: u32, delta: f64 },

    #[error("radial integration did not converge: {details}")]
    RadialNotConverged { details: String },

    #[error("dipole radial integral requires |l1 - l2| = 1, got l1={l1}, l2={l2}")]
    BadRadialL { l1: u32, l2: u32 },

    #[error("basis mixes magnetic quantum numbers (found m={found}, block m={block})")]
    MixedMBlock { block: i32, found: i32 },

    #[error("matrix is not Hermitian (max asymmetry {asym:.3e})")]
    NotHermitian { asym: f64 },

    #[error("ambiguous dressed-state label for {label}: best overlap {overlap:.4} <= 0.5")]
    AmbiguousLabel { label: String, overlap: f64 },

    #[error("missing m block {m} in dressed registry")]
    MissingBlock { m: i32 },

    #[error("empty Q subspace: selection cutoffs are too tight")]
    EmptyQSubspace,

    #[error(
        "near-resonant intermediate state (index {q_index}, gap {gap_hz:.3e} Hz) \
         invalidates the second-order expansion; use the exact reduction"
    )]
    NearResonantIntermediate { q_index: usize, gap_hz: f64 },

    #[error("degenerate eigenstate selection: 4th and 5th subspace overlaps differ by {diff:.3e}")]
    DegenerateSelection { diff: f64 },

    #[error("singular overlap matrix between eigenstates and spin subspace (sigma_min={sigma_min:.3e})")]
    SingularOverlap { sigma_min: f64 },

    #[error("no sign change of the Foerster defect in [{lo} G, {hi} G]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("multiple defect roots in range: brackets at {brackets:?} G; select one by index")]
    MultipleRoots { brackets: Vec<f64> },

    #[error("eigensolver failed to converge: {details}")]
    EigenNotConverged { details: String },

    #[error("dimension mismatch: {details}")]
    DimensionMismatch { details: String },

    #[error("system size {n} exceeds the configured cap {cap}")]
    SystemTooLarge { n: usize, cap: usize },

    #[error("unknown geometry kind '{0}'")]
    UnknownGeometry(String),

    #[error("pair ({j}, {k}): {source}")]
    PairContext {
        j: usize,
        k: usize,
        #[source]
        source: Box<RydError>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RydError>;
