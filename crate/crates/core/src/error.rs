use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // model
    #[error("kappa must be positive (got {0})")]
    NonPositiveKappa(f64),
    #[error("drive strength omega must be non-negative (got {0})")]
    NegativeDrive(f64),
    #[error("branch weight exceeds 1 (|eta| = {0})")]
    BranchWeightTooLarge(f64),
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("invalid branch weights: {0}")]
    InvalidBranchWeights(String),
    #[error("mean-field state has zero total radius")]
    ZeroState,
    #[error("sector epsilon must lie in [0, 1] (got {0})")]
    EpsilonOutOfRange(f64),
    #[error("sector family requires eta > 0 (got {0})")]
    NonPositiveEta(f64),
    #[error("degenerate field direction: |Omega| = {0:e}")]
    DegenerateField(f64),
    #[error("atom count {0} outside the supported range 1..=6")]
    AtomCount(usize),

    // integration
    #[error("invalid integration request: {0}")]
    InvalidRequest(String),
    #[error("stiff or degenerate dynamics: step size {h:e} underflowed at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} steps exhausted")]
    StepBudget(usize),

    // phase / torus
    #[error("branch lists have mismatched lengths ({0})")]
    LengthMismatch(String),
    #[error("F not strictly positive; torus average undefined (margin = {0:e})")]
    NotRunning(f64),
    #[error("grid size {0} must be a power of two >= {1}")]
    GridSize(usize, usize),
    #[error("expected exactly two branches, found {0}")]
    BranchCount(usize),
    #[error("quasi-resonant mode ({m}, {n}) with |m + n eta| = {denominator:e}; increase grid decay or change eta")]
    QuasiResonant { m: i64, n: i64, denominator: f64 },
    #[error("root finder did not converge at grid point ({ix}, {iy}); |P| = {residual:e}")]
    RootNotConverged { ix: usize, iy: usize, residual: f64 },
    #[error("not in running regime: phase decreases at sample {0}")]
    NonMonotone(usize),
    #[error("series too short: {0}")]
    TooShort(String),

    // spectra
    #[error("non-uniform sampling at index {0}")]
    NonUniformSampling(usize),
    #[error("series length {0} must be a power of two >= {1}")]
    SeriesLength(usize, usize),
    #[error("branch index {0} out of range")]
    BranchIndex(usize),

    // lyapunov
    #[error("tangent norm underflow at t = {0}: interval too long")]
    TangentUnderflow(f64),

    // qoracle
    #[error("target state not realizable by a single-atom pure state: {0}")]
    Unrealizable(String),
    #[error("positivity violated at t = {t}: {detail}")]
    Positivity { t: f64, detail: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    /// Module that raised the error, as reported in machine-readable output.
    pub fn module(&self) -> &'static str {
        use Error::*;
        match self {
            NonPositiveKappa(_) | NegativeDrive(_) | BranchWeightTooLarge(_) | NonFinite(_)
            | InvalidBranchWeights(_) | ZeroState | EpsilonOutOfRange(_) | NonPositiveEta(_)
            | DegenerateField(_) => "model",
            InvalidRequest(_) | StepUnderflow { .. } | StepBudget(_) => "dynamics",
            LengthMismatch(_) => "phase",
            NotRunning(_) | GridSize(..) | BranchCount(_) | QuasiResonant { .. }
            | RootNotConverged { .. } | NonMonotone(_) | TooShort(_) => "torus",
            NonUniformSampling(_) | SeriesLength(..) | BranchIndex(_) => "spectra",
            TangentUnderflow(_) => "lyapunov",
            AtomCount(_) | Unrealizable(_) | Positivity { .. } | Dimension(_) => "qoracle",
        }
    }

    /// Stable snake_case identifier of the error kind.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            NonPositiveKappa(_) => "non_positive_kappa",
            NegativeDrive(_) => "negative_drive",
            BranchWeightTooLarge(_) => "branch_weight_too_large",
            NonFinite(_) => "non_finite",
            InvalidBranchWeights(_) => "invalid_branch_weights",
            ZeroState => "zero_state",
            EpsilonOutOfRange(_) => "epsilon_out_of_range",
            NonPositiveEta(_) => "non_positive_eta",
            DegenerateField(_) => "degenerate_field",
            AtomCount(_) => "atom_count",
            InvalidRequest(_) => "invalid_request",
            StepUnderflow { .. } => "step_underflow",
            StepBudget(_) => "step_budget",
            LengthMismatch(_) => "length_mismatch",
            NotRunning(_) => "not_running",
            GridSize(..) => "grid_size",
            BranchCount(_) => "branch_count",
            QuasiResonant { .. } => "quasi_resonant",
            RootNotConverged { .. } => "root_not_converged",
            NonMonotone(_) => "non_monotone",
            TooShort(_) => "too_short",
            NonUniformSampling(_) => "non_uniform_sampling",
            SeriesLength(..) => "series_length",
            BranchIndex(_) => "branch_index",
            TangentUnderflow(_) => "tangent_underflow",
            Unrealizable(_) => "unrealizable",
            Positivity { .. } => "positivity",
            Dimension(_) => "dimension",
        }
    }
}
