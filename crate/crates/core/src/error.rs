use thiserror::Error;

/// Which end of the `a` axis a root search was working on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Interval to the right of the last zero of `g`; gives `lambda > 0`.
    LastZero,
    /// Interval to the left of the first zero of `g`; gives `lambda < 0`.
    FirstZero,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::LastZero => f.write_str("last-zero"),
            Branch::FirstZero => f.write_str("first-zero"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    // ---- ingestion ----
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("bin [{x_lo}, {x_hi}) has non-positive or non-finite width")]
    InvalidWidth { x_lo: f64, x_hi: f64 },
    #[error("count {value} is not a non-negative integer")]
    InvalidCount { value: f64 },
    #[error("bins [{a_lo}, {a_hi}) and [{b_lo}, {b_hi}) overlap")]
    Overlap {
        a_lo: f64,
        a_hi: f64,
        b_lo: f64,
        b_hi: f64,
    },
    #[error("cumulative count decreases at index {index} ({previous} -> {current})")]
    DecreasingCumulative {
        index: f64,
        previous: f64,
        current: f64,
    },
    #[error("indices must increase by exactly 1 (got {previous} then {current})")]
    NonUnitIndexStep { previous: f64, current: f64 },
    #[error("range bound {value} is incompatible with the data ({reason})")]
    InvalidRange { value: f64, reason: &'static str },
    #[error("group {start}..={end} spans a gap between bins {gap_after} and {}", gap_after + 1)]
    NonContiguousGroup {
        start: usize,
        end: usize,
        gap_after: usize,
    },
    #[error("invalid group {start}..={end}: {reason}")]
    InvalidGroup {
        start: usize,
        end: usize,
        reason: &'static str,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected csv header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error("line {line}: cannot parse {field:?} as a number")]
    Parse { line: u64, field: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),

    // ---- model evaluation ----
    #[error("a = {a} is within tolerance of the pole of bin {bin}")]
    PoleProximity { bin: usize, a: f64 },
    #[error("g(a) vanishes at a = {a}; F(a) is singular")]
    Singular { a: f64 },
    #[error("lambda(a) denominator vanishes at a = {a}")]
    ZeroDenominator { a: f64 },
    #[error("parameters outside the model domain: {0}")]
    Domain(String),

    // ---- solver ----
    #[error("all counts are zero; the fit is undefined")]
    AllZeroCounts,
    #[error("need at least 2 distinct non-zero bins to identify the slope, found {n_nonzero}")]
    Identifiability { n_nonzero: usize },
    #[error("F(a) did not change sign on the {branch} branch (bracket [{lo}, {hi}])")]
    NoSignChange { branch: Branch, lo: f64, hi: f64 },
    #[error("no acceptable solution on either branch")]
    NotAcceptable,
    #[error("bisection did not converge within {max_iter} iterations")]
    MaxIterations { max_iter: usize },
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),

    // ---- uncertainty ----
    #[error("model vanishes at bin {bin}; information matrix is singular")]
    BoundarySingular { bin: usize },
    #[error("information determinant {det} is not positive")]
    NonPositiveDeterminant { det: f64 },

    // ---- goodness of fit / special functions ----
    #[error("Poisson mean must be positive, got {mu}")]
    NonPositiveMean { mu: f64 },
    #[error("probability {p} outside (0, 1)")]
    InvalidProbability { p: f64 },
    #[error("degrees of freedom must be positive, got {dof}")]
    InvalidDof { dof: f64 },

    // ---- baselines ----
    #[error("need at least 3 points, got {n}")]
    InsufficientPoints { n: usize },
    #[error("regressor values are degenerate (zero spread)")]
    DegenerateX,
    #[error("fitted line gives negative variance proxy {value} at point {index}")]
    NegativeVarianceProxy { index: usize, value: f64 },
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("bin {index} has zero counts; chi-square weights are undefined")]
    ZeroCountBin { index: usize },

    // ---- simulation ----
    #[error("invalid simulation parameters: {0}")]
    InvalidParameters(String),
}

impl Error {
    /// True for failures caused by the input data or its encoding rather than by fitting.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput
                | Error::InvalidWidth { .. }
                | Error::InvalidCount { .. }
                | Error::Overlap { .. }
                | Error::DecreasingCumulative { .. }
                | Error::NonUnitIndexStep { .. }
                | Error::InvalidRange { .. }
                | Error::NonContiguousGroup { .. }
                | Error::InvalidGroup { .. }
                | Error::Csv(_)
                | Error::Header { .. }
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
