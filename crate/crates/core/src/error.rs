use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("columns are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("cross-product matrix is rank deficient (singular value {0:e})")]
    RankDeficient(f64),

    #[error("invalid block model: {0}")]
    InvalidModel(String),

    #[error("community {0} has zero weighted block degree")]
    DegenerateBlock(usize),

    #[error("degree of node {node} is zero after regularization")]
    SingularDegree { node: usize },

    #[error("probability {value} at ({row}, {col}) is outside [0, 1]")]
    ProbOutOfRange { row: usize, col: usize, value: f64 },

    #[error("the tau-double-prime Laplacian needs a positive theta estimate for every node")]
    MissingTheta,

    #[error("need at least {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },

    #[error("point set is empty")]
    EmptySet,

    #[error("estimated community {0} is empty")]
    EmptyCluster(usize),

    #[error("estimated community {0} has no incident edges")]
    ZeroCommunityDegree(usize),

    #[error("average degree {0} must exceed 1 to build the tau grid")]
    DegenerateGrid(f64),

    #[error("every grid point hit a degenerate criterion value")]
    AllInfinite,

    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("no records for table cell {0}")]
    MissingCell(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
