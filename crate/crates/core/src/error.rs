use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("degenerate measurement: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("undefined AP: no ground-truth boxes")]
    UndefinedAp,
    #[error("singular innovation covariance")]
    SingularInnovation,
    #[error("frame {got} is not after previous frame {previous}")]
    OutOfOrderFrame { previous: u64, got: u64 },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
