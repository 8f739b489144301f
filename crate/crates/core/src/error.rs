use thiserror::Error;

use crate::symexpr::GVar;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no binding for variable {0}")]
    UnboundVariable(GVar),

    #[error("argument out of range: {0}")]
    ArgumentRange(String),

    #[error("order {0} missing from the recursion cache")]
    MissingCache(usize),

    #[error("invalid spectral model: {0}")]
    InvalidModel(String),

    #[error("Laurent fit is ill-conditioned: {0}")]
    FitConditioning(String),

    #[error("ground state is not isolated on the coupling grid: {0}")]
    Degeneracy(String),

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("autocorrelation window selection failed: {0}")]
    WindowSelection(String),

    #[error("tau grid invalid: {0}")]
    TauGrid(String),

    #[error("cumulant growth is not linear on the fit range: {0}")]
    NonLinearity(String),

    #[error("parse error: {0}")]
    Parse(String),
}
