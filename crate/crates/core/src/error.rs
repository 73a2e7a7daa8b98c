use crate::exponents::Violation;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("outside the domain of definition: {0}")]
    Domain(String),

    #[error("integrand evaluation failed: {0}")]
    Evaluation(String),

    #[error("violated preconditions: {}", violations_list(.0))]
    Validity(Vec<Violation>),

    #[error("solver stopped after {iterations} iterations with relative residual {residual:e}")]
    Solver { iterations: usize, residual: f64 },

    #[error("numerically inconclusive: {0}")]
    Inconclusive(String),

    #[error("parse error: {0}")]
    Parse(String),
}

fn violations_list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}
