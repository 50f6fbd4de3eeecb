use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or argument is outside its admissible domain.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The discretized thermal network does not dissipate: some mode has no
    /// path to ambient.
    #[error("thermal model is not stable: spectral radius {spectral_radius} >= 1")]
    Unstable { spectral_radius: f64 },

    /// `M_j < j` leaves the beta_j sum empty, which would make `N_j` infinite.
    #[error("incremental schedule degenerate at iteration {iteration}: M_j = {m_j} < j")]
    ScheduleDegenerate { iteration: usize, m_j: u64 },

    #[error("QP solver exceeded {iterations} iterations")]
    Convergence { iterations: usize, best: Vec<f64> },

    #[error("re-solve without {what} {index} failed: {source}")]
    SupportResolve {
        what: &'static str,
        index: usize,
        source: Box<Error>,
    },

    #[error("scenario program is infeasible")]
    Infeasible,
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { what, expected, got })
        }
    }
}
