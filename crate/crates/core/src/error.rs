use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {lambda_nm:.3} nm outside model range [{min_nm}, {max_nm}] nm")]
    WavelengthOutOfRange {
        lambda_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("transverse momentum {q:.6e} rad/m exceeds wave-vector magnitude {k:.6e} rad/m")]
    BeyondCone { q: f64, k: f64 },

    #[error("quadrature did not converge within {max_points} points per axis (value {value:.6e})")]
    QuadratureNoConverge { value: f64, max_points: usize },

    #[error("every pixel of the tuning curve is zero")]
    AllZeroGrid,

    #[error("{axis} kernel spans {steps:.2} grid steps, need at least 3")]
    KernelUnderresolved { axis: &'static str, steps: f64 },

    #[error("objective is flat across [{lo:.6e}, {hi:.6e}] m")]
    NoDescent { lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config key `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
