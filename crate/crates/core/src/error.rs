use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was applied outside its mathematical domain
    /// (nonzero mean into an inverse Laplacian, coefficient band violation, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("input error: {0}")]
    Input(String),

    /// An iterative solve failed to reach its tolerance.
    #[error("numerical error: {context} (residual {residual:.3e} after {iterations} iterations)")]
    Numerical {
        context: String,
        residual: f64,
        iterations: usize,
    },

    /// Picard levels stopped contracting; callers should shrink the window.
    #[error("divergence error: contraction ratios {ratios:?} stayed >= 1 for 3 consecutive levels; retry with a smaller time window")]
    Divergence { ratios: Vec<f64> },

    /// Non-finite values or runaway norms appeared mid-run.
    #[error("blowup error: non-finite or runaway field at step {step} (sup norm {sup:.3e})")]
    Blowup { step: usize, sup: f64 },

    #[error("window selection failed: derived window {window:.3e} is below 10*dt = {floor:.3e} (K0 = {k0:.3e}); norm growth prevents marching")]
    WindowTooSmall { window: f64, floor: f64, k0: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
