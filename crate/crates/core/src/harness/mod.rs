//! Numeric validation: sampling, finite-difference oracles, simulation and
//! flat-output reconstruction.

mod fd;
mod flat;
mod sample;
mod sim;

use thiserror::Error;

use crate::symx::SymError;

pub use fd::fd_bracket;
pub use flat::{flat_samples, reconstruct, round_trip, FlatSample, RoundTrip};
pub use sample::SampleBox;
pub use sim::{integrate_x, simulate, NumericRealization, Signal, Trajectory};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("regularity violated at t = {t}: |r_{index}| = {value:e}")]
    Regularity { t: f64, index: usize, value: f64 },
    #[error("root finding failed at t = {t}, level {level}, bracket [{lo}, {hi}]")]
    RootFailure { t: f64, level: usize, lo: f64, hi: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("numeric chart inversion did not converge")]
    InversionFailed,
    #[error("operation needs the triangular form in closed form (chart has no symbolic inverse)")]
    NoInverse,
    #[error(transparent)]
    Eval(#[from] SymError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
