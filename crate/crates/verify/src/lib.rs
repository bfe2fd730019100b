//! Continuum predictions for the height field of a uniform domino tiling and
//! statistical gates comparing them with exact samples.

pub mod bundle;
pub mod contour;
pub mod gates;
pub mod gof;
pub mod moments;
pub mod stats;

use thiserror::Error;

use temperley_surface::{DGaussError, HarmonicError, RiemannError};

pub use bundle::{PredictionBundle, QueryKind};
pub use contour::{contour_covariance_k2, ContourCovariance};
pub use gates::Gates;
pub use gof::{gof_hole_law, trend_report, GofReport, ScalePoint, TrendReport};
pub use moments::{moment_suite, GateKind, MomentEntry, MomentReport, SampleRow};
pub use stats::{chi_square_pvalue, grouped_jackknife};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("contour paths intersect: Re u(z1) = Re u(z2) mod 1")]
    PathsIntersect,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    DGauss(#[from] DGaussError),
}
