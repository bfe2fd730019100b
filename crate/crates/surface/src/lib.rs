//! Continuum side: harmonic measures and the double of the domain, theta
//! functions, and the discrete Gaussian law.

pub mod data;
pub mod dgauss;
pub mod harmonic;
pub mod linalg;
pub mod riemann;

pub use data::{SurfaceData, SurfaceOptions};
pub use dgauss::{joint_cumulant, sample_dgauss, set_partitions, DGaussError, DiscreteGaussian, DiscreteGaussianParams};
pub use harmonic::{
    complex_measure_path, greens_function, scale_matrix, solve_harmonic_measure, GreensFunction, Grid, HarmonicError,
    HarmonicField, HarmonicSolver, HarmonicSurface, Route,
};
pub use riemann::{
    compute_shift, cumulants_via_theta, odd_theta, omega0_g1, theta_directional, theta_eval, zero_divisor_residual,
    DoublePoint, RiemannError, ShiftResult, ThetaParams, TorusKernel,
};
