//! Assembled continuum data of a domain, ready for serialization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use temperley_core::DomainSpec;

use crate::harmonic::HarmonicSurface;
use crate::linalg::{complex_inverse, frobenius, is_symmetric, symmetric_eigenvalues, CMat, RMat};
use crate::riemann::{compute_shift, zero_divisor_residual, RiemannError, ThetaParams};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SurfaceOptions {
    pub h: f64,
    /// Largest accepted `|Im e|` before the shift is rejected.
    pub imag_tolerance: f64,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self { h: 1.0 / 128.0, imag_tolerance: 1e-2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceData {
    pub genus: usize,
    pub h: f64,
    pub tau: RMat<f64>,
    /// Same matrix from the fluxes through the A-contours.
    pub tau_from_periods: RMat<f64>,
    pub b: CMat<f64>,
    pub omega_coeffs: CMat<f64>,
    /// `oint_{A_i} omega_j` after normalization.
    pub a_periods: CMat<f64>,
    /// `abel[j][k] = int_{d_0}^{d_{j+1}} omega_{k+1}`.
    pub abel: Vec<Vec<Complex64>>,
    pub riemann_constants: Vec<Complex64>,
    pub e: Vec<f64>,
    pub e_imag: Vec<f64>,
    pub zero_divisor_residuals: Vec<f64>,
    pub checks: SurfaceChecks,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceChecks {
    pub tau_symmetric: bool,
    pub tau_min_eigenvalue: f64,
    /// `||i B^{-1} - tau||_F / ||tau||_F`.
    pub ib_inverse_vs_tau: f64,
    /// `||Re B|| / ||Im B||`.
    pub re_b_over_im_b: f64,
    pub a_period_error: f64,
}

impl SurfaceData {
    pub fn compute(spec: &DomainSpec, opts: SurfaceOptions) -> Result<(Self, HarmonicSurface), RiemannError> {
        let surface = HarmonicSurface::new(spec, opts.h)?;
        let data = Self::from_surface(&surface, opts)?;
        Ok((data, surface))
    }

    pub fn from_surface(surface: &HarmonicSurface, opts: SurfaceOptions) -> Result<Self, RiemannError> {
        let g = surface.genus();
        let tau = surface.tau()?;
        let tau_from_periods = surface.tau_from_periods();
        let a_periods = surface.normalized_a_periods();
        let mut checks = SurfaceChecks {
            tau_symmetric: is_symmetric(&tau, 1e-12),
            tau_min_eigenvalue: symmetric_eigenvalues(&tau).first().copied().unwrap_or(f64::INFINITY),
            ib_inverse_vs_tau: 0.0,
            re_b_over_im_b: 0.0,
            a_period_error: 0.0,
        };
        if g == 0 {
            return Ok(Self {
                genus: 0,
                h: opts.h,
                tau,
                tau_from_periods,
                b: vec![],
                omega_coeffs: vec![],
                a_periods,
                abel: vec![],
                riemann_constants: vec![],
                e: vec![],
                e_imag: vec![],
                zero_divisor_residuals: vec![],
                checks,
            });
        }
        let b = surface.period_matrix()?;
        let binv = complex_inverse(&b).ok_or_else(|| RiemannError::InvalidMatrix("B singular".into()))?;
        let diff: RMat<f64> = (0..g)
            .map(|i| (0..g).map(|j| (Complex64::i() * binv[i][j] - tau[i][j]).norm()).collect())
            .collect();
        checks.ib_inverse_vs_tau = frobenius(&diff) / frobenius(&tau);
        let re: RMat<f64> = b.iter().map(|r| r.iter().map(|z| z.re).collect()).collect();
        let im: RMat<f64> = b.iter().map(|r| r.iter().map(|z| z.im).collect()).collect();
        checks.re_b_over_im_b = frobenius(&re) / frobenius(&im);
        checks.a_period_error = (0..g)
            .flat_map(|i| (0..g).map(move |j| (i, j)))
            .map(|(i, j)| (a_periods[i][j] - if i == j { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max);
        let shift = compute_shift(surface, opts.imag_tolerance)?;
        let abel = surface.abel_marked()?;
        // symmetrize B for the theta parameters; the asymmetry is a discretization residue
        let bsym: CMat<f64> = (0..g).map(|i| (0..g).map(|j| (b[i][j] + b[j][i]) / 2.0).collect()).collect();
        let params = ThetaParams::new(bsym)?;
        let zero_divisor_residuals = zero_divisor_residual(&params, &abel, &shift.e)?;
        Ok(Self {
            genus: g,
            h: opts.h,
            tau,
            tau_from_periods,
            b,
            omega_coeffs: surface.omega_coeffs().clone(),
            a_periods,
            abel,
            riemann_constants: shift.delta,
            e: shift.e,
            e_imag: shift.e_raw.iter().map(|z| z.im).collect(),
            zero_divisor_residuals,
            checks,
        })
    }

    /// Theta parameters from the symmetric part of `B`.
    pub fn theta_params(&self) -> Result<ThetaParams<f64>, RiemannError> {
        let g = self.genus;
        ThetaParams::new((0..g).map(|i| (0..g).map(|j| (self.b[i][j] + self.b[j][i]) / 2.0).collect()).collect())
    }
}
