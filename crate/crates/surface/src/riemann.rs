//! Riemann theta functions, Riemann constants, the shift vector and the
//! genus-1 prime form.
//!
//! `theta(z; B) = sum_n exp(i pi n.Bn + 2 pi i n.z)`. The lattice sum is
//! truncated to an ellipsoid around the dominant term `c = -Y^{-1} Im z`
//! (`Y = Im B`), with a radius large enough that the neglected terms are
//! below the tolerance relative to the largest one, derivative weights
//! included.

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use temperley_core::{Point, Real};

use crate::dgauss::joint_cumulant;
use crate::harmonic::{HarmonicError, HarmonicSurface};
use crate::linalg::{is_symmetric, real_inverse, symmetric_eigenvalues, CMat, RMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiemannError {
    #[error("B must be square, symmetric, with positive definite imaginary part: {0}")]
    InvalidMatrix(String),
    #[error("lattice truncation needs about {points:.0} terms (radius {radius:.2})")]
    TruncationInsufficient { radius: f64, points: f64 },
    #[error("derivative order {0} exceeds the supported maximum")]
    OrderTooHigh(usize),
    #[error("shift has imaginary part {0:.3e}")]
    NonRealShift(f64),
    #[error("theta(e) = {0:.3e} is too close to zero")]
    ThetaNearZero(f64),
    #[error("points coincide on the double")]
    CoincidentPoints,
    #[error("operation needs genus {expected}, got {got}")]
    WrongGenus { expected: usize, got: usize },
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

pub const MAX_DERIVATIVE_ORDER: usize = 6;
const DEFAULT_TOLERANCE: f64 = 1e-12;
const MAX_POINTS: f64 = 5e6;

/// Period matrix together with the data that controls truncation.
#[derive(Clone, Debug)]
pub struct ThetaParams<T: Real> {
    b: CMat<T>,
    y: RMat<T>,
    y_inv: RMat<T>,
    lambda_min: T,
    tolerance: T,
}

impl<T: Real> ThetaParams<T> {
    pub fn new(b: CMat<T>) -> Result<Self, RiemannError> {
        let g = b.len();
        if g == 0 || b.iter().any(|r| r.len() != g) {
            return Err(RiemannError::InvalidMatrix("not a non-empty square matrix".into()));
        }
        let y: RMat<T> = b.iter().map(|r| r.iter().map(|z| z.im).collect()).collect();
        let x: RMat<T> = b.iter().map(|r| r.iter().map(|z| z.re).collect()).collect();
        let scale = y.iter().flatten().fold(T::one(), |a, v| a.max(v.abs()));
        if !is_symmetric(&y, scale * T::lit(1e-9)) || !is_symmetric(&x, scale * T::lit(1e-9)) {
            return Err(RiemannError::InvalidMatrix("not symmetric".into()));
        }
        let lambda_min = symmetric_eigenvalues(&y)[0];
        if !(lambda_min > T::zero()) {
            return Err(RiemannError::InvalidMatrix(format!("Im B has eigenvalue {lambda_min}")));
        }
        let y_inv = real_inverse(&y).ok_or_else(|| RiemannError::InvalidMatrix("Im B singular".into()))?;
        Ok(Self { b, y, y_inv, lambda_min, tolerance: T::lit(DEFAULT_TOLERANCE) })
    }

    /// `B = i tau^{-1}` for a real symmetric positive definite `tau`.
    pub fn from_tau(tau: &RMat<T>) -> Result<Self, RiemannError> {
        let inv = real_inverse(tau).ok_or_else(|| RiemannError::InvalidMatrix("tau singular".into()))?;
        Self::new(inv.iter().map(|r| r.iter().map(|v| Complex::new(T::zero(), *v)).collect()).collect())
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn genus(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &CMat<T> {
        &self.b
    }

    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    /// Center of the dominant terms for argument imaginary part `y`.
    fn center(&self, z: &[Complex<T>]) -> Vec<T> {
        self.y_inv.iter().map(|r| -r.iter().zip(z).map(|(a, w)| *a * w.im).sum::<T>()).collect()
    }

    /// Truncation radius, in the `Im B` norm, for a derivative weight of the given
    /// order and size `weight_scale` (bound on `|2 pi d.n| / (|n| + 1)`).
    pub fn radius(&self, order: usize, center_norm: T, weight_scale: T) -> T {
        let g = T::lit(self.genus() as f64);
        let two = T::lit(2.0);
        let mut rho = T::one();
        for _ in 0..4 {
            let rn = rho / self.lambda_min.sqrt();
            let poly = T::lit(order as f64) * (weight_scale * (center_norm + rn + T::one())).max(T::one()).ln();
            let count = g * (rn + two).ln();
            rho = ((-self.tolerance.ln() + poly + count + two) / T::PI()).sqrt();
        }
        rho
    }

    fn lattice(&self, c: &[T], rho: T) -> Result<Vec<Vec<i64>>, RiemannError> {
        let g = self.genus();
        let half: Vec<T> = (0..g).map(|k| rho * self.y_inv[k][k].sqrt()).collect();
        let points: f64 = half.iter().map(|h| 2.0 * h.to_f64_lossy() + 1.0).product();
        if points > MAX_POINTS {
            return Err(RiemannError::TruncationInsufficient { radius: rho.to_f64_lossy(), points });
        }
        let lo: Vec<i64> = (0..g).map(|k| (c[k] - half[k]).floor().to_f64_lossy() as i64).collect();
        let hi: Vec<i64> = (0..g).map(|k| (c[k] + half[k]).ceil().to_f64_lossy() as i64).collect();
        let mut out = Vec::new();
        let mut n = lo.clone();
        let rho2 = rho * rho;
        loop {
            let d: Vec<T> = (0..g).map(|k| T::lit(n[k] as f64) - c[k]).collect();
            let q: T = (0..g).map(|i| (0..g).map(|j| d[i] * self.y[i][j] * d[j]).sum::<T>()).sum();
            if q <= rho2 {
                out.push(n.clone());
            }
            let mut k = 0;
            loop {
                if k == g {
                    return Ok(out);
                }
                n[k] += 1;
                if n[k] <= hi[k] {
                    break;
                }
                n[k] = lo[k];
                k += 1;
            }
        }
    }

    fn sum(&self, z: &[Complex<T>], dirs: &[&[Complex<T>]], char_shift: Option<(T, T)>) -> Result<Complex<T>, RiemannError> {
        let g = self.genus();
        if z.len() != g || dirs.iter().any(|d| d.len() != g) {
            return Err(RiemannError::InvalidMatrix("argument length differs from the genus".into()));
        }
        if dirs.len() > MAX_DERIVATIVE_ORDER {
            return Err(RiemannError::OrderTooHigh(dirs.len()));
        }
        let (a, bshift) = char_shift.unwrap_or((T::zero(), T::zero()));
        let mut c = self.center(z);
        c.iter_mut().for_each(|x| *x -= a);
        let cn = c.iter().map(|x| *x * *x).sum::<T>().sqrt();
        let wscale = dirs
            .iter()
            .map(|d| T::TAU() * d.iter().map(|w| w.norm()).sum::<T>())
            .fold(T::zero(), T::max);
        let rho = self.radius(dirs.len(), cn, wscale);
        let two_pi_i = Complex::new(T::zero(), T::TAU());
        let pi_i = Complex::new(T::zero(), T::PI());
        let mut total = Complex::new(T::zero(), T::zero());
        for n in self.lattice(&c, rho)? {
            let m: Vec<T> = n.iter().map(|v| T::lit(*v as f64) + a).collect();
            let mut quad = Complex::new(T::zero(), T::zero());
            for i in 0..g {
                for j in 0..g {
                    quad = quad + self.b[i][j] * (m[i] * m[j]);
                }
            }
            let lin: Complex<T> = (0..g).map(|k| (z[k] + bshift) * m[k]).fold(Complex::new(T::zero(), T::zero()), |s, v| s + v);
            let mut term = (pi_i * quad + two_pi_i * lin).exp();
            for d in dirs {
                let dn = d.iter().zip(&m).fold(Complex::new(T::zero(), T::zero()), |s, (w, v)| s + *w * *v);
                term = term * two_pi_i * dn;
            }
            total = total + term;
        }
        Ok(total)
    }
}

fn unit<T: Real>(g: usize, k: usize) -> Vec<Complex<T>> {
    (0..g).map(|i| Complex::new(if i == k { T::one() } else { T::zero() }, T::zero())).collect()
}

/// `d^alpha theta(z; B)`, with `alpha` a multi-index of partial derivative orders.
pub fn theta_eval<T: Real>(params: &ThetaParams<T>, z: &[Complex<T>], alpha: &[usize]) -> Result<Complex<T>, RiemannError> {
    let g = params.genus();
    let units: Vec<Vec<Complex<T>>> = (0..g).map(|k| unit(g, k)).collect();
    let mut dirs: Vec<&[Complex<T>]> = Vec::new();
    for (k, &a) in alpha.iter().enumerate() {
        if k >= g && a > 0 {
            return Err(RiemannError::InvalidMatrix("multi-index longer than the genus".into()));
        }
        for _ in 0..a {
            dirs.push(&units[k]);
        }
    }
    params.sum(z, &dirs, None)
}

/// Derivative of `theta` along the given directions, one factor per direction.
pub fn theta_directional<T: Real>(params: &ThetaParams<T>, z: &[Complex<T>], dirs: &[&[Complex<T>]]) -> Result<Complex<T>, RiemannError> {
    params.sum(z, dirs, None)
}

/// Genus-1 odd theta `theta[1/2, 1/2](z; B)` and its derivatives in `z`.
pub fn odd_theta<T: Real>(params: &ThetaParams<T>, z: Complex<T>, order: usize) -> Result<Complex<T>, RiemannError> {
    if params.genus() != 1 {
        return Err(RiemannError::WrongGenus { expected: 1, got: params.genus() });
    }
    let one = [Complex::new(T::one(), T::zero())];
    let dirs: Vec<&[Complex<T>]> = (0..order).map(|_| &one[..]).collect();
    let half = T::lit(0.5);
    params.sum(&[z], &dirs, Some((half, half)))
}

/// Cumulant of the discrete Gaussian from derivatives of `log theta(Bz + e)`.
///
/// `indices` lists the coordinates involved, with repetition (for example
/// `[0, 0, 1]` is the third cumulant `kappa_{2,1}`); at least two entries.
pub fn cumulants_via_theta<T: Real>(params: &ThetaParams<T>, e: &[T], indices: &[usize]) -> Result<T, RiemannError> {
    let g = params.genus();
    let k = indices.len();
    if k < 2 {
        return Err(RiemannError::InvalidMatrix("cumulant order must be at least 2".into()));
    }
    if indices.iter().any(|&i| i >= g) || e.len() != g {
        return Err(RiemannError::InvalidMatrix("index out of range".into()));
    }
    let ez: Vec<Complex<T>> = e.iter().map(|v| Complex::new(*v, T::zero())).collect();
    // d/dz_a theta(Bz + e) = sum_b B_ba (d_b theta), so the directions are columns of B
    let cols: Vec<Vec<Complex<T>>> = (0..g).map(|a| (0..g).map(|b| params.b[b][a]).collect()).collect();
    let th0 = params.sum(&ez, &[], None)?;
    let scale = params.sum(&ez.iter().map(|_| Complex::new(T::zero(), T::zero())).collect::<Vec<_>>(), &[], None)?;
    if th0.norm() < T::lit(1e-10) * scale.norm() {
        return Err(RiemannError::ThetaNearZero(th0.norm().to_f64_lossy()));
    }
    let ratio = |sub: &[usize]| -> Result<Complex<T>, RiemannError> {
        let dirs: Vec<&[Complex<T>]> = sub.iter().map(|&i| &cols[indices[i]][..]).collect();
        Ok(params.sum(&ez, &dirs, None)? / th0)
    };
    let mut log_deriv = joint_cumulant(k, ratio)?;
    if k == 2 {
        log_deriv = log_deriv + Complex::new(T::zero(), T::TAU()) * params.b[indices[0]][indices[1]];
    }
    let factor = Complex::new(T::zero(), T::TAU()).powi(k as i32);
    Ok((log_deriv / factor).re)
}

/// Riemann constants, the shift vector and its imaginary residue.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShiftResult {
    pub delta: Vec<Complex64>,
    /// Real part of the shift reduced to `[0, 1)`.
    pub e: Vec<f64>,
    pub e_raw: Vec<Complex64>,
    pub max_imag: f64,
}

/// Riemann constants from the base-point formula and the shift
/// `e = -sum_j int_{d_0}^{d_j} omega + Delta`.
///
/// With the A-contours running counterclockwise around the holes, the base-point
/// formula reads `Delta_j = (1 + B_jj)/2 + sum_{l != j} oint_{A_l} u_j omega_l`.
pub fn compute_shift(surface: &HarmonicSurface, imag_tolerance: f64) -> Result<ShiftResult, RiemannError> {
    let g = surface.genus();
    if g == 0 {
        return Ok(ShiftResult { delta: vec![], e: vec![], e_raw: vec![], max_imag: 0.0 });
    }
    let b = surface.period_matrix()?;
    let abel = surface.abel_marked()?;
    let mut delta = Vec::with_capacity(g);
    for j in 1..=g {
        let mut d = (Complex64::new(1.0, 0.0) + b[j - 1][j - 1]) / 2.0;
        for l in (1..=g).filter(|&l| l != j) {
            d += surface.contour_moment(l, j)?;
        }
        delta.push(d);
    }
    let e_raw: Vec<Complex64> = (0..g).map(|j| delta[j] - abel.iter().map(|u| u[j]).sum::<Complex64>()).collect();
    let max_imag = e_raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag > imag_tolerance {
        return Err(RiemannError::NonRealShift(max_imag));
    }
    let e = e_raw.iter().map(|z| z.re.rem_euclid(1.0)).collect();
    Ok(ShiftResult { delta, e, e_raw, max_imag })
}

/// `|theta(int_{d_0}^{d_j} omega + e)|` for each hole, relative to the largest
/// `|theta|` over real translates of the same argument.
pub fn zero_divisor_residual(params: &ThetaParams<f64>, abel: &[Vec<Complex64>], e: &[f64]) -> Result<Vec<f64>, RiemannError> {
    let g = params.genus();
    let steps: usize = if g <= 2 { 16 } else { 8 };
    abel.iter()
        .map(|u| {
            let z: Vec<Complex64> = u.iter().zip(e).map(|(a, b)| a + b).collect();
            let val = theta_eval(params, &z, &[])?.norm();
            let mut reference: f64 = 0.0;
            for k in 0..steps.pow(g as u32) {
                let mut idx = k;
                let w: Vec<Complex64> = z
                    .iter()
                    .map(|zz| {
                        let t = (idx % steps) as f64 / steps as f64;
                        idx /= steps;
                        zz + t
                    })
                    .collect();
                reference = reference.max(theta_eval(params, &w, &[])?.norm());
            }
            Ok(val / reference)
        })
        .collect()
}

/// A point of the double: a point of the domain or its mirror image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublePoint {
    pub z: Point,
    pub mirror: bool,
}

impl DoublePoint {
    pub fn front(z: Point) -> Self {
        Self { z, mirror: false }
    }

    pub fn back(z: Point) -> Self {
        Self { z, mirror: true }
    }
}

/// Genus-1 kernel evaluations in the torus coordinate `u`.
#[derive(Clone, Debug)]
pub struct TorusKernel {
    params: ThetaParams<f64>,
    e: f64,
    theta_e: Complex64,
    odd_prime: Complex64,
}

impl TorusKernel {
    pub fn new(params: ThetaParams<f64>, e: f64) -> Result<Self, RiemannError> {
        if params.genus() != 1 {
            return Err(RiemannError::WrongGenus { expected: 1, got: params.genus() });
        }
        let theta_e = theta_eval(&params, &[Complex64::new(e, 0.0)], &[])?;
        if theta_e.norm() < 1e-12 {
            return Err(RiemannError::ThetaNearZero(theta_e.norm()));
        }
        let odd_prime = odd_theta(&params, Complex64::new(0.0, 0.0), 1)?;
        Ok(Self { params, e, theta_e, odd_prime })
    }

    pub fn params(&self) -> &ThetaParams<f64> {
        &self.params
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    /// Prime form in the torus coordinate, `theta_1(x) / theta_1'(0)` for `x = u_2 - u_1`.
    pub fn prime_form(&self, u1: Complex64, u2: Complex64) -> Result<Complex64, RiemannError> {
        Ok(odd_theta(&self.params, u2 - u1, 0)? / self.odd_prime)
    }

    /// `omega_0` density with respect to `du_1^{1/2} du_2^{1/2}`.
    pub fn omega0(&self, u1: Complex64, u2: Complex64) -> Result<Complex64, RiemannError> {
        let x = u2 - u1;
        if x.norm() < 1e-14 {
            return Err(RiemannError::CoincidentPoints);
        }
        let num = theta_eval(&self.params, &[x + self.e], &[])?;
        Ok(4.0 * num / (self.theta_e * self.prime_form(u1, u2)?))
    }

    /// `omega_0(a, b) omega_0(b, a)` as a function of `x = u_b - u_a`:
    /// `-16 theta(x + e) theta(e - x) theta_1'(0)^2 / (theta(e)^2 theta_1(x)^2)`.
    pub fn pair_kernel(&self, x: Complex64) -> Result<Complex64, RiemannError> {
        let t1 = odd_theta(&self.params, x, 0)?;
        if t1.norm() < 1e-14 {
            return Err(RiemannError::CoincidentPoints);
        }
        let a = theta_eval(&self.params, &[x + self.e], &[])?;
        let b = theta_eval(&self.params, &[self.e - x], &[])?;
        let r = self.odd_prime / (self.theta_e * t1);
        Ok(-16.0 * a * b * r * r)
    }
}

/// Genus-1 `omega_0(z_1, z_2)` in planar coordinates (the mirror chart uses the
/// conjugate coordinate), with principal square roots of the differential.
pub fn omega0_g1(kernel: &TorusKernel, surface: &HarmonicSurface, z1: DoublePoint, z2: DoublePoint) -> Result<Complex64, RiemannError> {
    if surface.genus() != 1 {
        return Err(RiemannError::WrongGenus { expected: 1, got: surface.genus() });
    }
    let chart = |p: DoublePoint| -> Result<(Complex64, Complex64), RiemannError> {
        let u = surface.abel(p.z)?[0];
        let phi = surface.differential_density(p.z)[0];
        Ok(if p.mirror { (u.conj(), phi.conj()) } else { (u, phi) })
    };
    let (u1, p1) = chart(z1)?;
    let (u2, p2) = chart(z2)?;
    if z1 == z2 {
        return Err(RiemannError::CoincidentPoints);
    }
    Ok(kernel.omega0(u1, u2)? * p1.sqrt() * p2.sqrt())
}
