//! Genus-1 covariance as a double contour integral of the `omega_0` kernel.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use temperley_core::Point;
use temperley_surface::{HarmonicSurface, TorusKernel};

use crate::VerifyError;

const NODES_PER_PANEL: usize = 16;
const MIN_PANELS: usize = 24;
const MAX_PANELS: usize = 160;
/// Horizontal separation in `u` below which the two paths count as meeting.
const MIN_GAP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContourCovariance {
    pub value: f64,
    /// Imaginary part left by the quadrature; zero for exact arithmetic.
    pub imag_residue: f64,
    pub panels: usize,
}

/// `-(2 pi i)^{-2} int_{z1*}^{z1} int_{z2*}^{z2} omega_0(a, b) omega_0(b, a)`.
///
/// In the torus coordinate `u` the mirror image of `z` sits at `conj(u(z))`, so
/// each path is the vertical segment `Re u = const` from `conj u` to `u`. It
/// crosses the outer boundary once and the two paths are disjoint unless the
/// real parts agree mod 1.
pub fn contour_covariance_k2(
    surface: &HarmonicSurface,
    kernel: &TorusKernel,
    z1: Point,
    z2: Point,
) -> Result<ContourCovariance, VerifyError> {
    if surface.genus() != 1 {
        return Err(VerifyError::InvalidInput(format!("contour covariance needs genus 1, got {}", surface.genus())));
    }
    for z in [z1, z2] {
        if !surface.spec().contains(z) {
            return Err(VerifyError::InvalidInput(format!("{z:?} is not an interior point")));
        }
    }
    let u1 = surface.abel(z1)?[0];
    let u2 = surface.abel(z2)?[0];
    let gap = {
        let d = (u2.re - u1.re).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    if gap < MIN_GAP {
        return Err(VerifyError::PathsIntersect);
    }
    // the kernel peaks on the scale of the horizontal gap; resolve it
    let span = u1.im.abs().max(u2.im.abs());
    let panels = ((8.0 * span / gap).ceil() as usize).clamp(MIN_PANELS, MAX_PANELS);
    let rule = GaussLegendre::new(NonZeroUsize::new(NODES_PER_PANEL).expect("nonzero"));
    let nodes = |b: f64| -> Vec<(f64, f64)> {
        // s in [-b, b], oriented from conj(u) to u
        let width = 2.0 * b / panels as f64;
        let mut out = Vec::with_capacity(panels * NODES_PER_PANEL);
        for p in 0..panels {
            let lo = -b + p as f64 * width;
            for &(x, w) in rule.as_node_weight_pairs() {
                out.push((lo + (x + 1.0) * width / 2.0, w * width / 2.0));
            }
        }
        out
    };
    let (n1, n2) = (nodes(u1.im), nodes(u2.im));
    let mut acc = Complex64::new(0.0, 0.0);
    for &(s, ws) in &n1 {
        let a = Complex64::new(u1.re, s);
        let mut row = Complex64::new(0.0, 0.0);
        for &(t, wt) in &n2 {
            let b = Complex64::new(u2.re, t);
            row += wt * kernel.pair_kernel(b - a)?;
        }
        acc += ws * row;
    }
    // du1 du2 = -ds dt, and -(2 pi i)^{-2} = 1 / (4 pi^2)
    let v = -acc / (4.0 * PI * PI);
    Ok(ContourCovariance { value: v.re, imag_residue: v.im, panels })
}
