//! Goodness of fit of the hole heights against the discrete Gaussian law.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use temperley_surface::DiscreteGaussian;

use crate::gates::Gates;
use crate::stats::{chi_square_pvalue, grouped_jackknife, mean_over};
use crate::VerifyError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistBin {
    pub n: Vec<i64>,
    pub observed: usize,
    pub expected: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentStats {
    pub variance_empirical: f64,
    pub variance_std_error: f64,
    pub variance_predicted: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GofReport {
    pub samples: usize,
    pub genus: usize,
    pub tv_distance: f64,
    pub tv_max: f64,
    /// The TV threshold is an engineering choice for a finite lattice, not a rate.
    pub tv_gate_note: String,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub p_min: f64,
    /// Distance of `Z_j/4 + E[X_j]` from the nearest integer, per component.
    pub support_offset: Vec<f64>,
    /// Monte Carlo resolution `sd(Z_j/4)/sqrt(N)` the offset is compared with.
    pub support_resolution: Vec<f64>,
    pub support_pass: bool,
    /// All `Z_j` congruent mod 4 across samples.
    pub mod4_consistent: bool,
    pub components: Vec<ComponentStats>,
    pub histogram: Vec<HistBin>,
    pub pass: bool,
}

impl GofReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hole-height law: N = {}, genus = {}", self.samples, self.genus);
        let _ = writeln!(s, "  TV distance      {:.5}  (gate < {}, {})", self.tv_distance, self.tv_max, self.tv_gate_note);
        let _ = writeln!(s, "  chi-square       {:.3} on {} dof, p = {:.4e}  (gate p >= {:e})", self.chi2, self.dof, self.p_value, self.p_min);
        for (j, (o, r)) in self.support_offset.iter().zip(&self.support_resolution).enumerate() {
            let _ = writeln!(s, "  support offset[{j}] {o:+.5}  (resolution {r:.5})");
        }
        let _ = writeln!(s, "  mod-4 consistent {}", self.mod4_consistent);
        for (j, c) in self.components.iter().enumerate() {
            let _ = writeln!(
                s,
                "  Var(Z_{j}/4)       {:.5} +- {:.5}  vs Var(X_{j}) {:.5}",
                c.variance_empirical, c.variance_std_error, c.variance_predicted
            );
        }
        let _ = writeln!(s, "  {:>12} {:>9} {:>11}", "n", "observed", "expected");
        for b in &self.histogram {
            let _ = writeln!(s, "  {:>12} {:>9} {:>11.2}", format!("{:?}", b.n), b.observed, b.expected);
        }
        let _ = writeln!(s, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

fn wrap(x: f64) -> f64 {
    x - x.round()
}

/// Compares the empirical law of `Z/4` with `X - E[X]`.
///
/// `z_samples` hold centered hole heights `Z_j = h(v_j) - E h(v_j)`. Each sample
/// is placed in the bin `round(Z/4 + E[X])`, which is exact when the heights sit
/// on the predicted lattice translate.
pub fn gof_hole_law(z_samples: &[Vec<f64>], law: &DiscreteGaussian<f64>, gates: &Gates) -> Result<GofReport, VerifyError> {
    let n = z_samples.len();
    let g = law.genus();
    if g == 0 {
        return Err(VerifyError::InvalidInput("hole-height law needs genus >= 1".into()));
    }
    if n < gates.min_gof_samples.max(2) {
        return Err(VerifyError::InsufficientSamples { needed: gates.min_gof_samples.max(2), got: n });
    }
    if z_samples.iter().any(|z| z.len() != g) {
        return Err(VerifyError::InvalidInput("hole-height vector has the wrong length".into()));
    }
    let mean = law.mean();
    let y: Vec<Vec<f64>> = z_samples.iter().map(|z| z.iter().zip(&mean).map(|(a, m)| a / 4.0 + m).collect()).collect();

    let mut mod4 = true;
    for s in &y[1..] {
        for j in 0..g {
            if wrap(s[j] - y[0][j]).abs() > 1e-6 {
                mod4 = false;
            }
        }
    }
    let support_offset: Vec<f64> = (0..g).map(|j| wrap(y[0][j])).collect();
    let cov = law.covariance();
    let mut components = Vec::with_capacity(g);
    let mut support_resolution = Vec::with_capacity(g);
    for j in 0..g {
        let q = |k: usize| z_samples[k][j] / 4.0;
        let (v, se) = grouped_jackknife(n, gates.jackknife_groups, |idx| {
            let m = mean_over(idx, q);
            mean_over(idx, |k| (q(k) - m).powi(2))
        });
        support_resolution.push(v.sqrt() / (n as f64).sqrt());
        components.push(ComponentStats { variance_empirical: v, variance_std_error: se, variance_predicted: cov[j][j] });
    }
    let support_pass = support_offset.iter().zip(&support_resolution).all(|(o, r)| o.abs() <= gates.z_max * r);

    let mut counts: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for s in &y {
        *counts.entry(s.iter().map(|v| v.round() as i64).collect()).or_default() += 1;
    }
    let nf = n as f64;
    let mut tv = 0.0;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut histogram = Vec::new();
    let mut seen = 0usize;
    for (pt, p) in law.support() {
        let o = counts.get(pt).copied().unwrap_or(0);
        seen += o;
        tv += (o as f64 / nf - p).abs();
        observed.push(o as f64);
        expected.push(p * nf);
        if o > 0 || p * nf >= 0.5 {
            histogram.push(HistBin { n: pt.to_vec(), observed: o, expected: p * nf });
        }
    }
    let outside = n - seen;
    if outside > 0 {
        tv += outside as f64 / nf;
        observed.push(outside as f64);
        expected.push(0.0);
    }
    tv /= 2.0;
    histogram.sort_by(|a, b| a.n.cmp(&b.n));
    let (chi2, dof, p_value) = chi_square_pvalue(&observed, &expected, gates.min_expected);
    let pass = tv < gates.tv_max && p_value >= gates.p_min && mod4 && support_pass;
    Ok(GofReport {
        samples: n,
        genus: g,
        tv_distance: tv,
        tv_max: gates.tv_max,
        tv_gate_note: "engineering tolerance at the configured lattice scale".into(),
        chi2,
        dof,
        p_value,
        p_min: gates.p_min,
        support_offset,
        support_resolution,
        support_pass,
        mod4_consistent: mod4,
        components,
        histogram,
        pass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalePoint {
    pub eps: f64,
    pub samples: usize,
    pub tv_distance: f64,
    /// `max_j |Var(Z_j/4) - Var(X_j)|`.
    pub variance_gap: f64,
    pub variance_gap_std_error: f64,
}

impl ScalePoint {
    pub fn from_report(eps: f64, r: &GofReport) -> Self {
        let (gap, se) = r
            .components
            .iter()
            .map(|c| ((c.variance_empirical - c.variance_predicted).abs(), c.variance_std_error))
            .fold((0.0, 0.0), |acc, x| if x.0 >= acc.0 { x } else { acc });
        Self { eps, samples: r.samples, tv_distance: r.tv_distance, variance_gap: gap, variance_gap_std_error: se }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendReport {
    /// Ordered from coarsest to finest lattice.
    pub scales: Vec<ScalePoint>,
    pub toward_prediction: bool,
}

/// The finest scale must be at least as close to the prediction as the
/// coarsest, or already within two standard errors of it.
pub fn trend_report(mut scales: Vec<ScalePoint>) -> TrendReport {
    scales.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let toward_prediction = match (scales.first(), scales.last()) {
        (Some(c), Some(f)) if scales.len() >= 2 => {
            f.variance_gap <= c.variance_gap || f.variance_gap <= 2.0 * f.variance_gap_std_error
        }
        _ => false,
    };
    TrendReport { scales, toward_prediction }
}
