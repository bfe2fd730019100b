//! Continuum predictions at a set of query points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use temperley_core::{ComponentId, Point};
use temperley_surface::{DiscreteGaussian, DiscreteGaussianParams, HarmonicSurface, SurfaceData};

use crate::VerifyError;

/// Where a query point sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "component")]
pub enum QueryKind {
    Interior,
    Boundary(ComponentId),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionBundle {
    pub queries: Vec<Point>,
    pub kinds: Vec<QueryKind>,
    /// `g_U(z_i, z_j)`; `None` on the diagonal of interior points.
    pub greens: Vec<Vec<Option<f64>>>,
    /// Regular part `H(z_i, z_i) = lim (g_U(z_i, w) + log|z_i - w| / 2 pi)`.
    pub regular: Vec<Option<f64>>,
    /// `f_k(z_i)` for `k = 1..g`.
    pub f_values: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_covariance: Vec<Vec<f64>>,
}

impl PredictionBundle {
    pub fn new(surface: &HarmonicSurface, data: &SurfaceData, queries: &[Point]) -> Result<Self, VerifyError> {
        let spec = surface.spec();
        let solver = surface.solver();
        let h = solver.grid().h();
        let g = surface.genus();
        let kinds: Vec<QueryKind> = queries
            .iter()
            .map(|&p| {
                let c = spec.nearest_component(p);
                if spec.component(c).boundary_distance(p) < 0.5 * h {
                    QueryKind::Boundary(c)
                } else {
                    QueryKind::Interior
                }
            })
            .collect();
        for (p, k) in queries.iter().zip(&kinds) {
            if *k == QueryKind::Interior && !spec.contains(*p) {
                return Err(VerifyError::InvalidInput(format!("query point {p:?} lies outside the domain")));
            }
        }
        let n = queries.len();
        let mut greens = vec![vec![None; n]; n];
        let mut regular = vec![None; n];
        for i in 0..n {
            if kinds[i] != QueryKind::Interior {
                for j in 0..n {
                    greens[i][j] = Some(0.0);
                    greens[j][i] = Some(0.0);
                }
                continue;
            }
            let gf = solver.greens_function(queries[i])?;
            regular[i] = Some(gf.regular_part().value_at(queries[i]));
            for j in 0..n {
                if j != i && kinds[j] == QueryKind::Interior {
                    greens[i][j] = Some(gf.value_at(queries[j]));
                }
            }
        }
        // symmetrize the two solves
        for i in 0..n {
            for j in i + 1..n {
                if let (Some(a), Some(b)) = (greens[i][j], greens[j][i]) {
                    greens[i][j] = Some((a + b) / 2.0);
                    greens[j][i] = Some((a + b) / 2.0);
                }
            }
        }
        let f_values = queries
            .iter()
            .zip(&kinds)
            .map(|(p, k)| match k {
                QueryKind::Boundary(c) => (1..=g).map(|j| if j == *c { 1.0 } else { 0.0 }).collect(),
                QueryKind::Interior => surface.fields().iter().map(|f| f.value_at(*p)).collect(),
            })
            .collect();
        let (x_mean, x_covariance) = if g == 0 {
            (vec![], vec![])
        } else {
            let law = DiscreteGaussian::new(DiscreteGaussianParams { tau: data.tau.clone(), e: data.e.clone() })?;
            (law.mean(), law.covariance())
        };
        Ok(Self {
            queries: queries.to_vec(),
            kinds,
            greens,
            regular,
            f_values,
            tau: data.tau.clone(),
            e: data.e.clone(),
            x_mean,
            x_covariance,
        })
    }

    pub fn genus(&self) -> usize {
        self.tau.len()
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// `16 sum_kl f_k(z_i) f_l(z_j) Cov(X_k, X_l)`.
    pub fn harmonic_covariance(&self, i: usize, j: usize) -> f64 {
        let g = self.genus();
        let mut s = 0.0;
        for k in 0..g {
            for l in 0..g {
                s += self.f_values[i][k] * self.f_values[j][l] * self.x_covariance[k][l];
            }
        }
        16.0 * s
    }

    /// Predicted covariance of the corrected field `h~` (`full = false`), or of
    /// `h - E[h]` (`full = true`). `None` for the divergent diagonal at interior points.
    pub fn predicted_covariance(&self, i: usize, j: usize, full: bool) -> Option<f64> {
        let gff = self.greens[i][j].map(|g| 16.0 / PI * g)?;
        Some(if full { gff + self.harmonic_covariance(i, j) } else { gff })
    }

    /// Fourth joint moment of `h~` at four query points from the three pairings.
    pub fn wick_fourth(&self, idx: [usize; 4]) -> Option<f64> {
        let c = |a: usize, b: usize| self.predicted_covariance(idx[a], idx[b], false);
        Some(c(0, 1)? * c(2, 3)? + c(0, 2)? * c(1, 3)? + c(0, 3)? * c(1, 2)?)
    }

    /// `(16/pi) (H(z_i, z_i) - H(z_j, z_j))`, the finite part of `Var h~(z_i) - Var h~(z_j)`.
    pub fn variance_difference(&self, i: usize, j: usize) -> Option<f64> {
        Some(16.0 / PI * (self.regular[i]? - self.regular[j]?))
    }
}
