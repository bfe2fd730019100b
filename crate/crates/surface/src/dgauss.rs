//! Discrete Gaussian law on `Z^g`: `P(X = n) ∝ exp(-pi (n - e).tau (n - e))`.

use num_traits::{FromPrimitive, Num};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use temperley_core::Real;

use crate::linalg::{real_inverse, symmetric_eigenvalues, RMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DGaussError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("truncation window needs about {0:.0} lattice points")]
    TruncationInsufficient(f64),
}

const DEFAULT_TOLERANCE: f64 = 1e-14;
const MAX_POINTS: f64 = 2e6;

/// Set partitions of `{0, .., k-1}`, as lists of blocks.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, k: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, k, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, k, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// Joint cumulant of `k` variables from their joint moments by Möbius inversion:
/// `kappa = sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_{B in pi} m(B)`.
///
/// `moment` receives a block as a sorted list of positions in `0..k`.
pub fn joint_cumulant<S, E>(k: usize, mut moment: impl FnMut(&[usize]) -> Result<S, E>) -> Result<S, E>
where
    S: Copy + Num + FromPrimitive,
{
    let mut cache: std::collections::HashMap<Vec<usize>, S> = std::collections::HashMap::new();
    let mut total = S::zero();
    for part in set_partitions(k) {
        let m = part.len();
        let mut coef: i64 = if m % 2 == 1 { 1 } else { -1 };
        for f in 1..m as i64 {
            coef *= f;
        }
        let mut prod = S::from_i64(coef).expect("small integer");
        for block in &part {
            let v = match cache.get(block) {
                Some(v) => *v,
                None => {
                    let v = moment(block)?;
                    cache.insert(block.clone(), v);
                    v
                }
            };
            prod = prod * v;
        }
        total = total + prod;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGaussianParams<T> {
    pub tau: RMat<T>,
    pub e: Vec<T>,
}

/// The law restricted to a truncation window that holds all but a negligible mass.
#[derive(Clone, Debug)]
pub struct DiscreteGaussian<T: Real> {
    params: DiscreteGaussianParams<T>,
    // support ordered by decreasing probability
    points: Vec<Vec<i64>>,
    probs: Vec<T>,
    normalization: T,
    tolerance: T,
}

impl<T: Real> DiscreteGaussian<T> {
    pub fn new(params: DiscreteGaussianParams<T>) -> Result<Self, DGaussError> {
        Self::with_tolerance(params, T::lit(DEFAULT_TOLERANCE))
    }

    pub fn with_tolerance(params: DiscreteGaussianParams<T>, tolerance: T) -> Result<Self, DGaussError> {
        let g = params.tau.len();
        if g == 0 || params.e.len() != g || params.tau.iter().any(|r| r.len() != g) {
            return Err(DGaussError::InvalidParams("tau must be g x g and e of length g".into()));
        }
        let lam = symmetric_eigenvalues(&params.tau)[0];
        if !(lam > T::zero()) {
            return Err(DGaussError::InvalidParams(format!("tau has eigenvalue {lam}")));
        }
        let inv = real_inverse(&params.tau).ok_or_else(|| DGaussError::InvalidParams("tau singular".into()))?;
        // window pi (n-e).tau.(n-e) <= pi R^2, with room for fourth-moment weights
        let gf = T::lit(g as f64);
        let two = T::lit(2.0);
        let mut r2 = T::one();
        for _ in 0..4 {
            let rn = (r2 / lam).sqrt();
            r2 = (-tolerance.ln() + T::lit(4.0) * (rn + two).ln() + gf * (rn + two).ln() + two) / T::PI();
        }
        let half: Vec<T> = (0..g).map(|k| (r2 * inv[k][k]).sqrt()).collect();
        let count: f64 = half.iter().map(|h| 2.0 * h.to_f64_lossy() + 1.0).product();
        if count > MAX_POINTS {
            return Err(DGaussError::TruncationInsufficient(count));
        }
        let lo: Vec<i64> = (0..g).map(|k| (params.e[k] - half[k]).floor().to_f64_lossy() as i64).collect();
        let hi: Vec<i64> = (0..g).map(|k| (params.e[k] + half[k]).ceil().to_f64_lossy() as i64).collect();
        let mut pts = Vec::new();
        let mut n = lo.clone();
        'outer: loop {
            let q = quad(&params, &n);
            if q <= r2 {
                pts.push((n.clone(), (-T::PI() * q).exp()));
            }
            for k in 0..g {
                n[k] += 1;
                if n[k] <= hi[k] {
                    continue 'outer;
                }
                n[k] = lo[k];
            }
            break;
        }
        pts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        let normalization: T = pts.iter().map(|p| p.1).sum();
        let (points, weights): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
        let probs = weights.into_iter().map(|w| w / normalization).collect();
        Ok(Self { params, points, probs, normalization, tolerance })
    }

    pub fn params(&self) -> &DiscreteGaussianParams<T> {
        &self.params
    }

    pub fn genus(&self) -> usize {
        self.params.e.len()
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    /// `C = sum_n exp(-pi (n - e).tau (n - e))`.
    pub fn normalization(&self) -> T {
        self.normalization
    }

    pub fn pmf(&self, n: &[i64]) -> T {
        (-T::PI() * quad(&self.params, n)).exp() / self.normalization
    }

    /// Support points in decreasing order of probability, with their probabilities.
    pub fn support(&self) -> impl Iterator<Item = (&[i64], T)> + '_ {
        self.points.iter().map(|p| p.as_slice()).zip(self.probs.iter().copied())
    }

    fn expect(&self, f: impl Fn(&[i64]) -> T) -> T {
        // smallest terms first
        self.points.iter().zip(&self.probs).rev().map(|(n, p)| *p * f(n)).sum()
    }

    pub fn mean(&self) -> Vec<T> {
        (0..self.genus()).map(|k| self.expect(|n| T::lit(n[k] as f64))).collect()
    }

    /// Raw moment `E[prod_k X_{indices[k]}]`.
    pub fn moment(&self, indices: &[usize]) -> T {
        self.expect(|n| indices.iter().map(|&i| T::lit(n[i] as f64)).fold(T::one(), |a, b| a * b))
    }

    /// Joint moment of the centered variables `X - E[X]`.
    pub fn central_moment(&self, indices: &[usize]) -> T {
        let mu = self.mean();
        self.expect(|n| indices.iter().map(|&i| T::lit(n[i] as f64) - mu[i]).fold(T::one(), |a, b| a * b))
    }

    /// Joint cumulant `kappa(X_{i_1}, .., X_{i_k})`; repeated indices give pure cumulants.
    pub fn cumulant(&self, indices: &[usize]) -> T {
        if indices.len() == 1 {
            return self.mean()[indices[0]];
        }
        joint_cumulant(indices.len(), |block| {
            let sub: Vec<usize> = block.iter().map(|&p| indices[p]).collect();
            Ok::<T, ()>(self.central_moment(&sub))
        })
        .expect("moments are infallible")
    }

    pub fn covariance(&self) -> RMat<T> {
        let g = self.genus();
        (0..g).map(|i| (0..g).map(|j| self.central_moment(&[i, j])).collect()).collect()
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let mut u = T::lit(rng.random::<f64>());
        for (n, p) in self.points.iter().zip(&self.probs) {
            if u < *p {
                return n.clone();
            }
            u -= *p;
        }
        self.points[0].clone()
    }

    /// `count` draws from one ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<Vec<i64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample_with(&mut rng)).collect()
    }
}

fn quad<T: Real>(p: &DiscreteGaussianParams<T>, n: &[i64]) -> T {
    let d: Vec<T> = n.iter().zip(&p.e).map(|(a, e)| T::lit(*a as f64) - *e).collect();
    let g = d.len();
    (0..g).map(|i| (0..g).map(|j| d[i] * p.tau[i][j] * d[j]).sum::<T>()).sum()
}

pub fn sample_dgauss<T: Real>(params: DiscreteGaussianParams<T>, seed: u64) -> Result<Vec<i64>, DGaussError> {
    Ok(DiscreteGaussian::new(params)?.sample(seed, 1).remove(0))
}
