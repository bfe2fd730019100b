//! Small dense matrices (genus-sized) over real and complex scalars.

use num_complex::Complex;
use temperley_core::Real;

pub type RMat<T> = Vec<Vec<T>>;
pub type CMat<T> = Vec<Vec<Complex<T>>>;

pub fn identity<T: Real>(n: usize) -> RMat<T> {
    (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting; `None` if singular.
pub fn complex_inverse<T: Real>(m: &CMat<T>) -> Option<CMat<T>> {
    let n = m.len();
    let mut a: CMat<T> = m.clone();
    let mut inv: CMat<T> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) }).collect())
        .collect();
    let scale = m.iter().flatten().map(|z| z.norm()).fold(T::zero(), |a, b| a.max(b));
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x][k].norm().partial_cmp(&a[y][k].norm()).unwrap())?;
        if a[p][k].norm() <= scale * T::lit(1e-14) {
            return None;
        }
        a.swap(k, p);
        inv.swap(k, p);
        let piv = a[k][k];
        for j in 0..n {
            a[k][j] = a[k][j] / piv;
            inv[k][j] = inv[k][j] / piv;
        }
        for i in 0..n {
            if i != k {
                let f = a[i][k];
                for j in 0..n {
                    let akj = a[k][j];
                    let ikj = inv[k][j];
                    a[i][j] = a[i][j] - f * akj;
                    inv[i][j] = inv[i][j] - f * ikj;
                }
            }
        }
    }
    Some(inv)
}

pub fn real_inverse<T: Real>(m: &RMat<T>) -> Option<RMat<T>> {
    let c: CMat<T> = m.iter().map(|r| r.iter().map(|x| Complex::new(*x, T::zero())).collect()).collect();
    complex_inverse(&c).map(|c| c.into_iter().map(|r| r.into_iter().map(|z| z.re).collect()).collect())
}

pub fn transpose<S: Clone>(m: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = m.len();
    let k = if n == 0 { 0 } else { m[0].len() };
    (0..k).map(|j| (0..n).map(|i| m[i][j].clone()).collect()).collect()
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(m: &RMat<T>) -> Vec<T> {
    let n = m.len();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: T = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: T = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= diag * T::epsilon() * T::epsilon() || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn is_symmetric<T: Real>(m: &RMat<T>, tol: T) -> bool {
    let n = m.len();
    (0..n).all(|i| (0..n).all(|j| (m[i][j] - m[j][i]).abs() <= tol))
}

pub fn frobenius<T: Real>(m: &RMat<T>) -> T {
    m.iter().flatten().map(|x| *x * *x).sum::<T>().sqrt()
}
