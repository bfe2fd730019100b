//! Exact uniform sampling by sequential conditioning on the inverse Kasteleyn
//! matrix.
//!
//! White squares are visited in row-major order. At each step the partner of
//! the current white square is drawn from the conditional edge probabilities
//! `K(w, b) K^{-1}(b, w)`, and the inverse of the reduced matrix is obtained by
//! the rank-one update
//! `M'(b', w') = M(b', w') - M(b', w) M(b, w') / M(b, w)`.
//! Updates are accumulated lazily and applied in blocks with a matrix product.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::KasteleynError;
use crate::kasteleyn::{Domino, KasteleynSystem, Tiling};

const BLOCK: usize = 64;

/// Generator for sample `index` of a run with the given master seed.
pub fn sample_seed_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

pub fn sample_exact(system: &KasteleynSystem, seed: u64) -> Result<Tiling, KasteleynError> {
    sample_with_rng(system, &mut sample_seed_rng(seed, 0))
}

/// `count` samples; sample `k` uses stream `k` of `master`, so the output does
/// not depend on the number of worker threads.
pub fn sample_many(system: &KasteleynSystem, master: u64, count: usize) -> Result<Vec<Tiling>, KasteleynError> {
    system.inverse()?;
    (0..count as u64)
        .into_par_iter()
        .map(|k| sample_with_rng(system, &mut sample_seed_rng(master, k)))
        .collect()
}

struct LazyInverse {
    // column-major nr x nc block of the inverse, before pending corrections
    d: Vec<f64>,
    nr: usize,
    nc: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    row_pos: Vec<Option<usize>>,
    col_pos: Vec<Option<usize>>,
    // pending correction: true = d - sum_k u_k v_k^T
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    dead_rows: Vec<usize>,
    dead_cols: Vec<usize>,
}

impl LazyInverse {
    fn new(inv: MatRef<'_, f64>) -> Self {
        let n = inv.nrows();
        let mut d = Vec::with_capacity(n * n);
        for c in 0..n {
            d.extend((0..n).map(|r| inv[(r, c)]));
        }
        Self {
            d,
            nr: n,
            nc: n,
            rows: (0..n).collect(),
            cols: (0..n).collect(),
            row_pos: (0..n).map(Some).collect(),
            col_pos: (0..n).map(Some).collect(),
            u: Vec::new(),
            v: Vec::new(),
            dead_rows: Vec::new(),
            dead_cols: Vec::new(),
        }
    }

    fn entry(&self, r: usize, c: usize) -> f64 {
        let mut x = self.d[c * self.nr + r];
        for (u, v) in self.u.iter().zip(&self.v) {
            x -= u[r] * v[c];
        }
        x
    }

    fn column(&self, c: usize) -> Vec<f64> {
        let mut col = self.d[c * self.nr..(c + 1) * self.nr].to_vec();
        for (u, v) in self.u.iter().zip(&self.v) {
            let f = v[c];
            if f != 0.0 {
                col.iter_mut().zip(u).for_each(|(x, y)| *x -= f * y);
            }
        }
        col
    }

    fn row(&self, r: usize) -> Vec<f64> {
        let mut row: Vec<f64> = (0..self.nc).map(|c| self.d[c * self.nr + r]).collect();
        for (u, v) in self.u.iter().zip(&self.v) {
            let f = u[r];
            if f != 0.0 {
                row.iter_mut().zip(v).for_each(|(x, y)| *x -= f * y);
            }
        }
        row
    }

    /// Conditions on the pair (black row `r`, white column `c`).
    fn eliminate(&mut self, r: usize, c: usize) {
        let pivot = self.entry(r, c);
        let mut u = self.column(c);
        u.iter_mut().for_each(|x| *x /= pivot);
        let v = self.row(r);
        self.u.push(u);
        self.v.push(v);
        self.row_pos[self.rows[r]] = None;
        self.col_pos[self.cols[c]] = None;
        self.dead_rows.push(r);
        self.dead_cols.push(c);
        if self.u.len() == BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let k = self.u.len();
        if k == 0 {
            return;
        }
        let mut umat = Vec::with_capacity(self.nr * k);
        for u in &self.u {
            umat.extend_from_slice(u);
        }
        let mut vmat = vec![0.0; k * self.nc];
        for (kk, v) in self.v.iter().enumerate() {
            for (c, x) in v.iter().enumerate() {
                vmat[c * k + kk] = *x;
            }
        }
        self.dead_rows.sort_unstable();
        self.dead_cols.sort_unstable();
        let keep_rows: Vec<usize> = (0..self.nr).filter(|r| self.dead_rows.binary_search(r).is_err()).collect();
        let keep_cols: Vec<usize> = (0..self.nc).filter(|c| self.dead_cols.binary_search(c).is_err()).collect();
        // compact first, then update only the surviving block
        let nr2 = keep_rows.len();
        let nc2 = keep_cols.len();
        let mut d2 = Vec::with_capacity(nr2 * nc2);
        for &c in &keep_cols {
            let col = &self.d[c * self.nr..(c + 1) * self.nr];
            d2.extend(keep_rows.iter().map(|&r| col[r]));
        }
        let mut u2 = Vec::with_capacity(nr2 * k);
        for kk in 0..k {
            u2.extend(keep_rows.iter().map(|&r| umat[kk * self.nr + r]));
        }
        let mut v2 = Vec::with_capacity(k * nc2);
        for &c in &keep_cols {
            v2.extend_from_slice(&vmat[c * k..(c + 1) * k]);
        }
        if nr2 > 0 && nc2 > 0 {
            let dst = MatMut::from_column_major_slice_mut(&mut d2, nr2, nc2);
            let lhs = MatRef::from_column_major_slice(&u2, nr2, k);
            let rhs = MatRef::from_column_major_slice(&v2, k, nc2);
            matmul(dst, Accum::Add, lhs, rhs, -1.0, Par::Seq);
        }
        self.rows = keep_rows.iter().map(|&r| self.rows[r]).collect();
        self.cols = keep_cols.iter().map(|&c| self.cols[c]).collect();
        for (k, &g) in self.rows.iter().enumerate() {
            self.row_pos[g] = Some(k);
        }
        for (k, &g) in self.cols.iter().enumerate() {
            self.col_pos[g] = Some(k);
        }
        self.d = d2;
        self.nr = nr2;
        self.nc = nc2;
        self.u.clear();
        self.v.clear();
        self.dead_rows.clear();
        self.dead_cols.clear();
    }
}

pub fn sample_with_rng<R: Rng + ?Sized>(system: &KasteleynSystem, rng: &mut R) -> Result<Tiling, KasteleynError> {
    let inv = system.inverse()?;
    let mut state = LazyInverse::new(inv.as_ref());
    let whites = system.whites();
    let blacks = system.blacks();
    let mut dominoes = Vec::with_capacity(whites.len());
    let mut cands: Vec<(usize, usize, f64)> = Vec::with_capacity(4);
    for (wi, &w) in whites.iter().enumerate() {
        let c = state.col_pos[wi].expect("white squares are visited once");
        cands.clear();
        for bi in system.black_neighbors(w) {
            if let Some(r) = state.row_pos[bi] {
                let p = system.weight(w, blacks[bi]) * state.entry(r, c);
                cands.push((bi, r, p.max(0.0)));
            }
        }
        let total: f64 = cands.iter().map(|x| x.2).sum();
        if cands.is_empty() || !(total > 1e-9) {
            return Err(KasteleynError::Untileable);
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = cands.len() - 1;
        for (k, cand) in cands.iter().enumerate() {
            if target < cand.2 {
                pick = k;
                break;
            }
            target -= cand.2;
        }
        let (bi, r, _) = cands[pick];
        dominoes.push(Domino { white: w, black: blacks[bi] });
        state.eliminate(r, c);
    }
    Ok(Tiling::new(dominoes))
}
