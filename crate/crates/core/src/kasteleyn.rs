//! Kasteleyn matrices for domino tilings: counting, enumeration and edge
//! probabilities.
//!
//! The public matrix uses the complex convention `K(w, b) = 1` across a
//! vertical edge (horizontal neighbours) and `i` for vertical neighbours. All
//! floating-point work uses the real gauge `K(w, b) = 1` horizontally and
//! `(-1)^x` vertically (where `x` is the shared column), which satisfies the
//! same face condition and is therefore also a Kasteleyn matrix.
//!
//! A hole enclosing an odd number of missing squares breaks the face condition
//! on the hole face. For such holes the weights of the vertical edges crossed
//! by a horizontal cut from the hole to the far left are negated, which
//! restores the condition without touching any other face.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex;
use num_traits::{Num, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{KasteleynError, RegionError};
use crate::region::{hole_components, LatticeSquare, PolyominoRegion};

/// Regions up to this many squares are counted exactly and may be enumerated.
pub const EXACT_THRESHOLD: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Domino {
    pub white: LatticeSquare,
    pub black: LatticeSquare,
}

impl Domino {
    pub fn is_horizontal(&self) -> bool {
        self.white.j == self.black.j
    }
}

/// A perfect matching of a region into dominoes, sorted by white square.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tiling {
    dominoes: Vec<Domino>,
}

impl Tiling {
    pub fn new(mut dominoes: Vec<Domino>) -> Self {
        dominoes.sort();
        Self { dominoes }
    }

    pub fn dominoes(&self) -> &[Domino] {
        &self.dominoes
    }

    pub fn len(&self) -> usize {
        self.dominoes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dominoes.is_empty()
    }

    /// Partner of every covered square.
    pub fn partner_map(&self) -> HashMap<LatticeSquare, LatticeSquare> {
        let mut m = HashMap::with_capacity(2 * self.dominoes.len());
        for d in &self.dominoes {
            m.insert(d.white, d.black);
            m.insert(d.black, d.white);
        }
        m
    }

    /// Checks that the dominoes are adjacent white-black pairs covering `region` exactly once.
    pub fn check(&self, region: &PolyominoRegion) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for d in &self.dominoes {
            if !d.white.is_white() || d.black.is_white() || !d.white.is_adjacent(d.black) {
                return Err(format!("{d:?} is not a white-black domino"));
            }
            for s in [d.white, d.black] {
                if !region.contains(s) {
                    return Err(format!("square {s:?} is outside the region"));
                }
                if !seen.insert(s) {
                    return Err(format!("square {s:?} is covered twice"));
                }
            }
        }
        if seen.len() != region.len() {
            return Err(format!("{} of {} squares covered", seen.len(), region.len()));
        }
        Ok(())
    }
}

impl fmt::Display for Tiling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.dominoes {
            writeln!(f, "{},{}-{},{}", d.white.i, d.white.j, d.black.i, d.black.j)?;
        }
        Ok(())
    }
}

impl FromStr for Tiling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_sq = |t: &str| -> Result<LatticeSquare, String> {
            let (a, b) = t.split_once(',').ok_or_else(|| format!("bad square {t:?}"))?;
            let i = a.trim().parse().map_err(|e| format!("{t:?}: {e}"))?;
            let j = b.trim().parse().map_err(|e| format!("{t:?}: {e}"))?;
            Ok(LatticeSquare::new(i, j))
        };
        let mut dominoes = Vec::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            // the separator is the '-' that follows a digit
            let bytes = line.as_bytes();
            let cut = (1..bytes.len())
                .find(|&k| bytes[k] == b'-' && bytes[k - 1].is_ascii_digit())
                .ok_or_else(|| format!("bad domino line {line:?}"))?;
            let white = parse_sq(&line[..cut])?;
            let black = parse_sq(&line[cut + 1..])?;
            dominoes.push(Domino { white, black });
        }
        Ok(Tiling::new(dominoes))
    }
}

/// Result of [`count_tilings`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TilingCount {
    /// `log |det K|`; negative infinity when the region has no tiling.
    pub log_count: f64,
    /// Exact count, available for regions of at most [`EXACT_THRESHOLD`] squares.
    pub exact: Option<u128>,
}

#[derive(Debug)]
struct Factorization {
    inverse: Mat<f64>,
    log_abs_det: f64,
}

/// Kasteleyn matrix of a balanced region together with cached factorization data.
#[derive(Debug)]
pub struct KasteleynSystem {
    region: PolyominoRegion,
    whites: Vec<LatticeSquare>,
    blacks: Vec<LatticeSquare>,
    white_index: HashMap<LatticeSquare, usize>,
    black_index: HashMap<LatticeSquare, usize>,
    // edges (white, black) whose weight is negated by a hole cut
    flipped: HashSet<(LatticeSquare, LatticeSquare)>,
    factorization: OnceLock<Option<Factorization>>,
}

pub fn build_system(region: &PolyominoRegion) -> Result<KasteleynSystem, KasteleynError> {
    KasteleynSystem::new(region.clone())
}

/// Real-gauge weight of an adjacent white-black pair, before hole cuts.
pub fn real_weight(white: LatticeSquare, black: LatticeSquare) -> f64 {
    if white.j == black.j || white.i.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Complex weight: 1 for horizontal neighbours, `i` for vertical ones, before hole cuts.
pub fn complex_weight(white: LatticeSquare, black: LatticeSquare) -> Complex<f64> {
    if white.j == black.j {
        Complex::new(1.0, 0.0)
    } else {
        Complex::new(0.0, 1.0)
    }
}

impl KasteleynSystem {
    pub fn new(region: PolyominoRegion) -> Result<Self, KasteleynError> {
        let mut whites: Vec<_> = region.squares().iter().copied().filter(|s| s.is_white()).collect();
        let mut blacks: Vec<_> = region.squares().iter().copied().filter(|s| !s.is_white()).collect();
        if whites.len() != blacks.len() {
            return Err(RegionError::UnbalancedRegion { white: whites.len(), black: blacks.len() }.into());
        }
        whites.sort_by_key(|s| s.row_major());
        blacks.sort_by_key(|s| s.row_major());
        let white_index = whites.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let black_index = blacks.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let mut flipped = HashSet::new();
        let left = region.squares().iter().map(|s| s.i).min().unwrap_or(0);
        for hole in hole_components(region.squares()) {
            if hole.len() % 2 == 0 {
                continue;
            }
            // walk left from the lower-left corner of the lowest hole square
            let s = hole[0];
            for p in (left..=s.i).rev() {
                let (a, b) = (LatticeSquare::new(p - 1, s.j - 1), LatticeSquare::new(p - 1, s.j));
                if region.contains(a) && region.contains(b) {
                    let key = if a.is_white() { (a, b) } else { (b, a) };
                    if !flipped.insert(key) {
                        flipped.remove(&key);
                    }
                }
            }
        }
        Ok(Self { region, whites, blacks, white_index, black_index, flipped, factorization: OnceLock::new() })
    }

    /// Real-gauge weight used by this system.
    pub fn weight(&self, white: LatticeSquare, black: LatticeSquare) -> f64 {
        let w = real_weight(white, black);
        if self.flipped.contains(&(white, black)) {
            -w
        } else {
            w
        }
    }

    /// Complex weight used by this system.
    pub fn complex_weight(&self, white: LatticeSquare, black: LatticeSquare) -> Complex<f64> {
        let w = complex_weight(white, black);
        if self.flipped.contains(&(white, black)) {
            -w
        } else {
            w
        }
    }

    pub fn region(&self) -> &PolyominoRegion {
        &self.region
    }

    /// White squares in row-major order (bottom row first).
    pub fn whites(&self) -> &[LatticeSquare] {
        &self.whites
    }

    pub fn blacks(&self) -> &[LatticeSquare] {
        &self.blacks
    }

    pub fn size(&self) -> usize {
        self.whites.len()
    }

    pub fn white_index(&self, s: LatticeSquare) -> Option<usize> {
        self.white_index.get(&s).copied()
    }

    pub fn black_index(&self, s: LatticeSquare) -> Option<usize> {
        self.black_index.get(&s).copied()
    }

    /// Black neighbours of a white square inside the region, as black indices.
    pub fn black_neighbors(&self, white: LatticeSquare) -> impl Iterator<Item = usize> + '_ {
        white.neighbors().into_iter().filter_map(|n| self.black_index(n))
    }

    /// Complex Kasteleyn matrix, rows indexed by whites and columns by blacks.
    pub fn complex_matrix(&self) -> Vec<Vec<Complex<f64>>> {
        let n = self.size();
        let mut k = vec![vec![Complex::zero(); n]; n];
        for (r, &w) in self.whites.iter().enumerate() {
            for c in self.black_neighbors(w) {
                k[r][c] = self.complex_weight(w, self.blacks[c]);
            }
        }
        k
    }

    /// Real-gauge Kasteleyn matrix, rows indexed by whites and columns by blacks.
    pub fn real_matrix(&self) -> Mat<f64> {
        let n = self.size();
        let mut k = Mat::zeros(n, n);
        for (r, &w) in self.whites.iter().enumerate() {
            for c in self.black_neighbors(w) {
                k[(r, c)] = self.weight(w, self.blacks[c]);
            }
        }
        k
    }

    fn factorization(&self) -> Option<&Factorization> {
        self.factorization
            .get_or_init(|| {
                let n = self.size();
                if n == 0 {
                    return Some(Factorization { inverse: Mat::zeros(0, 0), log_abs_det: 0.0 });
                }
                let k = self.real_matrix();
                let lu = k.partial_piv_lu();
                let u = lu.U();
                let mut log_abs_det = 0.0;
                for d in 0..n {
                    let p = u[(d, d)].abs();
                    // entries of K are bounded by 1, so tiny pivots mean a singular matrix
                    if p < 1e-10 {
                        return None;
                    }
                    log_abs_det += p.ln();
                }
                let inverse = lu.inverse();
                Some(Factorization { inverse, log_abs_det })
            })
            .as_ref()
    }

    pub fn is_tileable(&self) -> bool {
        self.factorization().is_some()
    }

    /// `K^{-1}` in the real gauge, rows indexed by blacks and columns by whites.
    pub fn inverse(&self) -> Result<&Mat<f64>, KasteleynError> {
        self.factorization().map(|f| &f.inverse).ok_or(KasteleynError::Untileable)
    }

    pub fn log_abs_det(&self) -> f64 {
        self.factorization().map_or(f64::NEG_INFINITY, |f| f.log_abs_det)
    }

    fn oriented(&self, a: LatticeSquare, b: LatticeSquare) -> Result<(usize, usize), KasteleynError> {
        let (w, bl) = if a.is_white() { (a, b) } else { (b, a) };
        match (self.white_index(w), self.black_index(bl)) {
            (Some(wi), Some(bi)) if w.is_adjacent(bl) => Ok((wi, bi)),
            _ => Err(KasteleynError::InvalidEdge(a, b)),
        }
    }

    /// Probability that the domino on squares `a`, `b` appears in a uniform tiling.
    pub fn edge_probability(&self, a: LatticeSquare, b: LatticeSquare) -> Result<f64, KasteleynError> {
        edge_probabilities(self, &[(a, b)])
    }
}

fn bareiss_determinant<T: Num + Clone>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    if n == 0 {
        return T::one();
    }
    let mut sign_flip = false;
    let mut prev = T::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign_flip = !sign_flip;
                }
                None => return T::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = a[i][j].clone() * a[k][k].clone() - a[i][k].clone() * a[k][j].clone();
                a[i][j] = v / prev.clone();
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if sign_flip {
        T::zero() - det
    } else {
        det
    }
}

/// Exact `|det K|` over the Gaussian integers.
pub fn exact_count(system: &KasteleynSystem) -> u128 {
    let n = system.size();
    let mut m = vec![vec![Complex::<i128>::zero(); n]; n];
    for (r, &w) in system.whites.iter().enumerate() {
        for c in system.black_neighbors(w) {
            let b = system.blacks[c];
            let unit = if w.j == b.j { Complex::new(1, 0) } else { Complex::new(0, 1) };
            m[r][c] = if system.flipped.contains(&(w, b)) { -unit } else { unit };
        }
    }
    let det = bareiss_determinant(m);
    // det K is a unit times the number of tilings
    debug_assert!(det.re == 0 || det.im == 0);
    det.re.unsigned_abs().max(det.im.unsigned_abs())
}

pub fn count_tilings(system: &KasteleynSystem) -> TilingCount {
    let exact = (system.region.len() <= EXACT_THRESHOLD).then(|| exact_count(system));
    let log_count = match exact {
        Some(0) => f64::NEG_INFINITY,
        Some(c) => (c as f64).ln(),
        None => system.log_abs_det(),
    };
    TilingCount { log_count, exact }
}

/// All tilings of a small region, by backtracking on the lowest uncovered square.
pub fn enumerate_tilings(region: &PolyominoRegion) -> Result<Vec<Tiling>, KasteleynError> {
    if region.len() > EXACT_THRESHOLD {
        return Err(KasteleynError::RegionTooLarge { squares: region.len(), limit: EXACT_THRESHOLD });
    }
    let mut order: Vec<LatticeSquare> = region.squares().iter().copied().collect();
    order.sort_by_key(|s| s.row_major());
    let mut covered: BTreeSet<LatticeSquare> = BTreeSet::new();
    let mut current = Vec::new();
    let mut out = Vec::new();
    fn recurse(
        order: &[LatticeSquare],
        region: &PolyominoRegion,
        covered: &mut BTreeSet<LatticeSquare>,
        current: &mut Vec<Domino>,
        out: &mut Vec<Tiling>,
    ) {
        let Some(&s) = order.iter().find(|s| !covered.contains(s)) else {
            out.push(Tiling::new(current.clone()));
            return;
        };
        // squares before `s` in row-major order are covered, so its partner is right or above
        for n in [LatticeSquare::new(s.i + 1, s.j), LatticeSquare::new(s.i, s.j + 1)] {
            if region.contains(n) && !covered.contains(&n) {
                let d = if s.is_white() { Domino { white: s, black: n } } else { Domino { white: n, black: s } };
                covered.insert(s);
                covered.insert(n);
                current.push(d);
                recurse(order, region, covered, current, out);
                current.pop();
                covered.remove(&s);
                covered.remove(&n);
            }
        }
    }
    if region.len() % 2 == 0 {
        recurse(&order, region, &mut covered, &mut current, &mut out);
    }
    Ok(out)
}

/// Probability that all listed dominoes appear simultaneously:
/// `|prod K(w_i, b_i) * det[K^{-1}(b_i, w_j)]|`.
pub fn edge_probabilities(
    system: &KasteleynSystem,
    edges: &[(LatticeSquare, LatticeSquare)],
) -> Result<f64, KasteleynError> {
    let idx: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| system.oriented(a, b)).collect::<Result<_, _>>()?;
    let inv = system.inverse()?;
    let k = idx.len();
    let mut m: Vec<Vec<f64>> = vec![vec![0.0; k]; k];
    let mut scale = 1.0;
    for (r, &(wi, bi)) in idx.iter().enumerate() {
        scale *= system.weight(system.whites[wi], system.blacks[bi]);
        for (c, &(wj, _)) in idx.iter().enumerate() {
            m[r][c] = inv[(bi, wj)];
        }
    }
    Ok((scale * small_determinant(m)).abs().min(1.0))
}

/// Determinant by Gaussian elimination with partial pivoting.
pub(crate) fn small_determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs())).unwrap();
        if m[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(i: i32, j: i32) -> LatticeSquare {
        LatticeSquare::new(i, j)
    }

    #[test]
    fn horizontal_pair() {
        let r = PolyominoRegion::from_squares([sq(0, 0), sq(1, 0)], 1.0);
        let s = build_system(&r).unwrap();
        assert_eq!(s.complex_matrix(), vec![vec![Complex::new(1.0, 0.0)]]);
        assert_eq!(count_tilings(&s).exact, Some(1));
        assert_eq!(enumerate_tilings(&r).unwrap().len(), 1);
        assert!((s.edge_probability(sq(0, 0), sq(1, 0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two() {
        let r = PolyominoRegion::rectangle(0, 0, 1, 1);
        let s = build_system(&r).unwrap();
        assert_eq!(count_tilings(&s).exact, Some(2));
        assert!((count_tilings(&s).log_count - 2f64.ln()).abs() < 1e-12);
        assert!((s.log_abs_det() - 2f64.ln()).abs() < 1e-12);
        let ts = enumerate_tilings(&r).unwrap();
        assert_eq!(ts.len(), 2);
        for (a, b) in [(sq(0, 0), sq(1, 0)), (sq(0, 0), sq(0, 1)), (sq(1, 1), sq(0, 1))] {
            assert!((s.edge_probability(a, b).unwrap() - 0.5).abs() < 1e-12);
        }
        let total: f64 = [sq(1, 0), sq(0, 1)].iter().map(|&b| s.edge_probability(sq(0, 0), b).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(s.edge_probability(sq(0, 0), sq(1, 1)), Err(KasteleynError::InvalidEdge(..))));
    }

    #[test]
    fn strips_give_fibonacci() {
        let expect = [1u128, 2, 3, 5, 8, 13, 21, 34];
        for (n, &c) in expect.iter().enumerate() {
            let r = PolyominoRegion::rectangle(0, 0, n as i32, 1);
            let s = build_system(&r).unwrap();
            assert_eq!(count_tilings(&s).exact, Some(c), "2x{}", n + 1);
            assert_eq!(enumerate_tilings(&r).unwrap().len() as u128, c);
        }
    }

    #[test]
    fn untileable() {
        let l = PolyominoRegion::from_squares([sq(0, 0), sq(1, 0), sq(0, 1)], 1.0);
        assert!(enumerate_tilings(&l).unwrap().is_empty());
        assert!(matches!(build_system(&l), Err(KasteleynError::Region(RegionError::UnbalancedRegion { .. }))));
        // balanced but not adjacent
        let r = PolyominoRegion::from_squares([sq(0, 0), sq(1, 2)], 1.0);
        let s = build_system(&r).unwrap();
        assert_eq!(count_tilings(&s).exact, Some(0));
        assert!(!s.is_tileable());
        assert!(matches!(s.inverse(), Err(KasteleynError::Untileable)));
    }

    #[test]
    fn pair_probabilities_match_enumeration() {
        let r = PolyominoRegion::rectangle(0, 0, 3, 3);
        let s = build_system(&r).unwrap();
        let ts = enumerate_tilings(&r).unwrap();
        assert_eq!(ts.len(), 36);
        let e1 = (sq(0, 0), sq(1, 0));
        let e2 = (sq(2, 2), sq(2, 3));
        let has = |t: &Tiling, (a, b): (LatticeSquare, LatticeSquare)| {
            t.dominoes().iter().any(|d| (d.white == a && d.black == b) || (d.white == b && d.black == a))
        };
        let both = ts.iter().filter(|t| has(t, e1) && has(t, e2)).count() as f64 / 36.0;
        let p = edge_probabilities(&s, &[e1, e2]).unwrap();
        assert!((p - both).abs() < 1e-12);
    }

    #[test]
    fn text_roundtrip() {
        let r = PolyominoRegion::from_squares((-1..=0).flat_map(|i| (-2..=-1).map(move |j| sq(i, j))), 1.0);
        for t in enumerate_tilings(&r).unwrap() {
            let text = t.to_string();
            assert_eq!(text.parse::<Tiling>().unwrap(), t);
            assert!(t.check(&r).is_ok());
        }
        assert_eq!("0,0-1,0\n".parse::<Tiling>().unwrap().dominoes()[0].black, sq(1, 0));
    }
}
