//! Lattice squares, Temperleyan polyominoes and their diagnostics.
//!
//! Square `(i, j)` is centered at `(i, j)` in lattice units, so its corners are
//! half-integer points. Vertex `(p, q)` denotes the lower-left corner of square
//! `(p, q)`, i.e. the point `(p - 1/2, q - 1/2)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, Point, Rasterization, Shape};
use crate::error::RegionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeSquare {
    pub i: i32,
    pub j: i32,
}

impl LatticeSquare {
    pub const fn new(i: i32, j: i32) -> Self {
        Self { i, j }
    }

    pub fn color(self) -> SquareColor {
        color_of(self)
    }

    pub fn is_white(self) -> bool {
        (self.i + self.j).rem_euclid(2) == 0
    }

    pub fn neighbors(self) -> [LatticeSquare; 4] {
        let Self { i, j } = self;
        [Self::new(i + 1, j), Self::new(i - 1, j), Self::new(i, j + 1), Self::new(i, j - 1)]
    }

    pub fn is_adjacent(self, other: LatticeSquare) -> bool {
        (self.i - other.i).abs() + (self.j - other.j).abs() == 1
    }

    /// Sort key for row-major order (bottom row first).
    pub fn row_major(self) -> (i32, i32) {
        (self.j, self.i)
    }

    pub fn corners(self) -> [LatticeVertex; 4] {
        let Self { i, j } = self;
        [
            LatticeVertex::new(i, j),
            LatticeVertex::new(i + 1, j),
            LatticeVertex::new(i + 1, j + 1),
            LatticeVertex::new(i, j + 1),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVertex {
    pub p: i32,
    pub q: i32,
}

impl LatticeVertex {
    pub const fn new(p: i32, q: i32) -> Self {
        Self { p, q }
    }

    /// The four squares sharing this vertex: lower-left, lower-right, upper-left, upper-right.
    pub fn squares(self) -> [LatticeSquare; 4] {
        let Self { p, q } = self;
        [
            LatticeSquare::new(p - 1, q - 1),
            LatticeSquare::new(p, q - 1),
            LatticeSquare::new(p - 1, q),
            LatticeSquare::new(p, q),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SquareColor {
    W0,
    W1,
    B0,
    B1,
}

impl SquareColor {
    pub fn is_white(self) -> bool {
        matches!(self, SquareColor::W0 | SquareColor::W1)
    }

    fn glyph(self) -> char {
        match self {
            SquareColor::W0 => 'w',
            SquareColor::W1 => 'W',
            SquareColor::B0 => 'b',
            SquareColor::B1 => 'B',
        }
    }
}

pub fn color_of(square: LatticeSquare) -> SquareColor {
    match (square.i.rem_euclid(2), square.j.rem_euclid(2)) {
        (0, 0) => SquareColor::W0,
        (1, 1) => SquareColor::W1,
        (1, 0) => SquareColor::B0,
        _ => SquareColor::B1,
    }
}

/// A finite set of lattice squares together with its Temperleyan markings.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyominoRegion {
    squares: BTreeSet<LatticeSquare>,
    eps: f64,
    boundary_loops: Vec<Vec<LatticeVertex>>,
    removed_square: Option<LatticeSquare>,
    added_squares: Vec<LatticeSquare>,
    genus: usize,
    marked_points: Vec<Point>,
}

impl PolyominoRegion {
    /// A bare region with no marked squares (used for linear-algebra and oracle tests).
    pub fn from_squares(squares: impl IntoIterator<Item = LatticeSquare>, eps: f64) -> Self {
        let squares: BTreeSet<_> = squares.into_iter().collect();
        let (loops, _) = trace_loops(&squares);
        let genus = loops.len().saturating_sub(1);
        Self {
            squares,
            eps,
            boundary_loops: loops,
            removed_square: None,
            added_squares: Vec::new(),
            genus,
            marked_points: Vec::new(),
        }
    }

    /// Same as [`from_squares`](Self::from_squares) with explicit markings.
    pub fn with_marks(
        squares: impl IntoIterator<Item = LatticeSquare>,
        eps: f64,
        removed: Option<LatticeSquare>,
        added: Vec<LatticeSquare>,
    ) -> Self {
        let mut r = Self::from_squares(squares, eps);
        r.removed_square = removed;
        r.added_squares = added;
        r
    }

    /// Axis-aligned rectangle of squares `[i0, i1] x [j0, j1]`, inclusive.
    pub fn rectangle(i0: i32, j0: i32, i1: i32, j1: i32) -> Self {
        Self::from_squares((j0..=j1).flat_map(|j| (i0..=i1).map(move |i| LatticeSquare::new(i, j))), 1.0)
    }

    pub fn squares(&self) -> &BTreeSet<LatticeSquare> {
        &self.squares
    }

    pub fn contains(&self, sq: LatticeSquare) -> bool {
        self.squares.contains(&sq)
    }

    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn boundary_loops(&self) -> &[Vec<LatticeVertex>] {
        &self.boundary_loops
    }

    pub fn removed_square(&self) -> Option<LatticeSquare> {
        self.removed_square
    }

    pub fn added_squares(&self) -> &[LatticeSquare] {
        &self.added_squares
    }

    pub fn marked_points(&self) -> &[Point] {
        &self.marked_points
    }

    pub fn white_count(&self) -> usize {
        self.squares.iter().filter(|s| s.is_white()).count()
    }

    pub fn black_count(&self) -> usize {
        self.squares.len() - self.white_count()
    }

    pub fn square_center(&self, sq: LatticeSquare) -> Point {
        [sq.i as f64 * self.eps, sq.j as f64 * self.eps]
    }

    pub fn vertex_position(&self, v: LatticeVertex) -> Point {
        [(v.p as f64 - 0.5) * self.eps, (v.q as f64 - 0.5) * self.eps]
    }

    /// All corners of region squares, sorted.
    pub fn vertices(&self) -> BTreeSet<LatticeVertex> {
        self.squares.iter().flat_map(|s| s.corners()).collect()
    }

    /// The region before the removal and additions that make it Temperleyan.
    pub fn even_polyomino(&self) -> BTreeSet<LatticeSquare> {
        let mut s = self.squares.clone();
        if let Some(r) = self.removed_square {
            s.insert(r);
        }
        for a in &self.added_squares {
            s.remove(a);
        }
        s
    }

    /// Lattice vertex of the region nearest to a continuum point.
    pub fn nearest_vertex(&self, point: Point) -> Option<LatticeVertex> {
        self.vertices().into_iter().min_by(|a, b| {
            let da = sqdist(self.vertex_position(*a), point);
            let db = sqdist(self.vertex_position(*b), point);
            da.total_cmp(&db).then(a.cmp(b))
        })
    }

    /// Region square whose center is closest to `point`.
    pub fn query_square(&self, point: Point) -> Option<LatticeSquare> {
        nearest_square(self.squares.iter().copied(), point, self.eps)
    }

    /// Reference vertex where every height function vanishes: the
    /// lexicographically smallest vertex of the outer boundary loop.
    pub fn reference_vertex(&self) -> Option<LatticeVertex> {
        self.boundary_loops.first().and_then(|l| l.iter().min().copied())
    }

    /// Vertex on hole `j` (1-based) used to read off the hole height.
    pub fn hole_vertex(&self, j: usize) -> Option<LatticeVertex> {
        let lp = self.boundary_loops.get(j)?;
        match self.marked_points.get(j) {
            Some(d) => lp.iter().copied().min_by(|a, b| {
                sqdist(self.vertex_position(*a), *d)
                    .total_cmp(&sqdist(self.vertex_position(*b), *d))
                    .then(a.cmp(b))
            }),
            None => lp.iter().min().copied(),
        }
    }

    /// One character per square over the bounding box, top row first.
    pub fn to_text_grid(&self) -> String {
        let mut all: BTreeSet<LatticeSquare> = self.squares.clone();
        all.extend(self.removed_square);
        all.extend(self.added_squares.iter().copied());
        let Some(bb) = BoundingBox::of(all.iter().copied()) else {
            return String::new();
        };
        let mut out = format!("# i0={} j0={} eps={}\n", bb.i0, bb.j0, self.eps);
        for j in (bb.j0..=bb.j1).rev() {
            for i in bb.i0..=bb.i1 {
                let sq = LatticeSquare::new(i, j);
                let c = if Some(sq) == self.removed_square {
                    'R'
                } else if self.added_squares.contains(&sq) {
                    'A'
                } else if self.squares.contains(&sq) {
                    sq.color().glyph()
                } else {
                    '.'
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }
}

fn sqdist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[derive(Clone, Copy, Debug)]
struct BoundingBox {
    i0: i32,
    j0: i32,
    i1: i32,
    j1: i32,
}

impl BoundingBox {
    fn of(it: impl Iterator<Item = LatticeSquare>) -> Option<Self> {
        let mut bb: Option<Self> = None;
        for s in it {
            bb = Some(match bb {
                None => Self { i0: s.i, j0: s.j, i1: s.i, j1: s.j },
                Some(b) => Self { i0: b.i0.min(s.i), j0: b.j0.min(s.j), i1: b.i1.max(s.i), j1: b.j1.max(s.j) },
            });
        }
        bb
    }

    fn grow(self, m: i32) -> Self {
        Self { i0: self.i0 - m, j0: self.j0 - m, i1: self.i1 + m, j1: self.j1 + m }
    }

    fn contains(&self, s: LatticeSquare) -> bool {
        s.i >= self.i0 && s.i <= self.i1 && s.j >= self.j0 && s.j <= self.j1
    }
}

/// Connected components (4-adjacency) of the complement of `squares` within a
/// box one square larger than their bounding box. Component 0 is the exterior.
fn complement_components(squares: &BTreeSet<LatticeSquare>) -> (BTreeMap<LatticeSquare, usize>, usize) {
    let mut label = BTreeMap::new();
    let Some(bb) = BoundingBox::of(squares.iter().copied()) else {
        return (label, 0);
    };
    let bb = bb.grow(1);
    let mut count = 0;
    let mut seeds = vec![LatticeSquare::new(bb.i0, bb.j0)];
    seeds.extend((bb.j0..=bb.j1).flat_map(|j| (bb.i0..=bb.i1).map(move |i| LatticeSquare::new(i, j))));
    for seed in seeds {
        if squares.contains(&seed) || label.contains_key(&seed) {
            continue;
        }
        let mut queue = VecDeque::from([seed]);
        label.insert(seed, count);
        while let Some(s) = queue.pop_front() {
            for n in s.neighbors() {
                if bb.contains(n) && !squares.contains(&n) && !label.contains_key(&n) {
                    label.insert(n, count);
                    queue.push_back(n);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Bounded components of the complement of `squares`, each sorted row-major.
pub(crate) fn hole_components(squares: &BTreeSet<LatticeSquare>) -> Vec<Vec<LatticeSquare>> {
    let (labels, n) = complement_components(squares);
    let mut holes = vec![Vec::new(); n.saturating_sub(1)];
    for (s, c) in labels {
        if c > 0 {
            holes[c - 1].push(s);
        }
    }
    for h in &mut holes {
        h.sort_by_key(|s| s.row_major());
    }
    holes
}

/// Directed boundary edges with the region on the left, chained into loops.
/// The outer loop (counterclockwise) comes first; hole loops follow in order of
/// their smallest vertex. Also returns vertices where the boundary pinches.
fn trace_loops(squares: &BTreeSet<LatticeSquare>) -> (Vec<Vec<LatticeVertex>>, Vec<LatticeVertex>) {
    let mut outgoing: BTreeMap<LatticeVertex, Vec<LatticeVertex>> = BTreeMap::new();
    for &s in squares {
        let [ll, lr, ur, ul] = s.corners();
        let LatticeSquare { i, j } = s;
        if !squares.contains(&LatticeSquare::new(i, j - 1)) {
            outgoing.entry(ll).or_default().push(lr);
        }
        if !squares.contains(&LatticeSquare::new(i + 1, j)) {
            outgoing.entry(lr).or_default().push(ur);
        }
        if !squares.contains(&LatticeSquare::new(i, j + 1)) {
            outgoing.entry(ur).or_default().push(ul);
        }
        if !squares.contains(&LatticeSquare::new(i - 1, j)) {
            outgoing.entry(ul).or_default().push(ll);
        }
    }
    let pinches: Vec<LatticeVertex> = outgoing.iter().filter(|(_, v)| v.len() > 1).map(|(k, _)| *k).collect();
    let mut loops = Vec::new();
    while let Some((&start, _)) = outgoing.iter().find(|(_, v)| !v.is_empty()) {
        let mut lp = Vec::new();
        let mut v = start;
        loop {
            lp.push(v);
            let next = match outgoing.get_mut(&v) {
                Some(outs) if !outs.is_empty() => outs.remove(0),
                _ => break,
            };
            v = next;
            if v == start {
                break;
            }
        }
        loops.push(lp);
    }
    let area = |lp: &Vec<LatticeVertex>| -> i64 {
        let n = lp.len();
        (0..n)
            .map(|k| {
                let a = lp[k];
                let b = lp[(k + 1) % n];
                a.p as i64 * b.q as i64 - b.p as i64 * a.q as i64
            })
            .sum()
    };
    // outer loops have positive area; keep the largest first
    loops.sort_by_key(|lp| (area(lp) <= 0, -area(lp).abs(), *lp.iter().min().unwrap()));
    (loops, pinches)
}

fn loop_area_sign(lp: &[LatticeVertex]) -> i64 {
    let n = lp.len();
    (0..n)
        .map(|k| {
            let a = lp[k];
            let b = lp[(k + 1) % n];
            a.p as i64 * b.q as i64 - b.p as i64 * a.q as i64
        })
        .sum::<i64>()
        .signum()
}

/// Corner squares of a polyomino that are not of class B1.
pub fn corner_violations(squares: &BTreeSet<LatticeSquare>) -> Vec<LatticeSquare> {
    let vertices: BTreeSet<LatticeVertex> = squares.iter().flat_map(|s| s.corners()).collect();
    let mut bad = BTreeSet::new();
    for v in vertices {
        let around = v.squares();
        let inside: Vec<bool> = around.iter().map(|s| squares.contains(s)).collect();
        let n_in = inside.iter().filter(|b| **b).count();
        // diagonal partner in the [ll, lr, ul, ur] ordering
        let opposite = [3usize, 2, 1, 0];
        let corner = match n_in {
            1 => inside.iter().position(|b| *b),
            3 => inside.iter().position(|b| !*b).map(|k| opposite[k]),
            _ => None,
        };
        if let Some(k) = corner {
            if around[k].color() != SquareColor::B1 {
                bad.insert(around[k]);
            }
        }
    }
    bad.into_iter().collect()
}

fn rasterize_component(shape: &Shape, mode: Rasterization, eps: f64, hole: bool) -> BTreeSet<LatticeSquare> {
    let (lo, hi) = shape.bbox();
    let i0 = (lo[0] / eps).floor() as i32 - 4;
    let i1 = (hi[0] / eps).ceil() as i32 + 4;
    let j0 = (lo[1] / eps).floor() as i32 - 4;
    let j1 = (hi[1] / eps).ceil() as i32 + 4;
    let mut out = BTreeSet::new();
    if mode == Rasterization::Exact && !shape.is_circle() {
        for j in j0..=j1 {
            for i in i0..=i1 {
                if shape.contains([i as f64 * eps, j as f64 * eps]) {
                    out.insert(LatticeSquare::new(i, j));
                }
            }
        }
        return out;
    }
    // region blocks are anchored at (even, odd), hole blocks at (odd, even)
    let (oi, oj) = if hole { (1, 0) } else { (0, 1) };
    for b in (j0.div_euclid(2) - 1)..=(j1.div_euclid(2) + 1) {
        for a in (i0.div_euclid(2) - 1)..=(i1.div_euclid(2) + 1) {
            let ai = 2 * a + oi;
            let bj = 2 * b + oj;
            let center = [(ai + 1) as f64 * eps, (bj + 1) as f64 * eps];
            if shape.contains(center) {
                for dj in 0..3 {
                    for di in 0..3 {
                        out.insert(LatticeSquare::new(ai + di, bj + dj));
                    }
                }
            }
        }
    }
    out
}

fn nearest_square(cands: impl Iterator<Item = LatticeSquare>, target: Point, eps: f64) -> Option<LatticeSquare> {
    cands.min_by(|a, b| {
        let da = sqdist([a.i as f64 * eps, a.j as f64 * eps], target);
        let db = sqdist([b.i as f64 * eps, b.j as f64 * eps], target);
        da.total_cmp(&db).then(a.cmp(b))
    })
}

/// Rasterizes `spec` on the lattice of spacing `eps` and applies the Temperleyan markings.
pub fn build_temperleyan(spec: &DomainSpec, eps: f64) -> Result<PolyominoRegion, RegionError> {
    if !(eps > 0.0) {
        return Err(RegionError::InvalidSpec("lattice scale must be positive".into()));
    }
    spec.validate()?;
    let feature = spec.min_feature_size();
    if feature < 4.0 * eps {
        return Err(RegionError::InfeasibleGeometry(format!(
            "smallest hole or gap ({feature:.4}) is narrower than 4 lattice spacings ({:.4})",
            4.0 * eps
        )));
    }
    let mut even = rasterize_component(&spec.outer, spec.rasterization, eps, false);
    for h in &spec.holes {
        for s in rasterize_component(h, spec.rasterization, eps, true) {
            even.remove(&s);
        }
    }
    if even.is_empty() {
        return Err(RegionError::InfeasibleGeometry("domain contains no lattice squares".into()));
    }
    let bad = corner_violations(&even);
    if !bad.is_empty() {
        return Err(RegionError::InfeasibleGeometry(format!(
            "{} corner squares are not of class B1 (first: {:?})",
            bad.len(),
            bad[0]
        )));
    }
    let (loops, pinches) = trace_loops(&even);
    if !pinches.is_empty() {
        return Err(RegionError::InfeasibleGeometry(format!("boundary pinches at {:?}", pinches[0])));
    }
    if loops.iter().filter(|l| loop_area_sign(l) > 0).count() != 1 {
        return Err(RegionError::InfeasibleGeometry("rasterized region is not connected".into()));
    }

    // match lattice holes to continuum holes by majority vote of their squares
    let (labels, ncomp) = complement_components(&even);
    let mut votes = vec![vec![0usize; spec.genus() + 1]; ncomp];
    for (s, &c) in &labels {
        let id = spec.outside_component([s.i as f64 * eps, s.j as f64 * eps]);
        votes[c][id] += 1;
    }
    let mut lattice_hole_of = vec![None; spec.genus() + 1];
    for (c, v) in votes.iter().enumerate().skip(1) {
        let (id, _) = v.iter().enumerate().max_by_key(|(_, n)| **n).unwrap();
        if id == 0 {
            return Err(RegionError::InfeasibleGeometry("rasterization produced a spurious hole".into()));
        }
        if lattice_hole_of[id].replace(c).is_some() {
            return Err(RegionError::InfeasibleGeometry(format!("hole {id} splits on the lattice")));
        }
    }
    for (id, c) in lattice_hole_of.iter().enumerate().skip(1) {
        if c.is_none() {
            return Err(RegionError::InfeasibleGeometry(format!("hole {id} vanishes on the lattice")));
        }
    }

    let exterior_adjacent = |s: &LatticeSquare| s.neighbors().iter().any(|n| labels.get(n) == Some(&0));
    let removed = nearest_square(
        even.iter().copied().filter(|s| !s.is_white() && exterior_adjacent(s)),
        spec.marked_points[0],
        eps,
    )
    .ok_or_else(|| RegionError::InfeasibleGeometry("no black square on the outer boundary".into()))?;

    let mut added = Vec::with_capacity(spec.genus());
    for id in 1..=spec.genus() {
        let comp = lattice_hole_of[id].unwrap();
        let cands = labels
            .iter()
            .filter(|(s, c)| **c == comp && !s.is_white() && s.neighbors().iter().any(|n| even.contains(n)))
            .map(|(s, _)| *s);
        let sq = nearest_square(cands, spec.marked_points[id], eps)
            .ok_or_else(|| RegionError::InfeasibleGeometry(format!("hole {id} has no black boundary square")))?;
        added.push(sq);
    }

    let mut squares = even.clone();
    squares.remove(&removed);
    squares.extend(added.iter().copied());
    let white = squares.iter().filter(|s| s.is_white()).count();
    let black = squares.len() - white;
    if white != black {
        return Err(RegionError::UnbalancedRegion { white, black });
    }

    let (mut loops, pinches) = trace_loops(&squares);
    if !pinches.is_empty() {
        return Err(RegionError::InfeasibleGeometry(format!("marked squares pinch the boundary at {:?}", pinches[0])));
    }
    if loops.len() != spec.genus() + 1 {
        return Err(RegionError::InfeasibleGeometry("a marked square closes or splits a hole".into()));
    }
    // order hole loops by the continuum hole they surround
    let hole_of_loop = |lp: &Vec<LatticeVertex>| -> usize {
        let (a, b) = (lp[0], lp[1]);
        // square on the right of the directed edge a -> b lies outside the region
        let right = if b.p > a.p {
            LatticeSquare::new(a.p, a.q - 1)
        } else if b.p < a.p {
            LatticeSquare::new(b.p, b.q)
        } else if b.q > a.q {
            LatticeSquare::new(a.p, a.q)
        } else {
            LatticeSquare::new(a.p - 1, b.q)
        };
        let c = labels.get(&right).copied().unwrap_or(0);
        lattice_hole_of.iter().position(|x| *x == Some(c)).unwrap_or(0)
    };
    let outer = loops.remove(0);
    loops.sort_by_key(|lp| hole_of_loop(lp));
    loops.insert(0, outer);

    Ok(PolyominoRegion {
        squares,
        eps,
        boundary_loops: loops,
        removed_square: Some(removed),
        added_squares: added,
        genus: spec.genus(),
        marked_points: spec.marked_points.clone(),
    })
}

/// Outcome of [`validate_region`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RegionReport {
    pub white: usize,
    pub black: usize,
    /// `white - black`.
    pub balance_defect: i64,
    pub corner_violations: Vec<LatticeSquare>,
    pub pinch_vertices: Vec<LatticeVertex>,
    pub genus: usize,
    /// Whether each marked square sits on a straight boundary run of its neighbours.
    pub flat_marks: Vec<bool>,
    pub issues: Vec<String>,
    pub passed: bool,
}

impl fmt::Display for RegionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "region: {} white, {} black, genus {}", self.white, self.black, self.genus)?;
        writeln!(f, "balance defect: {}", self.balance_defect)?;
        writeln!(f, "corner violations: {}", self.corner_violations.len())?;
        writeln!(f, "pinch vertices: {}", self.pinch_vertices.len())?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })
    }
}

fn straight_run(even: &BTreeSet<LatticeSquare>, sq: LatticeSquare, inside: bool) -> bool {
    // directions in which `sq` touches the other side of the boundary
    let member = |s: LatticeSquare| even.contains(&s) == inside;
    for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        let across = LatticeSquare::new(sq.i + di, sq.j + dj);
        if member(across) {
            continue;
        }
        let (ti, tj) = (dj, di);
        let ok = (-2..=2).all(|k| {
            let s = LatticeSquare::new(sq.i + k * ti, sq.j + k * tj);
            let a = LatticeSquare::new(s.i + di, s.j + dj);
            member(s) && !member(a)
        });
        if ok {
            return true;
        }
    }
    false
}

pub fn validate_region(region: &PolyominoRegion) -> RegionReport {
    let mut report = RegionReport {
        white: region.white_count(),
        black: region.black_count(),
        genus: region.genus(),
        ..Default::default()
    };
    report.balance_defect = report.white as i64 - report.black as i64;
    if report.balance_defect != 0 {
        report.issues.push(format!("color balance defect {}", report.balance_defect));
    }

    let even = region.even_polyomino();
    report.corner_violations = corner_violations(&even);
    if !report.corner_violations.is_empty() {
        report.issues.push(format!("{} corner squares not of class B1", report.corner_violations.len()));
    }

    let (loops, pinches) = trace_loops(&region.squares);
    report.pinch_vertices = pinches;
    if !report.pinch_vertices.is_empty() {
        report.issues.push("boundary loops are not simple".into());
    }
    let outer_loops = loops.iter().filter(|l| loop_area_sign(l) > 0).count();
    if outer_loops != 1 {
        report.issues.push(format!("expected one outer boundary loop, found {outer_loops}"));
    }

    let (labels, ncomp) = complement_components(&even);
    let even_holes = ncomp.saturating_sub(1);
    match region.removed_square {
        None => report.issues.push("no removed square".into()),
        Some(r) => {
            if r.is_white() {
                report.issues.push("removed square not black".into());
            }
            if region.contains(r) {
                report.issues.push("removed square still in region".into());
            }
            if !r.neighbors().iter().any(|n| labels.get(n) == Some(&0)) {
                report.issues.push("removed square not on the outer boundary".into());
            }
            report.flat_marks.push(straight_run(&even, r, true));
        }
    }
    if region.added_squares.len() != even_holes {
        report
            .issues
            .push(format!("{} added squares for {} holes", region.added_squares.len(), even_holes));
    }
    let mut marked_holes = BTreeSet::new();
    for a in &region.added_squares {
        if a.is_white() {
            report.issues.push(format!("added square {a:?} not black"));
        }
        if !region.contains(*a) {
            report.issues.push(format!("added square {a:?} missing from region"));
        }
        match labels.get(a) {
            Some(&c) if c > 0 => {
                if !marked_holes.insert(c) {
                    report.issues.push(format!("hole marked twice by {a:?}"));
                }
            }
            _ => report.issues.push(format!("added square {a:?} is not inside a hole")),
        }
        if !a.neighbors().iter().any(|n| even.contains(n)) {
            report.issues.push(format!("added square {a:?} does not touch the hole boundary"));
        }
        report.flat_marks.push(straight_run(&even, *a, false));
    }
    if loops.len() != region.genus + 1 {
        report.issues.push(format!("{} boundary loops for genus {}", loops.len(), region.genus));
    }
    report.passed = report.issues.is_empty();
    report
}
