//! Finite-difference harmonic functions on a planar domain with holes.
//!
//! The Laplacian uses the Shortley-Weller five-point stencil: arms that leave
//! the domain are shortened to the boundary crossing, where Dirichlet data is
//! imposed. One sparse LU factorization serves every right-hand side.
//!
//! Harmonic conjugates are integrated on the dual grid (cell centres). A step
//! between neighbouring cells crosses one mesh edge, and the increment of the
//! conjugate is the difference of the field across that edge, so sums around
//! any loop of cells telescope into discrete Laplacians of the enclosed nodes.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;
use thiserror::Error;

use temperley_core::{ComponentId, DomainSpec, Point, RegionError, VertexFunction};

use crate::linalg::{complex_inverse, transpose, CMat, RMat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error(transparent)]
    Spec(#[from] RegionError),
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("linear solve failed: {0}")]
    SolverDiverged(String),
    #[error("source point is within {0} of the boundary")]
    SourceTooCloseToBoundary(f64),
    #[error("fields live on different meshes")]
    MismatchedMeshes,
    #[error("path leaves the domain: {0}")]
    PathLeavesDomain(String),
    #[error("A-period matrix is singular")]
    SingularPeriodMatrix,
    #[error("hole index {0} out of range")]
    BadHoleIndex(usize),
}

// below this fraction of a mesh step an arm is treated as this short
const MIN_THETA: f64 = 1e-3;
// E, W, N, S
const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Interior(usize),
    Exterior(ComponentId),
}

#[derive(Clone, Copy, Debug)]
struct Arm {
    theta: f64,
    // crossing component and point, for arms cut by the boundary
    cut: Option<(ComponentId, Point)>,
}

/// Uniform mesh over the domain's bounding box with boundary-cut stencils.
#[derive(Debug)]
pub struct Grid {
    spec: DomainSpec,
    h: f64,
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    nodes: Vec<Node>,
    unknowns: Vec<usize>,
    arms: Vec<[Arm; 4]>,
}

impl Grid {
    pub fn new(spec: &DomainSpec, h: f64) -> Result<Self, HarmonicError> {
        spec.validate()?;
        if !(h > 0.0) {
            return Err(HarmonicError::MeshTooCoarse("mesh size must be positive".into()));
        }
        let feature = spec.min_feature_size();
        if feature < 8.0 * h {
            return Err(HarmonicError::MeshTooCoarse(format!(
                "smallest gap {feature:.4} spans fewer than 8 mesh steps of {h:.4}"
            )));
        }
        let (lo, hi) = spec.bbox();
        let x0 = lo[0] - 2.0 * h;
        let y0 = lo[1] - 2.0 * h;
        let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 5;
        let ny = ((hi[1] - lo[1]) / h).ceil() as usize + 5;
        let mut nodes = Vec::with_capacity(nx * ny);
        let mut unknowns = Vec::new();
        for b in 0..ny {
            for a in 0..nx {
                let p = [x0 + a as f64 * h, y0 + b as f64 * h];
                if spec.contains(p) {
                    nodes.push(Node::Interior(unknowns.len()));
                    unknowns.push(b * nx + a);
                } else {
                    nodes.push(Node::Exterior(spec.outside_component(p)));
                }
            }
        }
        let mut grid = Self { spec: spec.clone(), h, x0, y0, nx, ny, nodes, unknowns, arms: Vec::new() };
        let arms = grid
            .unknowns
            .iter()
            .map(|&k| {
                let (a, b) = (k % nx, k / nx);
                let p = grid.node_point(a, b);
                DIRS.map(|(da, db)| {
                    let (na, nb) = ((a as i64 + da) as usize, (b as i64 + db) as usize);
                    match grid.nodes[nb * nx + na] {
                        Node::Interior(_) => Arm { theta: 1.0, cut: None },
                        Node::Exterior(c) => {
                            let q = grid.node_point(na, nb);
                            let (t, comp) = spec
                                .components()
                                .filter_map(|(id, s)| s.first_crossing(p, q).map(|t| (t, id)))
                                .min_by(|x, y| x.0.total_cmp(&y.0))
                                .unwrap_or((1.0, c));
                            let t = t.min(1.0);
                            let cross = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                            Arm { theta: t.max(MIN_THETA), cut: Some((comp, cross)) }
                        }
                    }
                })
            })
            .collect();
        grid.arms = arms;
        Ok(grid)
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    pub fn node_point(&self, a: usize, b: usize) -> Point {
        [self.x0 + a as f64 * self.h, self.y0 + b as f64 * self.h]
    }

    pub fn is_interior(&self, a: usize, b: usize) -> bool {
        a < self.nx && b < self.ny && matches!(self.nodes[b * self.nx + a], Node::Interior(_))
    }

    fn stencil(&self, arms: &[Arm; 4]) -> [f64; 4] {
        let (e, w, n, s) = (arms[0].theta, arms[1].theta, arms[2].theta, arms[3].theta);
        [2.0 / (e * (e + w)), 2.0 / (w * (e + w)), 2.0 / (n * (n + s)), 2.0 / (s * (n + s))]
    }

    fn matrix(&self) -> Result<SparseColMat<usize, f64>, HarmonicError> {
        let mut trip = Vec::with_capacity(5 * self.unknowns.len());
        for (u, &k) in self.unknowns.iter().enumerate() {
            let (a, b) = (k % self.nx, k / self.nx);
            let c = self.stencil(&self.arms[u]);
            trip.push(Triplet::new(u, u, -(c[0] + c[1] + c[2] + c[3])));
            for (d, &(da, db)) in DIRS.iter().enumerate() {
                if self.arms[u][d].cut.is_none() {
                    let nb = (b as i64 + db) as usize * self.nx + (a as i64 + da) as usize;
                    if let Node::Interior(v) = self.nodes[nb] {
                        trip.push(Triplet::new(u, v, c[d]));
                    }
                }
            }
        }
        let n = self.unknowns.len();
        SparseColMat::try_new_from_triplets(n, n, &trip).map_err(|e| HarmonicError::SolverDiverged(format!("{e:?}")))
    }

    /// Cell (dual point) `(a, b)` has corner nodes `(a..=a+1, b..=b+1)`.
    pub fn cell_center(&self, a: usize, b: usize) -> Point {
        [self.x0 + (a as f64 + 0.5) * self.h, self.y0 + (b as f64 + 0.5) * self.h]
    }

    fn cell_ok(&self, a: i64, b: i64, margin: i64) -> bool {
        for db in -margin..=1 + margin {
            for da in -margin..=1 + margin {
                let (x, y) = (a + da, b + db);
                if x < 0 || y < 0 || !self.is_interior(x as usize, y as usize) {
                    return false;
                }
            }
        }
        true
    }

    /// Cell at least two mesh steps away from the boundary.
    fn cell_deep(&self, a: i64, b: i64) -> bool {
        self.cell_ok(a, b, 1)
    }

    fn cell_of(&self, p: Point) -> (i64, i64) {
        (((p[0] - self.x0) / self.h - 0.5).round() as i64, ((p[1] - self.y0) / self.h - 0.5).round() as i64)
    }

    fn nearest_deep_cell(&self, p: Point) -> Option<(i64, i64)> {
        let (a0, b0) = self.cell_of(p);
        for r in 0..8i64 {
            let mut best: Option<((i64, i64), f64)> = None;
            for b in b0 - r..=b0 + r {
                for a in a0 - r..=a0 + r {
                    if (a - a0).abs().max((b - b0).abs()) != r || !self.cell_deep(a, b) {
                        continue;
                    }
                    let c = self.cell_center(a as usize, b as usize);
                    let d = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some(((a, b), d));
                    }
                }
            }
            if let Some((c, _)) = best {
                return Some(c);
            }
        }
        None
    }

    /// Shortest 4-connected chain of deep cells between two cells.
    fn route_cells(&self, from: (i64, i64), to: (i64, i64)) -> Option<Vec<(i64, i64)>> {
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let id = |c: (i64, i64)| (c.1 * nx + c.0) as usize;
        let mut prev = vec![u32::MAX; (nx * ny) as usize];
        prev[id(from)] = id(from) as u32;
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            if c == to {
                let mut path = vec![c];
                let mut cur = id(c);
                while cur != id(from) {
                    cur = prev[cur] as usize;
                    path.push(((cur as i64) % nx, (cur as i64) / nx));
                }
                path.reverse();
                return Some(path);
            }
            for (da, db) in DIRS {
                let n = (c.0 + da, c.1 + db);
                if n.0 >= 0 && n.1 >= 0 && n.0 < nx - 1 && n.1 < ny - 1 && prev[id(n)] == u32::MAX && self.cell_deep(n.0, n.1) {
                    prev[id(n)] = id(c) as u32;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Counterclockwise loop of cells two steps outside the bounding box of hole `j`.
    pub fn hole_contour(&self, j: usize) -> Result<Vec<(i64, i64)>, HarmonicError> {
        if j == 0 || j > self.spec.genus() {
            return Err(HarmonicError::BadHoleIndex(j));
        }
        let (lo, hi) = self.spec.component(j).bbox();
        let a0 = ((lo[0] - self.x0) / self.h - 0.5).floor() as i64 - 2;
        let a1 = ((hi[0] - self.x0) / self.h - 0.5).ceil() as i64 + 2;
        let b0 = ((lo[1] - self.y0) / self.h - 0.5).floor() as i64 - 2;
        let b1 = ((hi[1] - self.y0) / self.h - 0.5).ceil() as i64 + 2;
        let mut cells = Vec::new();
        cells.extend((a0..a1).map(|a| (a, b0)));
        cells.extend((b0..b1).map(|b| (a1, b)));
        cells.extend((a0 + 1..=a1).rev().map(|a| (a, b1)));
        cells.extend((b0 + 1..=b1).rev().map(|b| (a0, b)));
        if let Some(c) = cells.iter().find(|c| !self.cell_ok(c.0, c.1, 0)) {
            return Err(HarmonicError::PathLeavesDomain(format!("contour around hole {j} meets the boundary at cell {c:?}")));
        }
        Ok(cells)
    }
}

/// A grid function: solved values at interior nodes, boundary data on cut arms,
/// and an extension to exterior nodes next to the domain for interpolation.
#[derive(Clone, Debug)]
pub struct HarmonicField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    arm_values: Vec<[f64; 4]>,
    // boundary value per component when the data is constant on components
    component_values: Option<Vec<f64>>,
}

impl HarmonicField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn node_value(&self, a: usize, b: usize) -> f64 {
        self.values[b * self.grid.nx + a]
    }

    /// Values at interior nodes, in grid order.
    pub fn interior_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.unknowns.iter().map(|&k| self.values[k])
    }

    /// Values at all boundary crossings of the stencil arms, with their component.
    pub fn boundary_values(&self) -> impl Iterator<Item = (ComponentId, f64)> + '_ {
        self.grid.arms.iter().zip(&self.arm_values).flat_map(|(arms, vals)| {
            arms.iter().zip(vals).filter_map(|(arm, v)| arm.cut.map(|(c, _)| (c, *v)))
        })
    }

    pub fn component_value(&self, id: ComponentId) -> Option<f64> {
        self.component_values.as_ref().and_then(|v| v.get(id).copied())
    }

    fn cell_and_frac(&self, p: Point) -> (usize, usize, f64, f64) {
        let g = &self.grid;
        let fx = ((p[0] - g.x0) / g.h).clamp(0.0, (g.nx - 2) as f64);
        let fy = ((p[1] - g.y0) / g.h).clamp(0.0, (g.ny - 2) as f64);
        let a = (fx.floor() as usize).min(g.nx - 2);
        let b = (fy.floor() as usize).min(g.ny - 2);
        (a, b, fx - a as f64, fy - b as f64)
    }

    /// Bilinear interpolation of the node values.
    pub fn value_at(&self, p: Point) -> f64 {
        let (a, b, tx, ty) = self.cell_and_frac(p);
        let v = |da, db| self.node_value(a + da, b + db);
        (1.0 - tx) * (1.0 - ty) * v(0, 0) + tx * (1.0 - ty) * v(1, 0) + (1.0 - tx) * ty * v(0, 1) + tx * ty * v(1, 1)
    }

    fn node_gradient(&self, a: usize, b: usize) -> Point {
        let g = &self.grid;
        let d = |lo: usize, hi: usize, x: &dyn Fn(usize) -> f64| (x(hi) - x(lo)) / ((hi - lo) as f64 * g.h);
        let gx = d(a.saturating_sub(1), (a + 1).min(g.nx - 1), &|i| self.node_value(i, b));
        let gy = d(b.saturating_sub(1), (b + 1).min(g.ny - 1), &|j| self.node_value(a, j));
        [gx, gy]
    }

    /// Bilinear blend of central-difference gradients at the cell corners.
    pub fn gradient_at(&self, p: Point) -> Point {
        let (a, b, tx, ty) = self.cell_and_frac(p);
        let w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
        let mut out = [0.0, 0.0];
        for (k, (da, db)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let gr = self.node_gradient(a + da, b + db);
            out[0] += w[k] * gr[0];
            out[1] += w[k] * gr[1];
        }
        out
    }

    /// Maximum absolute residual of the discrete equations at interior nodes.
    pub fn residual(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for (u, &k) in g.unknowns.iter().enumerate() {
            let c = g.stencil(&g.arms[u]);
            let (a, b) = (k % g.nx, k / g.nx);
            let mut r = -(c[0] + c[1] + c[2] + c[3]) * self.values[k];
            for (d, &(da, db)) in DIRS.iter().enumerate() {
                let nb = if g.arms[u][d].cut.is_some() {
                    self.arm_values[u][d]
                } else {
                    self.node_value((a as i64 + da) as usize, (b as i64 + db) as usize)
                };
                r += c[d] * nb;
            }
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Increment of the harmonic conjugate for one step between adjacent cells.
    fn conjugate_step(&self, from: (i64, i64), to: (i64, i64)) -> f64 {
        let (a, b) = (from.0 as usize, from.1 as usize);
        let v = |x: usize, y: usize| self.node_value(x, y);
        match (to.0 - from.0, to.1 - from.1) {
            (1, 0) => -(v(a + 1, b + 1) - v(a + 1, b)),
            (-1, 0) => v(a, b + 1) - v(a, b),
            (0, 1) => v(a + 1, b + 1) - v(a, b + 1),
            (0, -1) => -(v(a + 1, b) - v(a, b)),
            _ => panic!("cells {from:?} and {to:?} are not adjacent"),
        }
    }

    fn cell_value(&self, c: (i64, i64)) -> f64 {
        let (a, b) = (c.0 as usize, c.1 as usize);
        0.25 * (self.node_value(a, b) + self.node_value(a + 1, b) + self.node_value(a, b + 1) + self.node_value(a + 1, b + 1))
    }

    /// Conjugate increment along a straight segment, from the interpolated gradient.
    fn conjugate_segment(&self, p: Point, q: Point) -> f64 {
        let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        let g = self.gradient_at(m);
        -g[1] * (q[0] - p[0]) + g[0] * (q[1] - p[1])
    }

    /// Sum of conjugate increments along a chain of adjacent cells.
    pub fn conjugate_along(&self, cells: &[(i64, i64)]) -> f64 {
        cells.windows(2).map(|w| self.conjugate_step(w[0], w[1])).sum()
    }
}

impl VertexFunction for HarmonicField {
    fn value_at(&self, p: Point) -> f64 {
        HarmonicField::value_at(self, p)
    }
}

/// Factored finite-difference Laplacian of a domain.
pub struct HarmonicSolver {
    grid: Arc<Grid>,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for HarmonicSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HarmonicSolver").field("grid", &self.grid.shape()).finish()
    }
}

impl HarmonicSolver {
    pub fn new(spec: &DomainSpec, h: f64) -> Result<Self, HarmonicError> {
        let grid = Grid::new(spec, h)?;
        let lu = grid
            .matrix()?
            .sp_lu()
            .map_err(|e| HarmonicError::SolverDiverged(format!("factorization failed: {e:?}")))?;
        Ok(Self { grid: Arc::new(grid), lu })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.grid.spec
    }

    /// Dirichlet problems with boundary data `data[k](component, point)`.
    pub fn solve(&self, data: &[&(dyn Fn(ComponentId, Point) -> f64 + Sync)]) -> Result<Vec<HarmonicField>, HarmonicError> {
        let g = &self.grid;
        let n = g.unknowns.len();
        let m = data.len();
        let mut rhs = Mat::<f64>::zeros(n, m);
        let mut arm_values = vec![vec![[f64::NAN; 4]; n]; m];
        for u in 0..n {
            let c = g.stencil(&g.arms[u]);
            for d in 0..4 {
                if let Some((comp, p)) = g.arms[u][d].cut {
                    for (k, f) in data.iter().enumerate() {
                        let v = f(comp, p);
                        arm_values[k][u][d] = v;
                        rhs[(u, k)] -= c[d] * v;
                    }
                }
            }
        }
        let x = self.lu.solve(&rhs);
        let mut out = Vec::with_capacity(m);
        for (k, f) in data.iter().enumerate() {
            let mut values = vec![0.0; g.nx * g.ny];
            for (u, &node) in g.unknowns.iter().enumerate() {
                let v = x[(u, k)];
                if !v.is_finite() {
                    return Err(HarmonicError::SolverDiverged("non-finite solution".into()));
                }
                values[node] = v;
            }
            // extend to exterior nodes that touch the domain, with the data at the nearest boundary point
            for b in 0..g.ny {
                for a in 0..g.nx {
                    let Node::Exterior(comp) = g.nodes[b * g.nx + a] else { continue };
                    let near = (b.saturating_sub(1)..=(b + 1).min(g.ny - 1))
                        .any(|y| (a.saturating_sub(1)..=(a + 1).min(g.nx - 1)).any(|x| g.is_interior(x, y)));
                    if near {
                        let (q, _) = g.spec.component(comp).nearest_boundary(g.node_point(a, b));
                        values[b * g.nx + a] = f(comp, q);
                    }
                }
            }
            out.push(HarmonicField { grid: g.clone(), values, arm_values: std::mem::take(&mut arm_values[k]), component_values: None });
        }
        Ok(out)
    }

    /// Harmonic measures `f_1, ..., f_g`: `f_j = 1` on hole `j` and 0 on the other components.
    pub fn harmonic_measures(&self) -> Result<Vec<HarmonicField>, HarmonicError> {
        let g = self.spec().genus();
        let data: Vec<Box<dyn Fn(ComponentId, Point) -> f64 + Sync>> =
            (1..=g).map(|j| Box::new(move |c: ComponentId, _: Point| if c == j { 1.0 } else { 0.0 }) as _).collect();
        let refs: Vec<&(dyn Fn(ComponentId, Point) -> f64 + Sync)> = data.iter().map(|b| b.as_ref()).collect();
        let mut fields = self.solve(&refs)?;
        for (j, f) in fields.iter_mut().enumerate() {
            f.component_values = Some((0..=g).map(|c| if c == j + 1 { 1.0 } else { 0.0 }).collect());
        }
        Ok(fields)
    }

    pub fn harmonic_measure(&self, j: usize) -> Result<HarmonicField, HarmonicError> {
        if j == 0 || j > self.spec().genus() {
            return Err(HarmonicError::BadHoleIndex(j));
        }
        let mut f = self.solve(&[&move |c: ComponentId, _: Point| if c == j { 1.0 } else { 0.0 }])?.remove(0);
        f.component_values = Some((0..=self.spec().genus()).map(|c| if c == j { 1.0 } else { 0.0 }).collect());
        Ok(f)
    }

    pub fn greens_function(&self, source: Point) -> Result<GreensFunction, HarmonicError> {
        let spec = self.spec();
        let h = self.grid.h;
        let dist = spec.components().map(|(_, s)| s.boundary_distance(source)).fold(f64::INFINITY, f64::min);
        if !spec.contains(source) || dist < 4.0 * h {
            return Err(HarmonicError::SourceTooCloseToBoundary(4.0 * h));
        }
        let data = move |_: ComponentId, q: Point| ((q[0] - source[0]).hypot(q[1] - source[1])).ln() / (2.0 * PI);
        let regular = self.solve(&[&data])?.remove(0);
        Ok(GreensFunction { source, regular })
    }
}

pub fn solve_harmonic_measure(spec: &DomainSpec, j: usize, h: f64) -> Result<HarmonicField, HarmonicError> {
    HarmonicSolver::new(spec, h)?.harmonic_measure(j)
}

pub fn greens_function(spec: &DomainSpec, source: Point, h: f64) -> Result<GreensFunction, HarmonicError> {
    HarmonicSolver::new(spec, h)?.greens_function(source)
}

/// Dirichlet Green's function `g(z, z') = -(1/2pi) log|z - z'| + H(z)` for a fixed source.
#[derive(Clone, Debug)]
pub struct GreensFunction {
    source: Point,
    regular: HarmonicField,
}

impl GreensFunction {
    pub fn source(&self) -> Point {
        self.source
    }

    pub fn regular_part(&self) -> &HarmonicField {
        &self.regular
    }

    pub fn value_at(&self, z: Point) -> f64 {
        let r = (z[0] - self.source[0]).hypot(z[1] - self.source[1]);
        -r.ln() / (2.0 * PI) + self.regular.value_at(z)
    }
}

/// `tau_ij = (1/2) int grad f_i . grad f_j`, one strip per mesh edge.
///
/// Each mesh edge carries the squared difference quotient over an `h x h`
/// strip; edges cut by the boundary have length `theta h` and contribute
/// `d_i d_j / theta`.
pub fn scale_matrix(fields: &[HarmonicField]) -> Result<RMat<f64>, HarmonicError> {
    let g = fields.len();
    let Some(first) = fields.first() else { return Ok(Vec::new()) };
    let grid = first.grid.clone();
    if fields.iter().any(|f| !Arc::ptr_eq(&f.grid, &grid)) {
        return Err(HarmonicError::MismatchedMeshes);
    }
    let mut tau = vec![vec![0.0; g]; g];
    let mut d = vec![0.0; g];
    for (u, &k) in grid.unknowns.iter().enumerate() {
        let (a, b) = (k % grid.nx, k / grid.nx);
        for (dir, &(da, db)) in DIRS.iter().enumerate() {
            let arm = grid.arms[u][dir];
            let weight = match arm.cut {
                Some(_) => {
                    for (i, f) in fields.iter().enumerate() {
                        d[i] = f.arm_values[u][dir] - f.values[k];
                    }
                    1.0 / arm.theta
                }
                // interior edges are visited from their west or south end only
                None if dir == 0 || dir == 2 => {
                    let nb = (b as i64 + db) as usize * grid.nx + (a as i64 + da) as usize;
                    for (i, f) in fields.iter().enumerate() {
                        d[i] = f.values[nb] - f.values[k];
                    }
                    1.0
                }
                None => continue,
            };
            for i in 0..g {
                for j in 0..g {
                    tau[i][j] += 0.5 * weight * d[i] * d[j];
                }
            }
        }
    }
    Ok(tau)
}

/// An endpoint of a path: interior points attach to the nearest deep cell;
/// boundary points first step inward along the normal.
#[derive(Clone, Copy, Debug)]
struct Endpoint {
    point: Point,
    boundary: Option<ComponentId>,
    attach: Point,
    cell: (i64, i64),
}

/// A polyline in the domain realised as a chain of mesh cells.
#[derive(Clone, Debug)]
pub struct Route {
    start: Endpoint,
    end: Endpoint,
    cells: Vec<(i64, i64)>,
}

impl Route {
    pub fn new(grid: &Grid, path: &[Point]) -> Result<Self, HarmonicError> {
        if path.len() < 2 {
            return Err(HarmonicError::PathLeavesDomain("a path needs at least two points".into()));
        }
        let endpoint = |p: Point| -> Result<Endpoint, HarmonicError> {
            let spec = &grid.spec;
            let id = spec.nearest_component(p);
            let on_boundary = spec.component(id).boundary_distance(p) < 0.5 * grid.h;
            if !on_boundary && !spec.contains(p) {
                return Err(HarmonicError::PathLeavesDomain(format!("{p:?} is outside the domain")));
            }
            let (boundary, attach) = if on_boundary {
                let (q, n) = spec.inward_normal(id, p);
                (Some(id), [q[0] + 3.0 * grid.h * n[0], q[1] + 3.0 * grid.h * n[1]])
            } else {
                (None, p)
            };
            let cell = grid
                .nearest_deep_cell(attach)
                .ok_or_else(|| HarmonicError::PathLeavesDomain(format!("no interior cell near {p:?}")))?;
            Ok(Endpoint { point: p, boundary, attach, cell })
        };
        let start = endpoint(path[0])?;
        let end = endpoint(*path.last().unwrap())?;
        let mut waypoints = vec![start.cell];
        for p in &path[1..path.len() - 1] {
            if !grid.spec.contains(*p) {
                return Err(HarmonicError::PathLeavesDomain(format!("waypoint {p:?} is outside the domain")));
            }
            waypoints.push(
                grid.nearest_deep_cell(*p)
                    .ok_or_else(|| HarmonicError::PathLeavesDomain(format!("no interior cell near {p:?}")))?,
            );
        }
        waypoints.push(end.cell);
        let mut cells = vec![start.cell];
        for w in waypoints.windows(2) {
            let leg = grid
                .route_cells(w[0], w[1])
                .ok_or_else(|| HarmonicError::PathLeavesDomain(format!("cells {:?} and {:?} are not connected", w[0], w[1])))?;
            cells.extend_from_slice(&leg[1..]);
        }
        Ok(Self { start, end, cells })
    }

    pub fn cells(&self) -> &[(i64, i64)] {
        &self.cells
    }

    fn endpoint_value(field: &HarmonicField, e: &Endpoint) -> f64 {
        match e.boundary.and_then(|c| field.component_value(c)) {
            Some(v) => v,
            None => field.value_at(e.point),
        }
    }

    fn conjugate_to_cell(field: &HarmonicField, e: &Endpoint) -> f64 {
        let c = field.grid.cell_center(e.cell.0 as usize, e.cell.1 as usize);
        // the conjugate is stationary along the inward normal at the boundary
        let from = if e.boundary.is_some() { e.attach } else { e.point };
        field.conjugate_segment(from, c)
    }

    /// Increment of `W = f + i f*` along the route.
    pub fn increment(&self, field: &HarmonicField) -> Complex64 {
        let re = Self::endpoint_value(field, &self.end) - Self::endpoint_value(field, &self.start);
        let im = Self::conjugate_to_cell(field, &self.start) + field.conjugate_along(&self.cells)
            - Self::conjugate_to_cell(field, &self.end);
        Complex64::new(re, im)
    }
}

/// Increment of `W_l = f_l + i f_l*` along a polyline in the domain.
pub fn complex_measure_path(field: &HarmonicField, path: &[Point]) -> Result<Complex64, HarmonicError> {
    Ok(Route::new(&field.grid, path)?.increment(field))
}

/// Harmonic measures of a domain together with their periods.
#[derive(Debug)]
pub struct HarmonicSurface {
    solver: HarmonicSolver,
    fields: Vec<HarmonicField>,
    contours: Vec<Vec<(i64, i64)>>,
    // P[i][l] = A_i-period of dW_l
    periods: CMat<f64>,
    // omega_k = sum_l coeffs[k][l] dW_l
    coeffs: CMat<f64>,
}

impl HarmonicSurface {
    pub fn new(spec: &DomainSpec, h: f64) -> Result<Self, HarmonicError> {
        let solver = HarmonicSolver::new(spec, h)?;
        let fields = solver.harmonic_measures()?;
        let g = spec.genus();
        let contours = (1..=g).map(|j| solver.grid.hole_contour(j)).collect::<Result<Vec<_>, _>>()?;
        let periods: CMat<f64> = contours
            .iter()
            .map(|c| {
                let mut closed = c.clone();
                closed.push(c[0]);
                fields.iter().map(|f| Complex64::new(0.0, f.conjugate_along(&closed))).collect()
            })
            .collect();
        let coeffs = if g == 0 {
            Vec::new()
        } else {
            complex_inverse(&transpose(&periods)).ok_or(HarmonicError::SingularPeriodMatrix)?
        };
        Ok(Self { solver, fields, contours, periods, coeffs })
    }

    pub fn genus(&self) -> usize {
        self.fields.len()
    }

    pub fn spec(&self) -> &DomainSpec {
        self.solver.spec()
    }

    pub fn solver(&self) -> &HarmonicSolver {
        &self.solver
    }

    pub fn fields(&self) -> &[HarmonicField] {
        &self.fields
    }

    pub fn contour(&self, j: usize) -> &[(i64, i64)] {
        &self.contours[j - 1]
    }

    /// `P[i][l]`, the A_i-period of `dW_l`.
    pub fn periods(&self) -> &CMat<f64> {
        &self.periods
    }

    /// Coefficients of the normalized differentials in the `dW_l` basis.
    pub fn omega_coeffs(&self) -> &CMat<f64> {
        &self.coeffs
    }

    /// Scale matrix from the Dirichlet energies.
    pub fn tau(&self) -> Result<RMat<f64>, HarmonicError> {
        scale_matrix(&self.fields)
    }

    /// Scale matrix from the fluxes through the A-contours: `P = -2i tau`.
    pub fn tau_from_periods(&self) -> RMat<f64> {
        self.periods.iter().map(|r| r.iter().map(|z| -z.im / 2.0).collect()).collect()
    }

    /// Densities `phi_k` with `omega_k = phi_k(z) dz` in the domain.
    pub fn differential_density(&self, z: Point) -> Vec<Complex64> {
        let dw: Vec<Complex64> = self
            .fields
            .iter()
            .map(|f| {
                let g = f.gradient_at(z);
                Complex64::new(g[0], -g[1])
            })
            .collect();
        self.apply_coeffs(&dw)
    }

    /// `oint_{A_i} omega_j` on the flux contours; the identity up to discretization.
    pub fn normalized_a_periods(&self) -> CMat<f64> {
        self.periods.iter().map(|row| self.apply_coeffs(row)).collect()
    }

    fn apply_coeffs(&self, dw: &[Complex64]) -> Vec<Complex64> {
        self.coeffs.iter().map(|row| row.iter().zip(dw).map(|(c, w)| c * w).sum()).collect()
    }

    /// `int omega_k` along a route, `k = 1..g`.
    pub fn omega_along(&self, route: &Route) -> Vec<Complex64> {
        let dw: Vec<Complex64> = self.fields.iter().map(|f| route.increment(f)).collect();
        self.apply_coeffs(&dw)
    }

    /// Abel map `int_{d_0}^{z} omega` along a path in the domain.
    pub fn abel(&self, z: Point) -> Result<Vec<Complex64>, HarmonicError> {
        let d0 = self.spec().marked_points[0];
        let route = Route::new(&self.solver.grid, &[d0, z])?;
        Ok(self.omega_along(&route))
    }

    /// `int_{d_0}^{d_j} omega` for `j = 1..g`.
    pub fn abel_marked(&self) -> Result<Vec<Vec<Complex64>>, HarmonicError> {
        let marks = self.spec().marked_points.clone();
        marks[1..].iter().map(|&d| self.abel(d)).collect()
    }

    /// Period matrix: `B_ij` is twice `i Im int_{A_0}^{A_i} omega_j`, the mirror
    /// half of the B-cycle contributing the conjugate of the half in the domain.
    pub fn period_matrix(&self) -> Result<CMat<f64>, HarmonicError> {
        let halves = self.abel_marked()?;
        let g = self.genus();
        Ok((0..g)
            .map(|i| {
                (0..g)
                    .map(|j| {
                        let half = halves[i][j];
                        half - half.conj()
                    })
                    .collect()
            })
            .collect())
    }

    /// `oint_{A_l} u_j omega_l`, with `u_j` the Abel map continued along the contour.
    pub fn contour_moment(&self, l: usize, j: usize) -> Result<Complex64, HarmonicError> {
        let contour = &self.contours[l - 1];
        let grid = &self.solver.grid;
        let start = grid.cell_center(contour[0].0 as usize, contour[0].1 as usize);
        let mut u = self.abel(start)?[j - 1];
        let mut closed = contour.clone();
        closed.push(contour[0]);
        let mut total = Complex64::new(0.0, 0.0);
        for w in closed.windows(2) {
            let dw: Vec<Complex64> = self
                .fields
                .iter()
                .map(|f| Complex64::new(f.cell_value(w[1]) - f.cell_value(w[0]), f.conjugate_step(w[0], w[1])))
                .collect();
            let d_omega = self.apply_coeffs(&dw);
            let u_next = u + d_omega[j - 1];
            total += 0.5 * (u + u_next) * d_omega[l - 1];
            u = u_next;
        }
        Ok(total)
    }
}
