//! Continuum domains with holes: rectilinear polygons and circles.

use serde::{Deserialize, Serialize};

use crate::error::RegionError;

pub type Point = [f64; 2];

const GEOM_EPS: f64 = 1e-12;

/// A boundary component of a continuum domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect { min: Point, max: Point },
    /// Closed axis-aligned polygon, vertices in order (either orientation).
    Polygon { vertices: Vec<Point> },
    Circle { center: Point, radius: f64 },
}

/// How rectilinear components are turned into lattice squares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rasterization {
    /// A square belongs to a component iff its center does; the caller aligns
    /// the polygon with the lattice.
    #[default]
    Exact,
    /// Components are covered by 3x3 blocks on the even sublattice, which
    /// satisfies the corner condition by construction. Circles always use this.
    Staircase,
}

/// Index of a boundary component: 0 is the outer boundary, `j >= 1` is hole `j`.
pub type ComponentId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub outer: Shape,
    #[serde(default)]
    pub holes: Vec<Shape>,
    /// `d_0, ..., d_g`, one point on each boundary component.
    pub marked_points: Vec<Point>,
    #[serde(default)]
    pub rasterization: Rasterization,
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Shape {
    fn polygon_vertices(&self) -> Option<Vec<Point>> {
        match self {
            Shape::Rect { min, max } => Some(vec![
                [min[0], min[1]],
                [max[0], min[1]],
                [max[0], max[1]],
                [min[0], max[1]],
            ]),
            Shape::Polygon { vertices } => Some(vertices.clone()),
            Shape::Circle { .. } => None,
        }
    }

    fn edges(&self) -> Vec<(Point, Point)> {
        let vs = self.polygon_vertices().unwrap_or_default();
        (0..vs.len()).map(|k| (vs[k], vs[(k + 1) % vs.len()])).collect()
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Shape::Circle { .. })
    }

    pub fn check(&self) -> Result<(), RegionError> {
        match self {
            Shape::Rect { min, max } => {
                if !(max[0] > min[0] && max[1] > min[1]) {
                    return Err(RegionError::InvalidSpec("rect must have max > min".into()));
                }
            }
            Shape::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(RegionError::InvalidSpec("circle radius must be positive".into()));
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 4 {
                    return Err(RegionError::InvalidSpec("polygon needs at least 4 vertices".into()));
                }
                for (a, b) in self.edges() {
                    let horizontal = (a[1] - b[1]).abs() < GEOM_EPS;
                    let vertical = (a[0] - b[0]).abs() < GEOM_EPS;
                    if horizontal == vertical {
                        return Err(RegionError::InvalidSpec(format!(
                            "polygon edge {a:?} -> {b:?} is not axis-aligned"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Rect { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
            Shape::Circle { center, radius } => dist(p, *center) < *radius,
            Shape::Polygon { vertices } => {
                if self.boundary_distance(p) < GEOM_EPS {
                    return false;
                }
                let mut inside = false;
                let n = vertices.len();
                for k in 0..n {
                    let a = vertices[k];
                    let b = vertices[(k + 1) % n];
                    if (a[1] > p[1]) != (b[1] > p[1]) {
                        let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                        if p[0] < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    pub fn bbox(&self) -> (Point, Point) {
        match self {
            Shape::Rect { min, max } => (*min, *max),
            Shape::Circle { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Shape::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Nearest boundary point and the unit normal pointing out of the shape.
    pub fn nearest_boundary(&self, p: Point) -> (Point, Point) {
        match self {
            Shape::Circle { center, radius } => {
                let d = dist(p, *center);
                let n = if d < GEOM_EPS {
                    [1.0, 0.0]
                } else {
                    [(p[0] - center[0]) / d, (p[1] - center[1]) / d]
                };
                ([center[0] + radius * n[0], center[1] + radius * n[1]], n)
            }
            _ => {
                let ccw = self.signed_area() > 0.0;
                let mut best = (f64::INFINITY, p, [0.0, 0.0]);
                for (a, b) in self.edges() {
                    let (q, _) = project_segment(p, a, b);
                    let d = dist(p, q);
                    if d < best.0 {
                        let len = dist(a, b);
                        let tangent = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
                        // right-hand normal of a ccw traversal points outward
                        let mut n = [tangent[1], -tangent[0]];
                        if !ccw {
                            n = [-n[0], -n[1]];
                        }
                        best = (d, q, n);
                    }
                }
                (best.1, best.2)
            }
        }
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            Shape::Circle { center, radius } => (dist(p, *center) - radius).abs(),
            _ => self
                .edges()
                .into_iter()
                .map(|(a, b)| dist(p, project_segment(p, a, b).0))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn signed_area(&self) -> f64 {
        let vs = self.polygon_vertices().unwrap_or_default();
        let n = vs.len();
        (0..n)
            .map(|k| {
                let a = vs[k];
                let b = vs[(k + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    /// Smallest `t` in `(0, 1]` at which the segment `a + t (b - a)` meets the boundary.
    pub fn first_crossing(&self, a: Point, b: Point) -> Option<f64> {
        let d = [b[0] - a[0], b[1] - a[1]];
        match self {
            Shape::Circle { center, radius } => {
                let f = [a[0] - center[0], a[1] - center[1]];
                let qa = d[0] * d[0] + d[1] * d[1];
                let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let qc = f[0] * f[0] + f[1] * f[1] - radius * radius;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 || qa == 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let mut roots = [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)];
                roots.sort_by(|x, y| x.total_cmp(y));
                roots.into_iter().find(|t| *t > GEOM_EPS && *t <= 1.0 + GEOM_EPS)
            }
            _ => {
                let mut best: Option<f64> = None;
                for (p, q) in self.edges() {
                    if let Some(t) = segment_intersection(a, b, p, q) {
                        if t > GEOM_EPS && t <= 1.0 + GEOM_EPS {
                            best = Some(best.map_or(t, |bt: f64| bt.min(t)));
                        }
                    }
                }
                best
            }
        }
    }

    /// Evenly spaced points along the boundary.
    pub fn boundary_samples(&self, n: usize) -> Vec<Point> {
        match self {
            Shape::Circle { center, radius } => (0..n)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / n as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            _ => {
                let edges = self.edges();
                let total: f64 = edges.iter().map(|(a, b)| dist(*a, *b)).sum();
                let mut out = Vec::with_capacity(n);
                for (a, b) in edges {
                    let m = ((dist(a, b) / total) * n as f64).ceil().max(1.0) as usize;
                    for k in 0..m {
                        let t = k as f64 / m as f64;
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }
}

fn project_segment(p: Point, a: Point, b: Point) -> (Point, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    ([a[0] + t * d[0], a[1] + t * d[1]], t)
}

/// Parameter along `a -> b` where it meets segment `p -> q`, if it does.
fn segment_intersection(a: Point, b: Point, p: Point, q: Point) -> Option<f64> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [q[0] - p[0], q[1] - p[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < GEOM_EPS {
        return None;
    }
    let w = [p[0] - a[0], p[1] - a[1]];
    let t = (w[0] * s[1] - w[1] * s[0]) / denom;
    let u = (w[0] * r[1] - w[1] * r[0]) / denom;
    (u >= -GEOM_EPS && u <= 1.0 + GEOM_EPS).then_some(t)
}

impl DomainSpec {
    pub fn genus(&self) -> usize {
        self.holes.len()
    }

    pub fn component(&self, id: ComponentId) -> &Shape {
        if id == 0 {
            &self.outer
        } else {
            &self.holes[id - 1]
        }
    }

    pub fn components(&self) -> impl Iterator<Item = (ComponentId, &Shape)> {
        std::iter::once(&self.outer).chain(self.holes.iter()).enumerate()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.outer.contains(p) && !self.holes.iter().any(|h| h.contains(p))
    }

    /// Component whose complementary piece contains `p` (for points outside the domain).
    pub fn outside_component(&self, p: Point) -> ComponentId {
        for (j, h) in self.holes.iter().enumerate() {
            if h.contains(p) {
                return j + 1;
            }
        }
        if !self.outer.contains(p) {
            return 0;
        }
        self.nearest_component(p)
    }

    pub fn nearest_component(&self, p: Point) -> ComponentId {
        self.components()
            .map(|(id, s)| (id, s.boundary_distance(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(id, _)| id)
            .unwrap_or(0)
    }

    /// Unit normal at the boundary point nearest `p` on component `id`, pointing into the domain.
    pub fn inward_normal(&self, id: ComponentId, p: Point) -> (Point, Point) {
        let (q, n_out_of_shape) = self.component(id).nearest_boundary(p);
        if id == 0 {
            (q, [-n_out_of_shape[0], -n_out_of_shape[1]])
        } else {
            (q, n_out_of_shape)
        }
    }

    pub fn bbox(&self) -> (Point, Point) {
        self.outer.bbox()
    }

    /// Checks that holes are disjoint, strictly inside the outer component, and
    /// that each marked point lies on its component.
    pub fn validate(&self) -> Result<(), RegionError> {
        for (_, s) in self.components() {
            s.check()?;
        }
        if self.marked_points.len() != self.genus() + 1 {
            return Err(RegionError::InvalidSpec(format!(
                "expected {} marked points (one per boundary component), got {}",
                self.genus() + 1,
                self.marked_points.len()
            )));
        }
        for (j, h) in self.holes.iter().enumerate() {
            for p in h.boundary_samples(256) {
                if !self.outer.contains(p) {
                    return Err(RegionError::InvalidSpec(format!("hole {} is not strictly inside outer", j + 1)));
                }
                for (k, other) in self.holes.iter().enumerate() {
                    if k != j && (other.contains(p) || other.boundary_distance(p) < GEOM_EPS) {
                        return Err(RegionError::InvalidSpec(format!("holes {} and {} intersect", j + 1, k + 1)));
                    }
                }
            }
        }
        let scale = {
            let (lo, hi) = self.bbox();
            (hi[0] - lo[0]).max(hi[1] - lo[1])
        };
        for (id, s) in self.components() {
            let d = s.boundary_distance(self.marked_points[id]);
            if d > 1e-9 * scale.max(1.0) {
                return Err(RegionError::InvalidSpec(format!(
                    "marked point d_{id} is not on its boundary component (distance {d:e})"
                )));
            }
        }
        Ok(())
    }

    /// Smallest distance between two distinct boundary components, and the
    /// smallest hole width, both estimated from boundary samples.
    pub fn min_feature_size(&self) -> f64 {
        let samples: Vec<Vec<Point>> = self.components().map(|(_, s)| s.boundary_samples(512)).collect();
        let mut best = f64::INFINITY;
        for a in 0..samples.len() {
            for b in (a + 1)..samples.len() {
                for p in &samples[a] {
                    best = best.min(self.component(b).boundary_distance(*p));
                }
            }
        }
        for h in &self.holes {
            let (lo, hi) = h.bbox();
            best = best.min((hi[0] - lo[0]).min(hi[1] - lo[1]));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annulus() -> DomainSpec {
        DomainSpec {
            outer: Shape::Circle { center: [0.0, 0.0], radius: 1.0 },
            holes: vec![Shape::Circle { center: [0.0, 0.0], radius: 0.5 }],
            marked_points: vec![[1.0, 0.0], [0.5, 0.0]],
            rasterization: Rasterization::Exact,
        }
    }

    #[test]
    fn containment_and_components() {
        let d = annulus();
        d.validate().unwrap();
        assert!(d.contains([0.75, 0.0]));
        assert!(!d.contains([0.1, 0.0]));
        assert_eq!(d.outside_component([0.1, 0.0]), 1);
        assert_eq!(d.outside_component([2.0, 0.0]), 0);
    }

    #[test]
    fn crossings() {
        let c = Shape::Circle { center: [0.0, 0.0], radius: 1.0 };
        let t = c.first_crossing([0.5, 0.0], [1.5, 0.0]).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        let r = Shape::Rect { min: [0.0, 0.0], max: [1.0, 1.0] };
        let t = r.first_crossing([0.5, 0.5], [0.5, 1.5]).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inward_normals() {
        let d = annulus();
        let (q, n) = d.inward_normal(1, [0.6, 0.0]);
        assert!((q[0] - 0.5).abs() < 1e-12 && (n[0] - 1.0).abs() < 1e-12);
        let (_, n) = d.inward_normal(0, [0.9, 0.0]);
        assert!((n[0] + 1.0).abs() < 1e-12);
        let sq = DomainSpec {
            outer: Shape::Rect { min: [0.0, 0.0], max: [2.0, 2.0] },
            holes: vec![Shape::Polygon { vertices: vec![[0.5, 0.5], [0.5, 1.5], [1.5, 1.5], [1.5, 0.5]] }],
            marked_points: vec![[1.0, 0.0], [1.0, 0.5]],
            rasterization: Rasterization::Exact,
        };
        sq.validate().unwrap();
        let (_, n) = sq.inward_normal(0, [1.0, 0.1]);
        assert!((n[1] - 1.0).abs() < 1e-12);
        let (_, n) = sq.inward_normal(1, [1.0, 0.4]);
        assert!((n[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut d = annulus();
        d.marked_points[1] = [0.7, 0.0];
        assert!(d.validate().is_err());
        let mut d = annulus();
        d.holes[0] = Shape::Circle { center: [0.9, 0.0], radius: 0.5 };
        assert!(d.validate().is_err());
    }
}
