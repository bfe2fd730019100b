//! Thurston height functions of domino tilings.
//!
//! Along a directed lattice edge with a white square on its left the height
//! increases by 3 if the edge crosses a domino and decreases by 1 otherwise;
//! with a black square on the left the signs are reversed.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::Point;
use crate::error::HeightError;
use crate::kasteleyn::{KasteleynSystem, Tiling};
use crate::region::{LatticeSquare, LatticeVertex, PolyominoRegion};

/// A real function on the plane, evaluated at vertex positions.
pub trait VertexFunction {
    fn value_at(&self, p: Point) -> f64;
}

impl<F: Fn(Point) -> f64> VertexFunction for F {
    fn value_at(&self, p: Point) -> f64 {
        self(p)
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    from: usize,
    to: usize,
    left: LatticeSquare,
    right: LatticeSquare,
}

fn increment(left: LatticeSquare, crosses: bool) -> i64 {
    let base = if crosses { 3 } else { -1 };
    if left.is_white() {
        base
    } else {
        -base
    }
}

/// Vertices and edges of a region, with a spanning tree rooted at the reference vertex.
#[derive(Debug)]
pub struct VertexIndex {
    vertices: Vec<LatticeVertex>,
    positions: Vec<Point>,
    index: HashMap<LatticeVertex, usize>,
    edges: Vec<Edge>,
    // (edge, traversed forward) in breadth-first order
    tree: Vec<(usize, bool)>,
    root: usize,
}

impl VertexIndex {
    pub fn new(region: &PolyominoRegion) -> Arc<Self> {
        let vertices: Vec<LatticeVertex> = region.vertices().into_iter().collect();
        let positions = vertices.iter().map(|v| region.vertex_position(*v)).collect();
        let index: HashMap<_, _> = vertices.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        let mut edges = Vec::new();
        for (k, v) in vertices.iter().enumerate() {
            let LatticeVertex { p, q } = *v;
            // horizontal edge to the right
            let (l, r) = (LatticeSquare::new(p, q), LatticeSquare::new(p, q - 1));
            if region.contains(l) || region.contains(r) {
                edges.push(Edge { from: k, to: index[&LatticeVertex::new(p + 1, q)], left: l, right: r });
            }
            // vertical edge upwards
            let (l, r) = (LatticeSquare::new(p - 1, q), LatticeSquare::new(p, q));
            if region.contains(l) || region.contains(r) {
                edges.push(Edge { from: k, to: index[&LatticeVertex::new(p, q + 1)], left: l, right: r });
            }
        }
        let root = region.reference_vertex().and_then(|v| index.get(&v).copied()).unwrap_or(0);
        let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            adj[edge.from].push((e, true));
            adj[edge.to].push((e, false));
        }
        let mut tree = Vec::with_capacity(vertices.len());
        let mut seen = vec![false; vertices.len()];
        let mut queue = VecDeque::new();
        if !vertices.is_empty() {
            seen[root] = true;
            queue.push_back(root);
        }
        while let Some(v) = queue.pop_front() {
            for &(e, fwd) in &adj[v] {
                let w = if fwd { edges[e].to } else { edges[e].from };
                if !seen[w] {
                    seen[w] = true;
                    tree.push((e, fwd));
                    queue.push_back(w);
                }
            }
        }
        Arc::new(Self { vertices, positions, index, edges, tree, root })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[LatticeVertex] {
        &self.vertices
    }

    pub fn position(&self, k: usize) -> Point {
        self.positions[k]
    }

    pub fn get(&self, v: LatticeVertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn root(&self) -> LatticeVertex {
        self.vertices[self.root]
    }

    /// Vertex nearest to a continuum point (ties to the smaller vertex).
    pub fn nearest(&self, p: Point) -> Option<LatticeVertex> {
        let d = |k: usize| (self.positions[k][0] - p[0]).powi(2) + (self.positions[k][1] - p[1]).powi(2);
        (0..self.len()).min_by(|&a, &b| d(a).total_cmp(&d(b))).map(|k| self.vertices[k])
    }
}

#[derive(Clone, Debug)]
pub struct HeightField {
    index: Arc<VertexIndex>,
    values: Vec<i64>,
}

impl HeightField {
    /// Heights of `tiling` over a precomputed vertex index of its region.
    pub fn compute(index: &Arc<VertexIndex>, region: &PolyominoRegion, tiling: &Tiling) -> Result<Self, HeightError> {
        tiling.check(region).map_err(HeightError::InconsistentTiling)?;
        let partner = tiling.partner_map();
        let inc = |e: &Edge| increment(e.left, partner.get(&e.left) == Some(&e.right));
        let mut values = vec![0i64; index.len()];
        for &(e, fwd) in &index.tree {
            let edge = &index.edges[e];
            if fwd {
                values[edge.to] = values[edge.from] + inc(edge);
            } else {
                values[edge.from] = values[edge.to] - inc(edge);
            }
        }
        for edge in &index.edges {
            if values[edge.to] - values[edge.from] != inc(edge) {
                return Err(HeightError::InconsistentTiling(format!(
                    "height increments do not close around {:?}",
                    index.vertices[edge.from]
                )));
            }
        }
        Ok(Self { index: index.clone(), values })
    }

    pub fn index(&self) -> &Arc<VertexIndex> {
        &self.index
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn get(&self, v: LatticeVertex) -> Option<i64> {
        self.index.get(v).map(|k| self.values[k])
    }

    /// CSV with columns `x,y,h` in vertex order (lattice coordinates of the vertex).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,h\n");
        for (v, h) in self.index.vertices.iter().zip(&self.values) {
            writeln!(s, "{},{},{}", v.p, v.q, h).unwrap();
        }
        s
    }
}

pub fn height_field(region: &PolyominoRegion, tiling: &Tiling) -> Result<HeightField, HeightError> {
    HeightField::compute(&VertexIndex::new(region), region, tiling)
}

/// Sum of the height increments around each region square, computed from the
/// local rule alone. All entries vanish for a valid tiling.
pub fn face_increment_sums(region: &PolyominoRegion, tiling: &Tiling) -> Vec<(LatticeSquare, i64)> {
    let partner = tiling.partner_map();
    region
        .squares()
        .iter()
        .map(|&s| {
            // counterclockwise, so `s` is always on the left
            let sum: i64 = s
                .neighbors()
                .iter()
                .map(|n| increment(s, partner.get(&s) == Some(n)))
                .sum();
            (s, sum)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExpectedHeightField {
    index: Arc<VertexIndex>,
    values: Vec<f64>,
}

impl ExpectedHeightField {
    pub fn compute(index: &Arc<VertexIndex>, system: &KasteleynSystem) -> Result<Self, HeightError> {
        let inv = system.inverse()?;
        let region = system.region();
        let expected_inc = |e: &Edge| -> f64 {
            if region.contains(e.left) && region.contains(e.right) {
                let (w, b) = if e.left.is_white() { (e.left, e.right) } else { (e.right, e.left) };
                let wi = system.white_index(w).unwrap();
                let bi = system.black_index(b).unwrap();
                let p = system.weight(w, b) * inv[(bi, wi)];
                let x = 4.0 * p - 1.0;
                if e.left.is_white() {
                    x
                } else {
                    -x
                }
            } else {
                increment(e.left, false) as f64
            }
        };
        let mut values = vec![0.0; index.len()];
        for &(e, fwd) in &index.tree {
            let edge = &index.edges[e];
            if fwd {
                values[edge.to] = values[edge.from] + expected_inc(edge);
            } else {
                values[edge.from] = values[edge.to] - expected_inc(edge);
            }
        }
        Ok(Self { index: index.clone(), values })
    }

    pub fn index(&self) -> &Arc<VertexIndex> {
        &self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, v: LatticeVertex) -> Option<f64> {
        self.index.get(v).map(|k| self.values[k])
    }
}

pub fn expected_height_field(
    system: &KasteleynSystem,
    region: &PolyominoRegion,
) -> Result<ExpectedHeightField, HeightError> {
    ExpectedHeightField::compute(&VertexIndex::new(region), system)
}

/// Centered hole heights `Z_j = h(v_j) - E[h(v_j)]` at the designated vertex of each hole.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HoleHeights {
    pub z: Vec<f64>,
}

/// Hole heights and the corrected field `h~ = h - E[h] - sum_j Z_j f_j` at
/// the query squares.
///
/// The height at a square is the mean over its four corners. Corner heights
/// take all four residues mod 4, so the mean lives on `1/2 + Z` rather than on
/// a translate of `4Z`, which keeps the lattice out of higher moments.
pub fn hole_and_centered(
    region: &PolyominoRegion,
    heights: &HeightField,
    expected: &ExpectedHeightField,
    harmonic: &[&dyn VertexFunction],
    queries: &[LatticeSquare],
) -> Result<(HoleHeights, Vec<f64>), HeightError> {
    let g = region.genus();
    if harmonic.len() < g {
        return Err(HeightError::MissingHarmonicData(format!(
            "{} harmonic measures supplied for genus {g}",
            harmonic.len()
        )));
    }
    let centered = |v: LatticeVertex| -> Result<f64, HeightError> {
        match (heights.get(v), expected.get(v)) {
            (Some(h), Some(e)) => Ok(h as f64 - e),
            _ => Err(HeightError::MissingHarmonicData(format!("vertex {v:?} is not in the region"))),
        }
    };
    let mut z = Vec::with_capacity(g);
    for j in 1..=g {
        let v = region
            .hole_vertex(j)
            .ok_or_else(|| HeightError::InconsistentTiling(format!("region has no boundary loop for hole {j}")))?;
        z.push(centered(v)?);
    }
    let mut out = Vec::with_capacity(queries.len());
    for &sq in queries {
        let pos = region.square_center(sq);
        let mut x = 0.0;
        for v in sq.corners() {
            x += centered(v)? / 4.0;
        }
        for (zj, f) in z.iter().zip(harmonic) {
            x -= zj * f.value_at(pos);
        }
        out.push(x);
    }
    Ok((HoleHeights { z }, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kasteleyn::{build_system, enumerate_tilings};

    #[test]
    fn two_by_two_heights() {
        let r = PolyominoRegion::rectangle(0, 0, 1, 1);
        let ts = enumerate_tilings(&r).unwrap();
        let hs: Vec<_> = ts.iter().map(|t| height_field(&r, t).unwrap()).collect();
        let center = LatticeVertex::new(1, 1);
        for v in hs[0].index().vertices() {
            if *v != center {
                assert_eq!(hs[0].get(*v), hs[1].get(*v));
            }
        }
        assert_eq!((hs[0].get(center).unwrap() - hs[1].get(center).unwrap()).abs(), 4);
        assert_eq!(hs[0].get(LatticeVertex::new(0, 0)), Some(0));
        for t in &ts {
            assert!(face_increment_sums(&r, t).iter().all(|(_, s)| *s == 0));
        }

        let s = build_system(&r).unwrap();
        let e = expected_height_field(&s, &r).unwrap();
        let mean = (hs[0].get(center).unwrap() + hs[1].get(center).unwrap()) as f64 / 2.0;
        assert!((e.get(center).unwrap() - mean).abs() < 1e-12);
        for v in e.index().vertices() {
            if *v != center {
                assert!((e.get(*v).unwrap() - hs[0].get(*v).unwrap() as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expected_matches_enumeration_average() {
        let r = PolyominoRegion::rectangle(0, 0, 3, 3);
        let ts = enumerate_tilings(&r).unwrap();
        let index = VertexIndex::new(&r);
        let s = build_system(&r).unwrap();
        let e = ExpectedHeightField::compute(&index, &s).unwrap();
        let hs: Vec<_> = ts.iter().map(|t| HeightField::compute(&index, &r, t).unwrap()).collect();
        for k in 0..index.len() {
            let mean = hs.iter().map(|h| h.values()[k] as f64).sum::<f64>() / hs.len() as f64;
            assert!((mean - e.values()[k]).abs() < 1e-10);
            let m4: Vec<i64> = hs.iter().map(|h| h.values()[k].rem_euclid(4)).collect();
            assert!(m4.iter().all(|m| *m == m4[0]));
        }
    }

    #[test]
    fn corrupted_tiling_is_rejected() {
        let r = PolyominoRegion::rectangle(0, 0, 1, 1);
        let t: Tiling = "0,0-1,0\n".parse().unwrap();
        assert!(matches!(height_field(&r, &t), Err(HeightError::InconsistentTiling(_))));
    }

    #[test]
    fn genus_zero_centering() {
        let r = PolyominoRegion::rectangle(0, 0, 3, 3);
        let t = enumerate_tilings(&r).unwrap().remove(5);
        let h = height_field(&r, &t).unwrap();
        let s = build_system(&r).unwrap();
        let e = expected_height_field(&s, &r).unwrap();
        let q = [LatticeSquare::new(1, 1)];
        let (z, ht) = hole_and_centered(&r, &h, &e, &[], &q).unwrap();
        assert!(z.z.is_empty());
        let want: f64 = q[0].corners().iter().map(|v| h.get(*v).unwrap() as f64 - e.get(*v).unwrap()).sum::<f64>() / 4.0;
        assert!((ht[0] - want).abs() < 1e-12);
        // corner residues are distinct, so the face mean sits on 1/2 + Z
        let s: i64 = q[0].corners().iter().map(|v| h.get(*v).unwrap()).sum();
        assert_eq!(s.rem_euclid(4), 2);
    }
}
