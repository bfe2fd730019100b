use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use temperley_core::height::face_increment_sums;
use temperley_core::*;

fn chi_square_uniform(region: &PolyominoRegion, n: usize, seed: u64) -> (usize, f64) {
    let system = build_system(region).unwrap();
    let tilings = enumerate_tilings(region).unwrap();
    let mut counts: HashMap<Tiling, usize> = tilings.iter().map(|t| (t.clone(), 0)).collect();
    for t in sample_many(&system, seed, n).unwrap() {
        *counts.get_mut(&t).expect("sample is an enumerated tiling") += 1;
    }
    let expected = n as f64 / tilings.len() as f64;
    let stat: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let df = (tilings.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    (counts.values().filter(|&&c| c > 0).count(), p)
}

#[test]
fn three_by_three_minus_corner_is_uniform() {
    let mut s = PolyominoRegion::rectangle(0, 0, 2, 2).squares().clone();
    s.remove(&LatticeSquare::new(0, 0));
    let region = PolyominoRegion::from_squares(s, 1.0);
    let (present, p) = chi_square_uniform(&region, 20_000, 1);
    assert_eq!(present, 4);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn four_by_four_is_uniform() {
    let (present, p) = chi_square_uniform(&PolyominoRegion::rectangle(0, 0, 3, 3), 20_000, 2);
    assert_eq!(present, 36);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let region = PolyominoRegion::rectangle(0, 0, 7, 7);
    let system = build_system(&region).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| sample_many(&system, 99, 16).unwrap());
    let b = four.install(|| sample_many(&system, 99, 16).unwrap());
    assert_eq!(a, b);
}

fn square_annulus() -> PolyominoRegion {
    let spec = DomainSpec {
        outer: Shape::Rect { min: [-0.5, 0.5], max: [14.5, 15.5] },
        holes: vec![Shape::Rect { min: [4.5, 5.5], max: [9.5, 10.5] }],
        marked_points: vec![[7.0, 0.5], [7.0, 5.5]],
        rasterization: Rasterization::Exact,
    };
    build_temperleyan(&spec, 1.0).unwrap()
}

#[test]
fn annulus_heights_are_rigid() {
    let region = square_annulus();
    let system = build_system(&region).unwrap();
    let index = VertexIndex::new(&region);
    let tilings = sample_many(&system, 3, 200).unwrap();
    let fields: Vec<HeightField> =
        tilings.iter().map(|t| HeightField::compute(&index, &region, t).unwrap()).collect();
    for t in &tilings {
        assert!(face_increment_sums(&region, t).iter().all(|(_, s)| *s == 0));
    }
    let boundary: Vec<usize> = region
        .boundary_loops()
        .iter()
        .flatten()
        .map(|v| index.get(*v).unwrap())
        .collect();
    let first = &fields[0];
    let hole_vertex = index.get(region.hole_vertex(1).unwrap()).unwrap();
    let hole_loop: Vec<usize> = region.boundary_loops()[1].iter().map(|v| index.get(*v).unwrap()).collect();
    let mut hole_values = std::collections::BTreeSet::new();
    for f in &fields {
        for k in 0..index.len() {
            assert_eq!(f.values()[k].rem_euclid(4), first.values()[k].rem_euclid(4));
        }
        // outer boundary heights are fixed; hole boundary heights move together
        for &k in boundary.iter().filter(|k| !hole_loop.contains(k)) {
            assert_eq!(f.values()[k], first.values()[k]);
        }
        let shift = f.values()[hole_vertex] - first.values()[hole_vertex];
        for &k in &hole_loop {
            assert_eq!(f.values()[k] - first.values()[k], shift);
        }
        hole_values.insert(f.values()[hole_vertex]);
    }
    // the hole height genuinely fluctuates
    assert!(hole_values.len() > 1);

    // Z_1 is centered and does not depend on the vertex chosen on the hole
    let expected = ExpectedHeightField::compute(&index, &system).unwrap();
    let zero = |_: Point| 0.0;
    let mut zs = Vec::new();
    for f in &fields {
        let (z, _) = hole_and_centered(&region, f, &expected, &[&zero], &[]).unwrap();
        for &k in &hole_loop {
            let alt = f.values()[k] as f64 - expected.values()[k];
            assert!((alt - z.z[0]).abs() < 1e-8);
        }
        zs.push(z.z[0]);
    }
    let n = zs.len() as f64;
    let mean = zs.iter().sum::<f64>() / n;
    let sd = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 4.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
    assert!(matches!(
        hole_and_centered(&region, &fields[0], &expected, &[], &[]),
        Err(HeightError::MissingHarmonicData(_))
    ));
}

#[test]
fn expected_heights_match_monte_carlo() {
    let mut s = PolyominoRegion::rectangle(0, 0, 2, 2).squares().clone();
    s.remove(&LatticeSquare::new(0, 0));
    let region = PolyominoRegion::from_squares(s, 1.0);
    let system = build_system(&region).unwrap();
    let index = VertexIndex::new(&region);
    let expected = ExpectedHeightField::compute(&index, &system).unwrap();
    let n = 100_000;
    let mut sum = vec![0.0; index.len()];
    let mut sum2 = vec![0.0; index.len()];
    for t in sample_many(&system, 17, n).unwrap() {
        let h = HeightField::compute(&index, &region, &t).unwrap();
        for (k, v) in h.values().iter().enumerate() {
            sum[k] += *v as f64;
            sum2[k] += (*v as f64).powi(2);
        }
    }
    for k in 0..index.len() {
        let mean = sum[k] / n as f64;
        let var = sum2[k] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        let diff = (mean - expected.values()[k]).abs();
        if se == 0.0 {
            assert!(diff < 1e-9);
        } else {
            assert!(diff < 4.0 * se, "vertex {:?}", index.vertices()[k]);
        }
    }
}
