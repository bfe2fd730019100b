use std::collections::BTreeSet;

use proptest::prelude::*;
use temperley_core::kasteleyn::exact_count;
use temperley_core::*;

fn sq(i: i32, j: i32) -> LatticeSquare {
    LatticeSquare::new(i, j)
}

fn rect(w: i32, h: i32) -> PolyominoRegion {
    PolyominoRegion::rectangle(0, 0, w - 1, h - 1)
}

fn minus(r: &PolyominoRegion, out: &[(i32, i32)]) -> PolyominoRegion {
    let mut s = r.squares().clone();
    for &(i, j) in out {
        s.remove(&sq(i, j));
    }
    PolyominoRegion::from_squares(s, 1.0)
}

/// Small regions with their known tiling counts, where a count is known in closed form.
pub fn oracle_regions() -> Vec<(&'static str, PolyominoRegion, Option<u128>)> {
    vec![
        ("2x1", rect(2, 1), Some(1)),
        ("2x2", rect(2, 2), Some(2)),
        ("2x3", rect(2, 3), Some(3)),
        ("2x4", rect(2, 4), Some(5)),
        ("2x5", rect(2, 5), Some(8)),
        ("2x6", rect(2, 6), Some(13)),
        ("2x8", rect(2, 8), Some(34)),
        ("2x12", rect(2, 12), Some(233)),
        ("3x3 minus corner", minus(&rect(3, 3), &[(0, 0)]), Some(4)),
        ("3x4", rect(3, 4), Some(11)),
        ("3x6", rect(3, 6), Some(41)),
        ("3x8", rect(3, 8), Some(153)),
        ("4x4", rect(4, 4), Some(36)),
        ("4x5", rect(4, 5), Some(95)),
        ("4x6", rect(4, 6), Some(281)),
        ("5x5 minus center", minus(&rect(5, 5), &[(2, 2)]), None),
        ("5x5 minus corner", minus(&rect(5, 5), &[(0, 0)]), None),
        ("L shape", minus(&rect(4, 4), &[(2, 2), (3, 2), (2, 3), (3, 3)]), None),
        ("plus", PolyominoRegion::from_squares([sq(1, 0), sq(0, 1), sq(1, 1), sq(2, 1), sq(1, 2), sq(1, 3)], 1.0), None),
        ("Aztec diamond order 2", minus(&rect(4, 4), &[(0, 0), (3, 0), (0, 3), (3, 3)]), Some(8)),
        ("3x3 minus centre", minus(&rect(3, 3), &[(1, 1)]), Some(2)),
        ("4x4 minus two corners", minus(&rect(4, 4), &[(0, 0), (3, 3)]), Some(0)),
    ]
}

#[test]
fn determinant_matches_enumeration() {
    let regions = oracle_regions();
    assert!(regions.len() >= 20);
    for (name, region, known) in regions {
        let enumerated = enumerate_tilings(&region).unwrap();
        let distinct: BTreeSet<_> = enumerated.iter().cloned().collect();
        assert_eq!(distinct.len(), enumerated.len(), "{name}: duplicate tilings");
        for t in &enumerated {
            t.check(&region).unwrap();
        }
        if let Some(k) = known {
            assert_eq!(enumerated.len() as u128, k, "{name}");
        }
        match build_system(&region) {
            Ok(system) => {
                let count = count_tilings(&system);
                assert_eq!(count.exact, Some(enumerated.len() as u128), "{name}");
                if !enumerated.is_empty() {
                    assert!((count.log_count - (enumerated.len() as f64).ln()).abs() < 1e-9, "{name}");
                    assert!((system.log_abs_det() - (enumerated.len() as f64).ln()).abs() < 1e-9, "{name}");
                }
            }
            Err(KasteleynError::Region(RegionError::UnbalancedRegion { .. })) => {
                assert!(enumerated.is_empty(), "{name}")
            }
            Err(e) => panic!("{name}: {e}"),
        }
    }
}

#[test]
fn real_gauge_determinant_is_the_count() {
    for (name, region, _) in oracle_regions() {
        let Ok(system) = build_system(&region) else { continue };
        let n = system.size();
        let complex = exact_count(&system);
        let k = system.real_matrix();
        let faer_det: f64 = if n == 0 { 1.0 } else { k.determinant() };
        assert!((faer_det.abs() - complex as f64).abs() < 1e-6, "{name}: {faer_det} vs {complex}");
    }
}

#[test]
fn single_edge_probabilities_partition_each_square() {
    for (name, region, _) in oracle_regions() {
        let Ok(system) = build_system(&region) else { continue };
        if !system.is_tileable() {
            continue;
        }
        let tilings = enumerate_tilings(&region).unwrap();
        for &s in region.squares() {
            let mut total = 0.0;
            for n in s.neighbors() {
                if !region.contains(n) {
                    continue;
                }
                let p = system.edge_probability(s, n).unwrap();
                let hits = tilings
                    .iter()
                    .filter(|t| t.partner_map().get(&s) == Some(&n))
                    .count() as f64
                    / tilings.len() as f64;
                assert!((p - hits).abs() < 1e-10, "{name} {s:?}-{n:?}");
                total += p;
            }
            assert!((total - 1.0).abs() < 1e-10, "{name} {s:?}");
        }
    }
}

#[test]
fn conditioning_consistency() {
    // P(e1, e2) = P(e1) P(e2 | e1) with the conditional taken on the reduced region
    let region = rect(4, 5);
    let system = build_system(&region).unwrap();
    let e1 = (sq(1, 1), sq(2, 1));
    let e2 = (sq(1, 2), sq(1, 3));
    let joint = edge_probabilities(&system, &[e1, e2]).unwrap();
    let p1 = system.edge_probability(e1.0, e1.1).unwrap();
    let reduced = minus(&region, &[(1, 1), (2, 1)]);
    let cond = build_system(&reduced).unwrap().edge_probability(e2.0, e2.1).unwrap();
    assert!((joint - p1 * cond).abs() < 1e-12);
}

fn balanced_subsets() -> impl Strategy<Value = BTreeSet<LatticeSquare>> {
    prop::collection::btree_set((0i32..4, 0i32..5), 2..=20).prop_map(|cells| {
        cells.into_iter().map(|(i, j)| LatticeSquare::new(i, j)).collect::<BTreeSet<_>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn determinant_equals_enumeration_on_random_regions(squares in balanced_subsets()) {
        let region = PolyominoRegion::from_squares(squares, 1.0);
        let tilings = enumerate_tilings(&region).unwrap();
        match build_system(&region) {
            Ok(system) => prop_assert_eq!(count_tilings(&system).exact, Some(tilings.len() as u128)),
            Err(_) => prop_assert!(tilings.is_empty()),
        }
    }

    #[test]
    fn colour_classes_have_equal_density(i0 in -50i32..50, j0 in -50i32..50, k in 1i32..6) {
        let mut counts = std::collections::HashMap::new();
        for j in j0..j0 + 2 * k {
            for i in i0..i0 + 2 * k {
                *counts.entry(color_of(LatticeSquare::new(i, j))).or_insert(0) += 1;
            }
        }
        prop_assert_eq!(counts.len(), 4);
        prop_assert!(counts.values().all(|&c| c == k * k));
    }
}
