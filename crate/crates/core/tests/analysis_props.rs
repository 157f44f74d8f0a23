use std::collections::BTreeSet;

use loopforge::analysis::{
    box_dimension, cut_point_count, dyadic_scales, escape_curve, estimate_escape, scan_quasi_loops, QuasiLoopQuery,
};
use loopforge::lattice::{BoundaryConvention, LatticePath, PathKind, Site};
use loopforge::rng::stream;
use loopforge::walks::{sample_lerw, WalkConfig};
use proptest::prelude::*;

/// Every lattice center near the path, checked against the definition with
/// the widest pair of visits.
fn quasi_loops_brute(path: &LatticePath, q: QuasiLoopQuery) -> BTreeSet<Site> {
    let dim = path.dim();
    let sites: Vec<Vec<i32>> = path.iter().map(<[i32]>::to_vec).collect();
    let pad = q.s.floor() as i32;
    let lo: Vec<i32> = (0..dim).map(|k| sites.iter().map(|x| x[k]).min().unwrap() - pad).collect();
    let hi: Vec<i32> = (0..dim).map(|k| sites.iter().map(|x| x[k]).max().unwrap() + pad).collect();
    let dist2 = |x: &[i32], v: &[i32]| x.iter().zip(v).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>();
    let mut out = BTreeSet::new();
    let mut v = lo.clone();
    loop {
        let inside: Vec<usize> = (0..sites.len()).filter(|&i| dist2(&sites[i], &v) <= q.s * q.s).collect();
        if let (Some(&f), Some(&l)) = (inside.first(), inside.last()) {
            if sites[f..=l].iter().any(|x| dist2(x, &v) > q.r * q.r) {
                out.insert(Site::new(&v));
            }
        }
        let mut k = 0;
        loop {
            if k == dim {
                return out;
            }
            if v[k] < hi[k] {
                v[k] += 1;
                break;
            }
            v[k] = lo[k];
            k += 1;
        }
    }
}

fn walk(dim: usize, moves: &[u8]) -> LatticePath {
    let mut x = vec![0i32; dim];
    let mut flat = x.clone();
    for &m in moves {
        let k = m as usize % (2 * dim);
        x[k / 2] += if k.is_multiple_of(2) { 1 } else { -1 };
        flat.extend_from_slice(&x);
    }
    LatticePath::from_flat(dim, flat, PathKind::NearestNeighbor).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scanner_matches_brute_force(
        dim in 2usize..=3,
        moves in prop::collection::vec(any::<u8>(), 0..200),
        s in 0.5f64..4.0,
        gap in 0.1f64..6.0,
    ) {
        let p = walk(dim, &moves);
        let q = QuasiLoopQuery::new(s, s + gap).unwrap();
        prop_assert_eq!(scan_quasi_loops(&p, q), quasi_loops_brute(&p, q));
    }
}

#[test]
fn scanner_is_monotone_in_both_radii() {
    let mut rng = stream(1, 0);
    let cfg = WalkConfig::new(3, 16, 0).unwrap().with_convention(BoundaryConvention::Closed);
    for _ in 0..100 {
        let p = sample_lerw(&cfg, &mut rng).unwrap();
        let base = scan_quasi_loops(&p, QuasiLoopQuery::new(1.5, 4.0).unwrap());
        assert!(scan_quasi_loops(&p, QuasiLoopQuery::new(2.5, 4.0).unwrap()).is_superset(&base));
        assert!(scan_quasi_loops(&p, QuasiLoopQuery::new(1.5, 3.0).unwrap()).is_superset(&base));
        assert!(scan_quasi_loops(&p, QuasiLoopQuery::new(1.0, 6.0).unwrap()).is_subset(&base));
    }
}

#[test]
fn box_dimension_calibration() {
    let segment: Vec<Vec<f64>> = (0..10_000).map(|k| vec![(k as f64 + 0.5) / 1e4, 0.25]).collect();
    let fit = box_dimension(&segment, &dyadic_scales(1, 10)).unwrap();
    assert!((fit.slope - 1.0).abs() <= 0.05, "{}", fit.slope);

    let square: Vec<Vec<f64>> =
        (0..200).flat_map(|i| (0..200).map(move |j| vec![(i as f64 + 0.5) / 200.0, (j as f64 + 0.5) / 200.0])).collect();
    let fit = box_dimension(&square, &dyadic_scales(1, 6)).unwrap();
    assert!((fit.slope - 2.0).abs() <= 0.1, "{}", fit.slope);

    let mut cantor = vec![(0.0f64, 1.0f64)];
    for _ in 0..10 {
        cantor = cantor.iter().flat_map(|&(a, w)| [(a, w / 3.0), (a + 2.0 * w / 3.0, w / 3.0)]).collect();
    }
    let points: Vec<Vec<f64>> = cantor.iter().map(|&(a, w)| vec![a + w / 2.0]).collect();
    let scales: Vec<f64> = (1..=7).map(|j| 3f64.powi(-j)).collect();
    let fit = box_dimension(&points, &scales).unwrap();
    assert!((fit.slope - 2f64.ln() / 3f64.ln()).abs() <= 0.1, "{}", fit.slope);

    assert!(box_dimension(&segment, &dyadic_scales(1, 4)).is_err());
    assert!(box_dimension(&segment, &[0.5, 0.25]).is_err());
}

#[test]
fn escape_estimates_are_probabilities() {
    for m in [1i64, 2, 4] {
        let r = estimate_escape(m, 8, 4, 500, 3).unwrap();
        assert!((0.0..=1.0).contains(&r.estimate));
    }
    assert_eq!(estimate_escape(8, 8, 4, 50, 3).unwrap().estimate, 1.0);
    assert_eq!(estimate_escape(12, 8, 4, 50, 3).unwrap().estimate, 1.0);
    assert!(estimate_escape(2, 8, 5, 50, 3).is_err());
    let curve = escape_curve(&[1, 2, 4, 8], 8, 4, 300, 9).unwrap();
    assert!(curve.windows(2).all(|w| w[0].report.estimate <= w[1].report.estimate));
}

#[test]
fn cut_points() {
    let straight = walk(3, &[0; 9]);
    assert_eq!(cut_point_count(&straight).unwrap(), (9, 0));
    let mut rng = stream(4, 0);
    let cfg = WalkConfig::new(3, 10, 0).unwrap();
    for _ in 0..200 {
        let p = sample_lerw(&cfg, &mut rng).unwrap();
        assert_eq!(cut_point_count(&p).unwrap(), (p.len() - 1, 0));
    }
}
