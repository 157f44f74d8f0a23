use std::collections::HashMap;

use loopforge::coupling::{couple_bridge, couple_bridge_1d, couple_poisson, couple_soups, SoupCouplingConfig, TimedPath};
use loopforge::rng::{par_blocks, stream};
use loopforge::soup::BlConstants;
use loopforge::stats::{chi_square_gof, ks_one_sample, mean_and_std_err, poisson_tv};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn poisson_coupling_disagrees_at_the_tv_rate() {
    for (a, b) in [(0.3, 0.31), (0.01, 0.02), (1.0, 1.5), (5.0, 7.0), (0.0, 1.0)] {
        let draws = 1_000_000u64;
        let blocks = par_blocks(1, draws, |rng, _, count| {
            let (mut dis, mut sa, mut sb) = (0u64, 0u64, 0u64);
            for _ in 0..count {
                let c = couple_poisson(a, b, rng).unwrap();
                assert_eq!(c.agreed, c.n_discrete == c.n_brownian);
                dis += u64::from(!c.agreed);
                sa += c.n_discrete;
                sb += c.n_brownian;
            }
            (dis, sa, sb)
        });
        let (dis, sa, sb) = blocks.iter().fold((0, 0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2));
        let n = draws as f64;
        let tv = poisson_tv(a, b);
        let freq = dis as f64 / n;
        assert!((freq - tv).abs() <= 4.0 * (tv * (1.0 - tv) / n).sqrt() + 1e-12, "({a}, {b}): {freq} vs {tv}");
        assert!((sa as f64 / n - a).abs() <= 4.0 * (a / n).sqrt() + 1e-12);
        assert!((sb as f64 / n - b).abs() <= 4.0 * (b / n).sqrt() + 1e-12);
    }
}

#[test]
fn zero_against_one() {
    let mut rng = stream(2, 0);
    let n = 100_000;
    let mut dis = 0u64;
    for _ in 0..n {
        let c = couple_poisson(0.0, 1.0, &mut rng).unwrap();
        assert_eq!(c.n_discrete, 0);
        dis += u64::from(!c.agreed);
    }
    let p = 1.0 - (-1.0f64).exp();
    assert!((dis as f64 / n as f64 - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
}

fn value_at(path: &TimedPath, t: f64) -> &[f64] {
    let i = path.times.iter().position(|&s| (s - t).abs() < 1e-15).expect("grid time");
    path.value(i)
}

fn normal_cdf(var: f64) -> impl Fn(f64) -> f64 {
    let n = Normal::new(0.0, var.sqrt()).unwrap();
    move |x| n.cdf(x)
}

#[test]
fn one_dimensional_marginals_are_exact() {
    let mut rng = stream(3, 0);
    let draws = 100_000;
    let mut signs = [0u64; 2];
    let mut mids = Vec::with_capacity(draws);
    for _ in 0..draws {
        let p = couple_bridge_1d(2, 1, &mut rng).unwrap();
        signs[usize::from(p.discrete.site(1)[0] > 0)] += 1;
        mids.push(value_at(&p.continuous, 0.5)[0]);
        assert!(p.sup_distance >= 0.0 && p.sup_distance.is_finite());
    }
    assert!(chi_square_gof(&signs, &[0.5, 0.5]).unwrap().p_value > 1e-3);
    assert!(ks_one_sample(&mids, normal_cdf(0.25)).unwrap().1 > 1e-3);

    let arrangements: Vec<Vec<i32>> =
        vec![vec![0, 1, 2, 1, 0], vec![0, 1, 0, 1, 0], vec![0, 1, 0, -1, 0], vec![0, -1, 0, 1, 0], vec![0, -1, 0, -1, 0], vec![0, -1, -2, -1, 0]];
    let mut counts = [0u64; 6];
    let mut at: [Vec<f64>; 3] = Default::default();
    for _ in 0..draws {
        let p = couple_bridge_1d(4, 2, &mut rng).unwrap();
        counts[arrangements.iter().position(|a| a[..] == *p.discrete.flat()).unwrap()] += 1;
        for (k, v) in at.iter_mut().enumerate() {
            v.push(value_at(&p.continuous, (k + 1) as f64 / 4.0)[0]);
        }
    }
    assert!(chi_square_gof(&counts, &[1.0 / 6.0; 6]).unwrap().p_value > 1e-3);
    for (k, v) in at.iter().enumerate() {
        let t = (k + 1) as f64 / 4.0;
        assert!(ks_one_sample(v, normal_cdf(t * (1.0 - t))).unwrap().1 > 1e-3, "t = {t}");
    }
    assert!(couple_bridge_1d(3, 2, &mut rng).is_err());
}

#[test]
fn multidimensional_discrete_side_is_the_bridge_law() {
    for (dim, m) in [(3usize, 2usize), (2, 4)] {
        let mut rng = stream(4, dim as u64);
        let mut counts: HashMap<Vec<i32>, u64> = HashMap::new();
        let draws = 200_000;
        for _ in 0..draws {
            let p = couple_bridge(dim, m, 3, &mut rng).unwrap();
            assert!(p.scaled_discrete.value(0).iter().chain(p.scaled_discrete.value(m)).all(|&x| x == 0.0));
            let last = p.continuous.len() - 1;
            assert!(p.continuous.value(0).iter().chain(p.continuous.value(last)).all(|&x| x == 0.0));
            *counts.entry(p.discrete.flat().to_vec()).or_default() += 1;
        }
        let expected = if dim == 3 { 6 } else { 36 };
        assert_eq!(counts.len(), expected);
        let obs: Vec<u64> = counts.values().copied().collect();
        assert!(chi_square_gof(&obs, &vec![1.0 / expected as f64; expected]).unwrap().p_value > 1e-3);
    }
}

#[test]
fn soup_coupling_disagreements_and_marginals() {
    let cfg = SoupCouplingConfig { dim: 3, box_radius: 1.0, lambda: 1.0, scale: 2, theta: 1.2, levels: 4, max_half_length: Some(32) };
    let runs = 4000u64;
    let blocks = par_blocks(5, runs, |rng, _, count| {
        (0..count)
            .map(|_| {
                let out = couple_soups(&cfg, rng).unwrap();
                let walk1 = out.discrete.iter().filter(|l| l.half_length() == 1 && l.root() == [0, 0, 0]).count();
                let bm1 = out.continuous.iter().filter(|l| l.generation == 1 && l.cell == [0, 0, 0]).count();
                (out.report.disagreeing_cells as f64, out.report.expected_disagreements, walk1 as f64, bm1 as f64)
            })
            .collect::<Vec<_>>()
    });
    let rows: Vec<_> = blocks.concat();
    let expected = rows[0].1;
    let dis: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (m, _) = mean_and_std_err(&dis);
    assert!(expected > 0.0);
    assert!((m - expected).abs() <= 3.0 * (expected / runs as f64).sqrt(), "{m} vs {expected}");
    let c = BlConstants::new(3, 1).unwrap();
    let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (mw, _) = mean_and_std_err(&w);
    let (mb, _) = mean_and_std_err(&b);
    assert!((mw - c.q_tilde[0]).abs() <= 4.0 * (c.q_tilde[0] / runs as f64).sqrt());
    assert!((mb - c.q[0]).abs() <= 4.0 * (c.q[0] / runs as f64).sqrt());
}
