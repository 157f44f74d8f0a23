use loopforge::rng::{par_blocks, stream};
use loopforge::soup::{
    duration_mean, loop_mass, loop_masses, sample_brownian_bridge, sample_brownian_soup, sample_duration,
    tail_mass_bound, BlConstants, BrownianSoupConfig, RwSoupSampler, SmallLoopPolicy,
};
use loopforge::stats::{chi_square_gof, ks_two_sample, mean_and_std_err};

/// Per-sample counts of length-2 loops at the origin, split by label
/// `<= lambda / 4`, and the six shape counts of those loops.
fn origin_counts(samples: u64, seed: u64) -> (Vec<f64>, Vec<f64>, [u64; 6]) {
    let roots: Vec<i32> = (-1..=1).flat_map(|a| (-1..=1).flat_map(move |b| (-1..=1).flat_map(move |c| [a, b, c]))).collect();
    let blocks = par_blocks(seed, samples, |rng, _, count| {
        let mut sampler = RwSoupSampler::new(3, roots.clone(), 1.0, 8).unwrap();
        let mut all = Vec::new();
        let mut thin = Vec::new();
        let mut shapes = [0u64; 6];
        for _ in 0..count {
            let (mut k, mut j) = (0u64, 0u64);
            sampler.for_each_loop(rng, |n, label, sites| {
                if n == 1 && sites[..3] == [0, 0, 0] {
                    k += 1;
                    j += u64::from(label <= 0.25);
                    let x = &sites[3..6];
                    let axis = (0..3).find(|&a| x[a] != 0).unwrap();
                    shapes[2 * axis + usize::from(x[axis] < 0)] += 1;
                }
            });
            all.push(k as f64);
            thin.push(j as f64);
        }
        (all, thin, shapes)
    });
    let mut all = Vec::new();
    let mut thin = Vec::new();
    let mut shapes = [0u64; 6];
    for (a, t, s) in blocks {
        all.extend(a);
        thin.extend(t);
        for (x, y) in shapes.iter_mut().zip(s) {
            *x += y;
        }
    }
    (all, thin, shapes)
}

#[test]
fn fixed_root_counts_are_poisson_with_uniform_shapes() {
    let samples = 1_000_000u64;
    let (all, thin, shapes) = origin_counts(samples, 1);
    let mu = 1.0 / 12.0;
    let (m, se) = mean_and_std_err(&all);
    assert!((m - mu).abs() < 3.0 * (mu / samples as f64).sqrt(), "mean {m} +- {se}");
    let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let var_se = ((mu + 2.0 * mu * mu) / samples as f64).sqrt();
    assert!((var - mu).abs() < 4.0 * var_se, "variance {var}");
    let (mt, _) = mean_and_std_err(&thin);
    assert!((mt - mu / 4.0).abs() < 3.0 * (mu / 4.0 / samples as f64).sqrt(), "thinned mean {mt}");
    assert!(chi_square_gof(&shapes, &[1.0 / 6.0; 6]).unwrap().p_value > 1e-3);
}

#[test]
fn masses_and_tail() {
    assert!((loop_mass(3, 1).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    assert!((loop_mass(2, 1).unwrap() - 1.0 / 8.0).abs() < 1e-15);
    for dim in [2, 3] {
        let m = loop_masses(dim, 64).unwrap();
        assert!(m.windows(2).all(|w| w[1] < w[0]));
        let b = tail_mass_bound(dim, 64).unwrap();
        assert!(b.is_finite() && b > 0.0);
    }
}

#[test]
fn duration_mean_matches_closed_form() {
    for (dim, n) in [(3usize, 1usize), (3, 7), (2, 1), (2, 5)] {
        let blocks = par_blocks(10 + n as u64, 1_000_000, |rng, _, count| {
            (0..count).map(|_| sample_duration(dim, n, rng).unwrap()).collect::<Vec<f64>>()
        });
        let xs: Vec<f64> = blocks.concat();
        let (m, se) = mean_and_std_err(&xs);
        assert!((m - duration_mean(dim, n)).abs() < 3.0 * se, "d={dim} n={n}: {m} vs {}", duration_mean(dim, n));
    }
}

#[test]
fn bridge_midpoint_variance_is_a_quarter_of_the_duration() {
    let t = 2.5;
    let blocks = par_blocks(20, 1_000_000, |rng, _, count| {
        (0..count).map(|_| sample_brownian_bridge(1, t, 1, rng).unwrap()[1]).collect::<Vec<f64>>()
    });
    let xs: Vec<f64> = blocks.concat();
    let n = xs.len() as f64;
    let var = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let se = t / 4.0 * (2.0 / n).sqrt();
    assert!((var - t / 4.0).abs() < 3.0 * se, "{var}");
}

#[test]
fn refinement_keeps_coarse_marginals() {
    let mut rng = stream(21, 0);
    let coarse: Vec<f64> = (0..20_000).map(|_| sample_brownian_bridge(2, 1.0, 2, &mut rng).unwrap()[2]).collect();
    // Point 1/4 of the 2^5 grid is index 8; coordinate 0 sits at 2 * 8.
    let fine: Vec<f64> = (0..20_000).map(|_| sample_brownian_bridge(2, 1.0, 5, &mut rng).unwrap()[16]).collect();
    let (_, p) = ks_two_sample(&coarse, &fine).unwrap();
    assert!(p > 1e-3, "{p}");
}

#[test]
fn brownian_cell_counts_match_intensity() {
    let cfg = BrownianSoupConfig { dim: 3, box_radius: 1, lambda: 1.0, max_half_length: 4, levels: 1, small_loops: SmallLoopPolicy::Omit };
    let samples = 200_000u64;
    let blocks = par_blocks(30, samples, |rng, _, count| {
        let mut k = 0u64;
        for _ in 0..count {
            for l in sample_brownian_soup(&cfg, rng).unwrap() {
                let (a, b) = loopforge::soup::duration_window(3, l.generation);
                assert!(l.duration >= a && l.duration <= b);
                k += u64::from(l.generation == 1 && l.cell == [0, 0, 0]);
            }
        }
        k
    });
    let q1 = BlConstants::new(3, 1).unwrap().q[0];
    let m = blocks.iter().sum::<u64>() as f64 / samples as f64;
    assert!((m - q1).abs() < 3.0 * (q1 / samples as f64).sqrt(), "{m} vs {q1}");
    let empty = BrownianSoupConfig { lambda: 0.0, ..cfg };
    assert!(sample_brownian_soup(&empty, &mut stream(31, 0)).unwrap().is_empty());
}

#[test]
fn intensity_gap_is_of_high_order() {
    let c = BlConstants::new(3, 64).unwrap();
    let implied: Vec<f64> = (4..=64).map(|n| c.gap(n) * (n as f64).powf(1.5 + 3.0)).collect();
    let hi = implied.iter().copied().fold(0.0, f64::max);
    let lo = implied.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(lo > 0.0 && hi / lo <= 10.0, "{lo} .. {hi}");
}
