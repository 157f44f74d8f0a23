use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use loopforge::analysis::{
    box_dimension, cut_point_stats, dyadic_scales, escape_curve, escape_exponent, estimate_beta, hittability_scan,
    lerw_box_dimension, quasi_loop_curve, quasi_loop_query, scan_quasi_loops, HittabilityConfig,
};
use loopforge::coupling::{couple_soups, BridgeCoupler, SoupCouplingConfig};
use loopforge::decompose::verify_decomposition;
use loopforge::io::{read_paths, write_continuous_loop, write_discrete_loop, write_path};
use loopforge::rng::{derive_seed, par_blocks};
use loopforge::soup::{
    default_max_half_length, sample_brownian_soup, sample_rw_soup, BrownianSoupConfig, RwSoupConfig, SmallLoopPolicy,
};
use loopforge::walks::{lclt_leading, return_probabilities, sample_lerw, WalkConfig};
use loopforge::{BoundaryConvention, Domain, Error, LatticePath, Result};

use crate::output::{site_string, Csv};
use crate::{row, Command, Common};

fn domain<T>(msg: String) -> Result<T> {
    Err(Error::Domain(msg))
}

fn int_radius(c: &Common) -> Result<i64> {
    if c.radius.fract() != 0.0 || c.radius < 1.0 || c.radius > i32::MAX as f64 {
        return domain(format!("--radius {} must be a positive integer here", c.radius));
    }
    Ok(c.radius as i64)
}

fn require_d3(c: &Common) -> Result<()> {
    if c.dim != 3 {
        return domain(format!("this command is defined in Z^3, got --dim {}", c.dim));
    }
    Ok(())
}

fn jsonl(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn collect<T>(blocks: Vec<Result<Vec<T>>>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::SampleLerw { common } => sample_lerw_cmd(common),
        Command::SampleSoup { common, max_half_length } => sample_soup_cmd(common, *max_half_length),
        Command::SampleBrownianSoup { common, max_half_length, levels, min_duration } => {
            sample_brownian_cmd(common, *max_half_length, *levels, *min_duration)
        }
        Command::VerifyDecomposition { common } => verify_cmd(common),
        Command::CoupleSoups { common, scale, levels, max_half_length } => {
            couple_soups_cmd(common, *scale, *levels, *max_half_length)
        }
        Command::CoupleBridge { common, steps, levels } => couple_bridge_cmd(common, steps, *levels),
        Command::EstimateBeta { common, radii } => beta_cmd(common, radii),
        Command::EstimateEscape { common, ms, k } => escape_cmd(common, ms, *k),
        Command::ScanQuasiloops { common, epsilons, exponent, input } => {
            quasi_cmd(common, epsilons, *exponent, input.as_deref())
        }
        Command::Hittability { common, inner_samples, max_points } => {
            hittability_cmd(common, *inner_samples, *max_points)
        }
        Command::BoxDimension { common, scale_from, scale_to, input } => {
            box_cmd(common, *scale_from, *scale_to, input.as_deref())
        }
        Command::CutPoints { common } => cuts_cmd(common),
        Command::LcltCheck { common, max_n } => lclt_cmd(common, *max_n),
    }
}

fn sample_lerw_cmd(c: &Common) -> Result<()> {
    let cfg = WalkConfig::new(c.dim, int_radius(c)?, c.seed)?.with_convention(c.convention.into());
    let paths = collect(par_blocks(c.seed, c.samples, |rng, _, count| {
        (0..count).map(|_| sample_lerw(&cfg, rng)).collect::<Result<Vec<_>>>()
    }))?;
    let mut w = jsonl(&c.out)?;
    for p in &paths {
        write_path(&mut w, p)?;
    }
    w.flush()?;
    Ok(())
}

/// Realisations are written one after another in sample order.
fn sample_soup_cmd(c: &Common, max_half_length: Option<usize>) -> Result<()> {
    let n = int_radius(c)?;
    let convention: BoundaryConvention = c.convention.into();
    let dom = Domain::new(c.dim, n, convention)?;
    let max_half_length = match max_half_length {
        Some(m) => m,
        None => {
            let roots = (2 * dom.reach() as usize + 1).pow(c.dim as u32);
            default_max_half_length(c.dim, roots, c.lambda, 0.01)?
        }
    };
    let cfg = RwSoupConfig { dim: c.dim, domain_radius: n, lambda: c.lambda, max_half_length, seed: c.seed, convention };
    let soups = collect(par_blocks(c.seed, c.samples, |rng, _, count| {
        (0..count).map(|_| sample_rw_soup(&cfg, rng)).collect::<Result<Vec<_>>>()
    }))?;
    let mut w = jsonl(&c.out)?;
    for s in &soups {
        for l in &s.loops {
            write_discrete_loop(&mut w, l)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sample_brownian_cmd(c: &Common, max_half_length: usize, levels: u32, min_duration: Option<f64>) -> Result<()> {
    let small_loops = match min_duration {
        Some(m) => SmallLoopPolicy::Include { min_duration: m },
        None => SmallLoopPolicy::Omit,
    };
    let cfg =
        BrownianSoupConfig { dim: c.dim, box_radius: int_radius(c)?, lambda: c.lambda, max_half_length, levels, small_loops };
    let soups = collect(par_blocks(c.seed, c.samples, |rng, _, count| {
        (0..count).map(|_| sample_brownian_soup(&cfg, rng)).collect::<Result<Vec<_>>>()
    }))?;
    let mut w = jsonl(&c.out)?;
    for l in soups.iter().flatten() {
        write_continuous_loop(&mut w, l)?;
    }
    w.flush()?;
    Ok(())
}

fn verify_cmd(c: &Common) -> Result<()> {
    let r = verify_decomposition(c.dim, int_radius(c)?, c.convention.into(), c.samples, c.seed)?;
    let mut csv = Csv::create(&c.out, &["dim", "radius", "convention", "site", "estimate", "exact", "stderr", "z", "samples"])?;
    for s in &r.rows {
        csv.row(&row![r.dim, r.radius, r.convention, site_string(&s.site), s.mc_estimate, s.exact, s.std_err, s.z, r.samples])?;
    }
    csv.finish()
}

fn couple_soups_cmd(c: &Common, scale: usize, levels: u32, max_half_length: Option<usize>) -> Result<()> {
    let cfg = SoupCouplingConfig {
        dim: c.dim,
        box_radius: c.radius,
        lambda: c.lambda,
        scale,
        theta: c.theta,
        levels,
        max_half_length,
    };
    let reports = collect(par_blocks(c.seed, c.samples, |rng, _, count| {
        (0..count).map(|_| couple_soups(&cfg, rng).map(|s| s.report)).collect::<Result<Vec<_>>>()
    }))?;
    let mut csv = Csv::create(
        &c.out,
        &[
            "sample",
            "pairs",
            "unmatched_discrete",
            "unmatched_brownian",
            "disagreeing_cells",
            "expected_disagreements",
            "fitted_constant",
            "envelope",
            "success",
            "max_half_length",
            "omitted_mass_bound",
            "grid_resolution",
        ],
    )?;
    for (i, r) in reports.iter().enumerate() {
        let fitted = r.fitted_constant.map(|x| x.to_string()).unwrap_or_default();
        csv.row(&row![
            i,
            r.pairs.len(),
            r.unmatched_discrete.len(),
            r.unmatched_brownian.len(),
            r.disagreeing_cells,
            r.expected_disagreements,
            fitted,
            r.envelope,
            r.success,
            r.max_half_length,
            r.omitted_mass_bound,
            r.grid_resolution
        ])?;
    }
    csv.finish()
}

fn couple_bridge_cmd(c: &Common, steps: &[usize], levels: u32) -> Result<()> {
    let mut csv = Csv::create(&c.out, &["dim", "m", "levels", "sample", "sup_distance", "resolution"])?;
    for &m in steps {
        let pairs = collect(par_blocks(derive_seed(c.seed, m as u64), c.samples, |rng, _, count| {
            let mut coupler = BridgeCoupler::new(c.dim);
            (0..count).map(|_| coupler.couple(m, levels, rng).map(|p| (p.sup_distance, p.resolution))).collect::<Result<Vec<_>>>()
        }))?;
        for (i, (sup, res)) in pairs.iter().enumerate() {
            csv.row(&row![c.dim, m, levels, i, sup, res])?;
        }
    }
    csv.finish()
}

fn beta_cmd(c: &Common, radii: &[i64]) -> Result<()> {
    let fit = estimate_beta(c.dim, radii, c.samples, c.seed, c.convention.into())?;
    let mut csv = Csv::create(
        &c.out,
        &["row", "dim", "convention", "n", "log_n", "log_mean_length", "slope", "stderr", "samples_per_n"],
    )?;
    for (n, p) in radii.iter().zip(&fit.points) {
        csv.row(&row!["point", c.dim, BoundaryConvention::from(c.convention), n, p.log_x, p.log_y, "", "", c.samples])?;
    }
    csv.row(&row!["fit", c.dim, BoundaryConvention::from(c.convention), "", "", "", fit.slope, fit.stderr, c.samples])?;
    csv.finish()
}

fn escape_cmd(c: &Common, ms: &[i64], k: i64) -> Result<()> {
    require_d3(c)?;
    let n = int_radius(c)?;
    let points = escape_curve(ms, n, k, c.samples, c.seed)?;
    let mut csv = Csv::create(&c.out, &["row", "m", "n", "k", "estimate", "stderr", "samples"])?;
    for p in &points {
        csv.row(&row!["point", p.m, n, k, p.report.estimate, p.report.std_err, p.report.samples])?;
    }
    if let Ok(fit) = escape_exponent(&points, n) {
        csv.row(&row!["slope", "", n, k, fit.slope, fit.stderr, c.samples])?;
    }
    csv.finish()
}

fn quasi_cmd(c: &Common, epsilons: &[f64], exponent: u32, input: Option<&Path>) -> Result<()> {
    let n = int_radius(c)?;
    let eps: Vec<f64> = if epsilons.is_empty() { vec![c.epsilon] } else { epsilons.to_vec() };
    if let Some(input) = input {
        let paths = read_paths(BufReader::new(File::open(input)?))?;
        let mut csv = Csv::create(&c.out, &["path", "epsilon", "s", "r", "centers"])?;
        for (i, p) in paths.iter().enumerate() {
            for &e in &eps {
                let q = quasi_loop_query(n, e, exponent)?;
                csv.row(&row![i, e, q.s, q.r, scan_quasi_loops(p, q).len()])?;
            }
        }
        return csv.finish();
    }
    require_d3(c)?;
    let curve = quasi_loop_curve(n, &eps, exponent, c.samples, c.seed)?;
    let mut csv =
        Csv::create(&c.out, &["epsilon", "n", "exponent", "s", "r", "sub_lattice", "estimate", "stderr", "samples"])?;
    for p in &curve {
        csv.row(&row![p.eps, n, exponent, p.query.s, p.query.r, p.sub_lattice, p.report.estimate, p.report.std_err, p.report.samples])?;
    }
    csv.finish()
}

fn hittability_cmd(c: &Common, inner_samples: u64, max_points: usize) -> Result<()> {
    require_d3(c)?;
    let mut cfg = HittabilityConfig::new(int_radius(c)?, c.epsilon, c.eta, c.samples, inner_samples, c.seed);
    cfg.max_points = max_points;
    let r = hittability_scan(&cfg)?;
    let mean_max = r.max_escape.iter().sum::<f64>() / r.max_escape.len().max(1) as f64;
    let mean_points = r.tested_points.iter().sum::<usize>() as f64 / r.tested_points.len().max(1) as f64;
    let mut csv = Csv::create(
        &c.out,
        &["n", "epsilon", "eta", "threshold", "failing_fraction", "stderr", "samples", "mean_max_escape", "mean_tested_points"],
    )?;
    csv.row(&row![
        cfg.n,
        cfg.eps,
        cfg.eta,
        cfg.threshold(),
        r.failing.estimate,
        r.failing.std_err,
        r.failing.samples,
        mean_max,
        mean_points
    ])?;
    csv.finish()
}

fn path_points(p: &LatticePath, scale: f64) -> Vec<Vec<f64>> {
    p.iter().map(|x| x.iter().map(|&v| v as f64 / scale).collect()).collect()
}

fn box_cmd(c: &Common, from: i32, to: i32, input: Option<&Path>) -> Result<()> {
    let n = int_radius(c)?;
    let scales = dyadic_scales(from, to);
    let mut csv = Csv::create(&c.out, &["row", "sample", "dimension", "stderr", "samples"])?;
    if let Some(input) = input {
        let paths = read_paths(BufReader::new(File::open(input)?))?;
        for (i, p) in paths.iter().enumerate() {
            let fit = box_dimension(&path_points(p, n as f64), &scales)?;
            csv.row(&row!["path", i, fit.slope, fit.stderr, 1])?;
        }
        return csv.finish();
    }
    let r = lerw_box_dimension(c.dim, n, c.samples, &scales, c.seed)?;
    for (i, fit) in r.fits.iter().enumerate() {
        csv.row(&row!["sample", i, fit.slope, fit.stderr, 1])?;
    }
    csv.row(&row!["mean", "", r.mean.estimate, r.mean.std_err, r.mean.samples])?;
    csv.finish()
}

fn cuts_cmd(c: &Common) -> Result<()> {
    let n = int_radius(c)?;
    let r = cut_point_stats(c.dim, n, c.samples, c.seed)?;
    let mut csv = Csv::create(&c.out, &["dim", "n", "mean_cut_points", "stderr", "samples", "violations", "xi_low", "xi_high"])?;
    csv.row(&row![c.dim, n, r.mean.estimate, r.mean.std_err, r.mean.samples, r.violations, r.xi_interval.0, r.xi_interval.1])?;
    csv.finish()
}

fn lclt_cmd(c: &Common, max_n: usize) -> Result<()> {
    let p = return_probabilities(c.dim, max_n)?;
    let mut csv = Csv::create(&c.out, &["dim", "n", "p2n", "leading", "ratio", "expansion", "error", "bound", "within"])?;
    for (i, &p2n) in p.iter().enumerate() {
        let n = i + 1;
        let leading = lclt_leading(c.dim, n);
        let ratio = p2n / leading;
        let expansion = 1.0 - c.dim as f64 / (8.0 * n as f64);
        let error = (ratio - expansion).abs();
        let bound = 5.0 / (n * n) as f64;
        csv.row(&row![c.dim, n, p2n, leading, ratio, expansion, error, bound, error <= bound])?;
    }
    csv.finish()
}
