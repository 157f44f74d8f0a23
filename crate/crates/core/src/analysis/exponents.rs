//! The growth exponent `beta` and escape probabilities `Es(m, n)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{norm2, BoundaryConvention, Domain, LoopEraser, SiteMap};
use crate::rng::{derive_seed, par_blocks, stream};
use crate::stats::{binomial_std_err, fingerprint, ols, EstimatorReport, ExponentFit, FitPoint};
use crate::walks::{lerw_into, walk_until};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Step counts of `samples` loop-erased walks from the origin to the exit of
/// `B(0, n)`, in sample order.
pub fn lerw_lengths(dim: usize, n: i64, samples: u64, seed: u64, convention: BoundaryConvention) -> Result<Vec<u64>> {
    let dom = Domain::new(dim, n, convention)?;
    let blocks = par_blocks(seed, samples, |rng, _, count| -> Result<Vec<u64>> {
        let mut eraser = LoopEraser::new(dim);
        (0..count)
            .map(|_| {
                lerw_into(&dom, &mut eraser, rng)?;
                Ok(eraser.len() as u64 - 1)
            })
            .collect()
    });
    let mut out = Vec::with_capacity(samples as usize);
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

fn mean(values: &[u64]) -> f64 {
    values.iter().sum::<u64>() as f64 / values.len() as f64
}

/// Least-squares slope of `log E[len]` against `log n`, with a bootstrap
/// standard error from resampling the lengths at every `n`.
pub fn estimate_beta(
    dim: usize,
    n_list: &[i64],
    samples_per_n: u64,
    seed: u64,
    convention: BoundaryConvention,
) -> Result<ExponentFit> {
    if n_list.len() < 3 || n_list[0] < 1 || !n_list.windows(2).all(|w| w[0] < w[1]) {
        return domain("n_list needs at least three increasing radii >= 1");
    }
    if samples_per_n < 2 {
        return domain("need at least two samples per radius");
    }
    let lengths = n_list
        .iter()
        .map(|&n| lerw_lengths(dim, n, samples_per_n, derive_seed(seed, n as u64), convention))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = lengths.iter().map(|l| mean(l).ln()).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return domain("a mean length is zero; radii are too small");
    }
    let mut fit = ExponentFit::from_points(&xs, &ys)?;
    fit.stderr = bootstrap_slope_se(&xs, &lengths, &mut stream(derive_seed(seed, u64::MAX), 0))?;
    Ok(fit)
}

fn bootstrap_slope_se<R: Rng + ?Sized>(xs: &[f64], lengths: &[Vec<u64>], rng: &mut R) -> Result<f64> {
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut ys = vec![0.0; xs.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for (y, l) in ys.iter_mut().zip(lengths) {
            let total: u64 = (0..l.len()).map(|_| l[rng.random_range(0..l.len())]).sum();
            *y = (total.max(1) as f64 / l.len() as f64).ln();
        }
        slopes.push(ols(xs, &ys)?.0);
    }
    let m = slopes.iter().sum::<f64>() / slopes.len() as f64;
    Ok((slopes.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt())
}

/// One Es sample: the first LERW index outside `B(0, n)`, the largest index
/// of the LERW up to it that the second walk hits after time 0, and the
/// squared norms of the LERW sites up to it.
struct EscapeSample {
    hit: Option<usize>,
    norms: Vec<i64>,
}

impl EscapeSample {
    /// `s_m`: last index before `t_n` inside `B(0, m)`.
    fn s_m(&self, m: i64) -> usize {
        let t_n = self.norms.len() - 1;
        (0..t_n).rev().find(|&k| self.norms[k] <= m * m).unwrap_or(0)
    }

    fn escapes(&self, m: i64) -> bool {
        self.hit.is_none_or(|h| h < self.s_m(m))
    }
}

fn escape_sample<R: Rng + ?Sized>(n: i64, k: i64, eraser: &mut LoopEraser, rng: &mut R) -> Result<EscapeSample> {
    let far = Domain::new(3, k * n, BoundaryConvention::Closed)?;
    lerw_into(&far, eraser, rng)?;
    let n2 = n * n;
    let mut norms = Vec::new();
    let mut index = SiteMap::new(3);
    for i in 0..eraser.len() {
        let x = eraser.site(i);
        norms.push(norm2(x));
        index.insert(x, i);
        if norm2(x) > n2 {
            break;
        }
    }
    if norms.last().is_none_or(|&v| v <= n2) {
        return Err(Error::Internal("loop erasure never left B(0, n)".into()));
    }
    let mut hit: Option<usize> = None;
    let mut first = true;
    walk_until(&[0, 0, 0], rng, |x| {
        if !first {
            if let Some(&i) = index.get(x) {
                hit = Some(hit.map_or(i, |h| h.max(i)));
            }
        }
        first = false;
        norm2(x) <= n2
    })?;
    Ok(EscapeSample { hit, norms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapePoint {
    pub m: i64,
    pub report: EstimatorReport,
}

fn check_escape(n: i64, k: i64) -> Result<()> {
    if n < 1 {
        return domain("radius must be at least 1");
    }
    if ![4, 8, 16].contains(&k) {
        return domain(format!("truncation factor K = {k} must be 4, 8 or 16"));
    }
    Ok(())
}

/// `Es(m, n)` for every `m` in `ms` on shared samples.
///
/// The infinite walk `R^1` is replaced by a walk to the exit of
/// `B(0, K n)`. Each sample erases its loops, finds `t_n` (first exit of the
/// erasure from the closed ball `B(0, n)`) and `s_m` (last visit to
/// `B(0, m)` before `t_n`), and runs an independent `R^2` from the origin to
/// the exit of `B(0, n)`; the sample escapes when `R^2[1, T^2]` misses the
/// erasure between `s_m` and `t_n`. `Es(m, n) = 1` for `m >= n`.
pub fn escape_curve(ms: &[i64], n: i64, k: i64, samples: u64, seed: u64) -> Result<Vec<EscapePoint>> {
    check_escape(n, k)?;
    if ms.iter().any(|&m| m < 0) {
        return domain("inner radius m must be nonnegative");
    }
    let blocks = par_blocks(seed, samples, |rng, _, count| -> Result<Vec<u64>> {
        let mut eraser = LoopEraser::new(3);
        let mut wins = vec![0u64; ms.len()];
        for _ in 0..count {
            let s = escape_sample(n, k, &mut eraser, rng)?;
            for (w, &m) in wins.iter_mut().zip(ms) {
                if m < n && s.escapes(m) {
                    *w += 1;
                }
            }
        }
        Ok(wins)
    });
    let mut wins = vec![0u64; ms.len()];
    for b in blocks {
        for (w, x) in wins.iter_mut().zip(b?) {
            *w += x;
        }
    }
    Ok(ms
        .iter()
        .zip(wins)
        .map(|(&m, w)| {
            let config = format!("escape d=3 m={m} n={n} K={k} samples={samples} seed={seed}");
            let report = if m >= n {
                EstimatorReport { estimate: 1.0, std_err: 0.0, samples, fingerprint: fingerprint(&config) }
            } else {
                let p = if samples == 0 { 0.0 } else { w as f64 / samples as f64 };
                EstimatorReport {
                    estimate: p,
                    std_err: binomial_std_err(p, samples),
                    samples,
                    fingerprint: fingerprint(&config),
                }
            };
            EscapePoint { m, report }
        })
        .collect())
}

/// Monte Carlo estimate of `Es(m, n)` in `Z^3`; see [`escape_curve`].
pub fn estimate_escape(m: i64, n: i64, k: i64, samples: u64, seed: u64) -> Result<EstimatorReport> {
    Ok(escape_curve(&[m], n, k, samples, seed)?.remove(0).report)
}

/// Slope of `log Es(m, n)` against `log(m / n)` over points with `m < n`
/// and a positive estimate; the standard error is the regression one.
pub fn escape_exponent(points: &[EscapePoint], n: i64) -> Result<ExponentFit> {
    let used: Vec<&EscapePoint> = points.iter().filter(|p| p.m >= 1 && p.m < n && p.report.estimate > 0.0).collect();
    let xs: Vec<f64> = used.iter().map(|p| (p.m as f64 / n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.report.estimate.ln()).collect();
    let mut fit = ExponentFit::from_points(&xs, &ys)?;
    // Delta-method weights, reported only.
    for (pt, p) in fit.points.iter_mut().zip(&used) {
        let rel = p.report.std_err / p.report.estimate;
        *pt = FitPoint { weight: if rel > 0.0 { rel.powi(-2) } else { 1.0 }, ..*pt };
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_lerw_is_a_segment() {
        let fit = estimate_beta(1, &[4, 8, 16, 32], 50, 0, BoundaryConvention::Open).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        for (p, n) in fit.points.iter().zip([4.0f64, 8.0, 16.0, 32.0]) {
            assert!((p.log_y - n.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_radii_are_rejected() {
        assert!(estimate_beta(3, &[4, 8], 10, 0, BoundaryConvention::Closed).is_err());
        assert!(estimate_beta(3, &[4, 8, 8], 10, 0, BoundaryConvention::Closed).is_err());
    }

    #[test]
    fn escape_basics() {
        let pts = escape_curve(&[1, 2, 4, 8, 9], 8, 4, 400, 5).unwrap();
        assert_eq!(pts[3].report.estimate, 1.0);
        assert_eq!(pts[4].report.estimate, 1.0);
        for w in pts[..3].windows(2) {
            // Shared samples: a larger m means a shorter segment, so escape
            // is pathwise monotone.
            assert!(w[0].report.estimate <= w[1].report.estimate);
        }
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.report.estimate)));
        assert!(estimate_escape(2, 8, 5, 10, 0).is_err());
    }
}
