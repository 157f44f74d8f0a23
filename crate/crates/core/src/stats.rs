//! Estimator reports, log-log fits and the goodness-of-fit tests used by the
//! verification harnesses.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Result};

/// A Monte Carlo point estimate with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub std_err: f64,
    pub samples: u64,
    /// Hex digest of the canonical configuration string.
    pub fingerprint: String,
}

impl EstimatorReport {
    /// Bernoulli frequency `hits / samples` with binomial standard error.
    pub fn binomial(hits: u64, samples: u64, config: &str) -> Self {
        let p = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        EstimatorReport {
            estimate: p,
            std_err: binomial_std_err(p, samples),
            samples,
            fingerprint: fingerprint(config),
        }
    }

    /// Sample mean with the standard error of the mean.
    pub fn mean(values: &[f64], config: &str) -> Self {
        let (m, se) = mean_and_std_err(values);
        EstimatorReport { estimate: m, std_err: se, samples: values.len() as u64, fingerprint: fingerprint(config) }
    }
}

pub fn binomial_std_err(p: f64, samples: u64) -> f64 {
    if samples == 0 {
        0.0
    } else {
        (p * (1.0 - p) / samples as f64).max(0.0).sqrt()
    }
}

pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn fingerprint(config: &str) -> String {
    let digest = Sha256::digest(config.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One point of a log-log regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub log_x: f64,
    pub log_y: f64,
    pub weight: f64,
}

/// Least-squares slope of `log y` against `log x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: Vec<FitPoint>,
}

/// Unweighted ordinary least squares; returns `(slope, intercept, slope_se)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return domain("least squares needs at least two paired points");
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("abscissae are all equal");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, intercept, se))
}

impl ExponentFit {
    /// Fit with the regression standard error of the slope.
    pub fn from_points(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() < 3 {
            return domain("an exponent fit needs at least three points");
        }
        let (slope, intercept, stderr) = ols(xs, ys)?;
        let points = xs.iter().zip(ys).map(|(&log_x, &log_y)| FitPoint { log_x, log_y, weight: 1.0 }).collect();
        Ok(ExponentFit { slope, intercept, stderr, points })
    }
}

/// Pearson chi-square statistic and upper-tail p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square_upper_tail(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0)
}

/// Goodness of fit of observed counts against expected probabilities.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return domain("chi-square needs matching category vectors of length >= 2");
    }
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            return Ok(ChiSquareTest { statistic: f64::INFINITY, dof: cells, p_value: 0.0 });
        }
    }
    let dof = cells.saturating_sub(1);
    Ok(ChiSquareTest { statistic: stat, dof, p_value: chi_square_upper_tail(stat, dof) })
}

/// Two-sample chi-square homogeneity test over shared categories.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return domain("category vectors differ in length");
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return domain("both samples must be nonempty");
    }
    let (na, nb) = (na as f64, nb as f64);
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    Ok(ChiSquareTest { statistic: stat, dof, p_value: chi_square_upper_tail(stat, dof) })
}

/// Kolmogorov limiting distribution `Q(l) = 2 sum (-1)^(k-1) exp(-2 k^2 l^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test; returns `(D, p_value)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return domain("KS test needs nonempty samples");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok((d, p))
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return domain("KS test needs a nonempty sample");
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let en = n.sqrt();
    Ok((d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)))
}

/// Poisson draw that accepts a zero mean.
#[inline]
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Poisson probability mass function on `0..len`, computed by recursion in
/// log space so that large means do not underflow at `k = 0`.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    if mean <= 0.0 {
        let mut v = vec![0.0; len.max(1)];
        v[0] = 1.0;
        v.truncate(len.max(1));
        return v;
    }
    let ln_mean = mean.ln();
    let mut out = Vec::with_capacity(len);
    let mut log_p = -mean;
    for k in 0..len {
        if k > 0 {
            log_p += ln_mean - (k as f64).ln();
        }
        out.push(log_p.exp());
    }
    out
}

/// Support length beyond which both Poisson laws have negligible mass.
pub fn poisson_support(mean: f64) -> usize {
    (mean + 14.0 * mean.sqrt() + 40.0).ceil() as usize
}

/// Total-variation distance between `Poisson(a)` and `Poisson(b)`.
pub fn poisson_tv(a: f64, b: f64) -> f64 {
    let len = poisson_support(a.max(b));
    let pa = poisson_pmf(a, len);
    let pb = poisson_pmf(b, len);
    0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn ols_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (s, i, se) = ols(&xs, &ys).unwrap();
        assert!((s - 2.5).abs() < 1e-12 && (i + 1.0).abs() < 1e-12 && se < 1e-12);
        assert!(ExponentFit::from_points(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn chi_square_detects_and_accepts() {
        let probs = [0.25; 4];
        assert!(chi_square_gof(&[250, 250, 250, 250], &probs).unwrap().p_value > 0.99);
        assert!(chi_square_gof(&[400, 200, 200, 200], &probs).unwrap().p_value < 1e-6);
        let same = chi_square_two_sample(&[100, 200, 300], &[200, 400, 600]).unwrap();
        assert!(same.p_value > 0.99);
    }

    #[test]
    fn ks_separates_shifted_samples() {
        let mut rng = stream(3, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &b).unwrap().1 > 1e-3);
        assert!(ks_two_sample(&a, &c).unwrap().1 < 1e-6);
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).unwrap().1 > 1e-3);
    }

    #[test]
    fn poisson_tv_limits() {
        assert!(poisson_tv(0.7, 0.7) < 1e-15);
        assert!((poisson_tv(0.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        let pmf = poisson_pmf(800.0, poisson_support(800.0));
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn binomial_report() {
        let r = EstimatorReport::binomial(25, 100, "x");
        assert_eq!(r.estimate, 0.25);
        assert!((r.std_err - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(r.fingerprint.len(), 16);
    }
}
