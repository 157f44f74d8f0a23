//! On-diagonal return probabilities and the law of coordinate allocations of
//! random walk bridges.
//!
//! A closed walk of length `2n` in `Z^d` that makes `2 k_i` steps along axis
//! `i` can be arranged in `(2n)! / prod (k_i!)^2` ways, so
//!
//! ```text
//! p_2n(0,0) = (2n)! / (2d)^(2n) * W_d(n),    W_j(s) = sum_{k_1+..+k_j = s} prod 1/(k_i!)^2,
//! ```
//!
//! and the half-counts `k` of a uniform bridge have law `prod 1/(k_i!)^2 / W_d(n)`.
//! `W_j` is built by convolution in log space; `W_1` and `W_2` are closed form.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::rng::open01;

/// Largest half-length accepted by [`return_probability`].
pub const MAX_HALF_LENGTH: usize = 1_000_000;

#[inline]
pub fn ln_factorial(k: usize) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Cached `ln W_j(s)` tables for one dimension.
#[derive(Clone, Debug)]
pub struct AllocationLaw {
    dim: usize,
    ln_fact: Vec<f64>,
    /// `tables[j]` holds `ln W_j(s)` for `j >= 3`; lower levels are closed form.
    tables: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl AllocationLaw {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        AllocationLaw { dim, ln_fact: vec![0.0], tables: vec![Vec::new(); dim + 1], weights: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn ensure_factorials(&mut self, k: usize) {
        while self.ln_fact.len() <= k {
            let next = self.ln_fact.len();
            self.ln_fact.push(ln_factorial(next));
        }
    }

    /// Makes `ln W_j(s)` available for all `j <= dim`, `s <= n`.
    pub fn ensure(&mut self, n: usize) {
        self.ensure_factorials(2 * n);
        for j in 3..=self.dim {
            let have = self.tables[j].len();
            for s in have..=n {
                let v = {
                    let this = &*self;
                    log_sum_exp((0..=s).map(|t| -2.0 * this.ln_fact[t] + this.ln_w(j - 1, s - t)))
                };
                self.tables[j].push(v);
            }
        }
    }

    /// `ln W_j(s)`; requires a prior `ensure(s)`.
    #[inline]
    pub fn ln_w(&self, j: usize, s: usize) -> f64 {
        match j {
            0 => {
                if s == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            1 => -2.0 * self.ln_fact[s],
            2 => self.ln_fact[2 * s] - 4.0 * self.ln_fact[s],
            _ => self.tables[j][s],
        }
    }

    /// `ln p_2n(0,0)`.
    pub fn ln_return_probability(&mut self, n: usize) -> f64 {
        self.ensure(n);
        self.ln_fact[2 * n] - (2 * n) as f64 * ((2 * self.dim) as f64).ln() + self.ln_w(self.dim, n)
    }

    /// Draws half-counts `(k_1, .., k_d)` summing to `n` from the bridge law.
    pub fn sample_half_counts<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R, out: &mut Vec<usize>) {
        self.ensure(n);
        out.clear();
        let mut remaining = n;
        for i in 0..self.dim - 1 {
            let left = self.dim - i;
            self.weights.clear();
            let mut max = f64::NEG_INFINITY;
            for t in 0..=remaining {
                let w = -2.0 * self.ln_fact[t] + self.ln_w(left - 1, remaining - t);
                max = max.max(w);
                self.weights.push(w);
            }
            let mut total = 0.0;
            for w in self.weights.iter_mut() {
                *w = (*w - max).exp();
                total += *w;
            }
            let target = open01(rng) * total;
            let mut acc = 0.0;
            let mut pick = remaining;
            for (t, w) in self.weights.iter().enumerate() {
                acc += w;
                if acc >= target {
                    pick = t;
                    break;
                }
            }
            out.push(pick);
            remaining -= pick;
        }
        out.push(remaining);
    }
}

/// Exact `p_2n(0,0)` for simple random walk on `Z^d`.
///
/// Relative error is at floating round-off for moderate `n` (verified against
/// exact rationals for `n <= 16`); it grows slowly with `n` through the log
/// factorials. `d <= 2` costs `O(1)`, `d = 3` costs `O(n)`, and larger `d`
/// costs `O((d - 2) n^2)`.
pub fn return_probability(dim: usize, n: usize) -> Result<f64> {
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    if n == 0 {
        return domain("return probabilities are defined for n >= 1");
    }
    if n > MAX_HALF_LENGTH {
        return domain(format!("n = {n} exceeds the supported maximum {MAX_HALF_LENGTH}"));
    }
    let mut law = AllocationLaw::new(dim);
    law.ensure_factorials(2 * n);
    let ln_p = match dim {
        1 | 2 => {
            let ln_central = law.ln_fact[2 * n] - 2.0 * law.ln_fact[n] - (2 * n) as f64 * 2f64.ln();
            dim as f64 * ln_central
        }
        3 => {
            let ln_w3 = log_sum_exp((0..=n).map(|t| law.ln_w(1, t) + law.ln_w(2, n - t)));
            law.ln_fact[2 * n] - (2 * n) as f64 * 6f64.ln() + ln_w3
        }
        _ => law.ln_return_probability(n),
    };
    Ok(ln_p.exp())
}

/// `p_2n(0,0)` for `n = 1..=n_max` (index `n - 1`).
pub fn return_probabilities(dim: usize, n_max: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return domain("dimension must be at least 1");
    }
    if n_max > MAX_HALF_LENGTH {
        return domain(format!("n = {n_max} exceeds the supported maximum {MAX_HALF_LENGTH}"));
    }
    if dim <= 3 {
        return (1..=n_max).map(|n| return_probability(dim, n)).collect();
    }
    let mut law = AllocationLaw::new(dim);
    law.ensure(n_max);
    Ok((1..=n_max).map(|n| law.ln_return_probability(n).exp()).collect())
}

/// Leading LCLT term `2 (d / (4 pi n))^(d/2)`.
pub fn lclt_leading(dim: usize, n: usize) -> f64 {
    2.0 * (dim as f64 / (4.0 * std::f64::consts::PI * n as f64)).powf(dim as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn small_values() {
        let close = |a: f64, b: f64| (a / b - 1.0).abs() < 1e-13;
        assert!(close(return_probability(3, 1).unwrap(), 1.0 / 6.0));
        assert!(close(return_probability(2, 1).unwrap(), 0.25));
        assert!(close(return_probability(3, 2).unwrap(), 5.0 / 72.0));
        assert!(close(return_probability(1, 1).unwrap(), 0.5));
    }

    #[test]
    fn general_dimension_path_matches_specialisations() {
        for dim in 1..=3 {
            let mut law = AllocationLaw::new(dim);
            for n in [1, 5, 40] {
                let direct = return_probability(dim, n).unwrap();
                let general = law.ln_return_probability(n).exp();
                assert!((direct / general - 1.0).abs() < 1e-12, "d={dim} n={n}");
            }
        }
        // d = 4, n = 1: 8 closed two-step walks out of 64.
        assert!((return_probability(4, 1).unwrap() / 0.125 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(return_probability(3, 0).is_err());
        assert!(return_probability(0, 3).is_err());
        assert!(return_probability(3, MAX_HALF_LENGTH + 1).is_err());
    }

    #[test]
    fn half_counts_sum_to_n() {
        let mut law = AllocationLaw::new(3);
        let mut rng = stream(1, 1);
        let mut k = Vec::new();
        for n in [1, 2, 7, 30] {
            for _ in 0..50 {
                law.sample_half_counts(n, &mut rng, &mut k);
                assert_eq!(k.len(), 3);
                assert_eq!(k.iter().sum::<usize>(), n);
            }
        }
    }
}
