//! Small statistical helpers for the attack reports.

use rand::Rng;
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Two-sided exact binomial test: total probability of outcomes no more
/// likely than `k` under `Binomial(n, p)`.
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> Result<f64> {
    if k > n || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("binomial test with k={k}, n={n}, p={p}")));
    }
    let dist = Binomial::new(p, n).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let observed = dist.pmf(k);
    let cutoff = observed * (1.0 + 1e-7);
    let total: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&q| q <= cutoff).sum();
    Ok(total.min(1.0))
}

/// Kolmogorov-Smirnov distance between the sample and `U(0, 1)`.
pub fn ks_statistic_uniform(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// Asymptotic p-value of a KS distance `d` on `n` samples, with the usual
/// small-sample correction of the Kolmogorov argument.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64).powi(2) * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Bootstrap mean and standard deviation of the sample mean.
pub fn bootstrap_ci(values: &[f64], resamples: usize, seed: Seed) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if resamples == 0 {
        return Err(Error::InvalidCount("resamples must be positive".into()));
    }
    let mut rng = seed.stream();
    let n = values.len();
    // work relative to the first value so constant inputs stay exactly constant
    let origin = values[0];
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)] - origin).sum::<f64>() / n as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / resamples as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / resamples as f64;
    Ok((origin + mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_oracle(k: u64, n: u64, p: f64) -> f64 {
        // pmf by the multiplicative recurrence, independent of statrs
        let mut pmf = vec![(1.0 - p).powi(n as i32)];
        for i in 1..=n {
            let prev = pmf[i as usize - 1];
            pmf.push(prev * (n - i + 1) as f64 / i as f64 * p / (1.0 - p));
        }
        let obs = pmf[k as usize];
        pmf.iter().filter(|&&q| q <= obs * (1.0 + 1e-7)).sum()
    }

    #[test]
    fn binomial_matches_recurrence() {
        for (k, n) in [(100, 500), (80, 500), (130, 500), (3, 10), (0, 20)] {
            let got = binomial_two_sided(k, n, 0.2).unwrap();
            assert!((got - binom_oracle(k, n, 0.2)).abs() < 1e-9, "{k}/{n}");
        }
        assert!(binomial_two_sided(100, 500, 0.2).unwrap() > 0.9);
        assert!(binomial_two_sided(150, 500, 0.2).unwrap() < 1e-6);
        assert!((binomial_two_sided(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(binomial_two_sided(11, 10, 0.5).is_err());
    }

    #[test]
    fn ks_examples() {
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic_uniform(&grid).unwrap() - 0.005).abs() < 1e-12);
        assert_eq!(ks_statistic_uniform(&[0.0; 10]).unwrap(), 1.0);
        assert!(ks_statistic_uniform(&[]).is_err());
        assert!(ks_p_value(0.005, 100) > 0.99);
        assert!(ks_p_value(1.0, 10) < 1e-6);
        // tabulated 5% critical value is about 1.358 / sqrt(n)
        let p = ks_p_value(1.358 / (1000f64).sqrt(), 1000);
        assert!((p - 0.05).abs() < 0.005, "{p}");
    }

    #[test]
    fn bootstrap_examples() {
        let (m, sd) = bootstrap_ci(&[0.3; 20], 1000, Seed(0)).unwrap();
        assert_eq!((m, sd), (0.3, 0.0));
        let (m, sd) = bootstrap_ci(&[0.7], 1000, Seed(0)).unwrap();
        assert_eq!((m, sd), (0.7, 0.0));
        let mut rng = Seed(1).stream();
        let coin: Vec<f64> = (0..1000).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let (_, sd) = bootstrap_ci(&coin, 1000, Seed(2)).unwrap();
        assert!((0.01..=0.02).contains(&sd), "{sd}");
        assert!(matches!(bootstrap_ci(&[], 10, Seed(0)), Err(Error::EmptyInput)));
    }
}
