//! Small statistics toolbox: least-squares line fits, bootstrap standard
//! errors for ladder slopes, quantiles, and a two-sample KS distance.

use crate::error::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Centered coefficient of determination.
    pub r_squared: f64,
}

pub fn ols_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("xs", "need at least two matched samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("xs", "degenerate abscissae (zero variance)"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Least squares through the origin, `y = slope * x`, with the uncentered
/// coefficient of determination `1 - sum (y - bx)^2 / sum y^2` (the standard
/// R^2 for a no-intercept model).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OriginFit {
    pub slope: f64,
    pub r_squared_uncentered: f64,
}

pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<OriginFit> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::param("xs", "need matched non-empty samples"));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::param("xs", "degenerate abscissae"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - slope * x;
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| y * y).sum();
    let r_squared_uncentered = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(OriginFit {
        slope,
        r_squared_uncentered,
    })
}

/// Slope of `log mean(group_i)` against `xs[i]`, with a bootstrap standard
/// error from resampling each group's replicates with replacement.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LadderSlope {
    pub slope: f64,
    pub se: f64,
}

pub fn log_mean_ladder_slope(
    xs: &[f64],
    groups: &[Vec<f64>],
    resamples: usize,
    rng: &mut impl Rng,
) -> Result<LadderSlope> {
    if xs.len() != groups.len() {
        return Err(Error::param("groups", "one replicate group per abscissa"));
    }
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    if means.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::param("groups", "log slope needs positive group means"));
    }
    let logs: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let slope = ols_line(xs, &logs)?.slope;

    let mut boot = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut ok = true;
        let mut ls = Vec::with_capacity(groups.len());
        for g in groups {
            let n = g.len();
            let mut s = 0.0;
            for _ in 0..n {
                s += g[rng.random_range(0..n)];
            }
            let m = s / n as f64;
            if m > 0.0 {
                ls.push(m.ln());
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            boot.push(ols_line(xs, &ls)?.slope);
        }
    }
    let se = if boot.len() > 1 { std_dev(&boot) } else { f64::NAN };
    Ok(LadderSlope { slope, se })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
}

/// Standard error of the sample mean.
pub fn mean_se(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Quantile with linear interpolation between order statistics; `q` in [0,1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("NaN in ks input"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("NaN in ks input"));
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < sa.len() && j < sb.len() {
        // advance through ties in both samples before comparing the CDFs
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        let fa = i as f64 / sa.len() as f64;
        let fb = j as f64 / sb.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// KS acceptance threshold at significance 0.01: c(0.01) sqrt((n+m)/(n m)).
pub fn ks_threshold_1pct(n: usize, m: usize) -> f64 {
    1.628 * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let f = ols_line(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, -2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn origin_fit_exact_proportionality() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [2.5, 5.0, 10.0];
        let f = fit_through_origin(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, 2.5, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared_uncentered, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(quantile(&xs, 0.0), 1.0);
        assert_relative_eq!(quantile(&xs, 1.0), 4.0);
        assert_relative_eq!(quantile(&xs, 0.5), 2.5);
    }

    #[test]
    fn ks_same_sample_is_zero() {
        let a = [0.3, 1.2, -0.5, 2.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn ks_disjoint_samples_is_one() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0];
        assert_relative_eq!(ks_statistic(&a, &b), 1.0);
    }

    #[test]
    fn bootstrap_slope_matches_point_estimate_in_mean() {
        let xs: Vec<f64> = [0.04f64, 0.02, 0.01].iter().map(|r| r.ln()).collect();
        let groups: Vec<Vec<f64>> = [0.04f64, 0.02, 0.01]
            .iter()
            .map(|r| (0..200).map(|i| r * r * (1.0 + 0.001 * (i as f64 % 7.0))).collect())
            .collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let s = log_mean_ladder_slope(&xs, &groups, 100, &mut rng).unwrap();
        assert_relative_eq!(s.slope, 2.0, epsilon = 1e-2);
        assert!(s.se < 0.01);
    }
}
