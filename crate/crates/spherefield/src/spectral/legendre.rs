//! Legendre polynomials and weighted partial sums of Legendre series.
//!
//! Everything here is built on the three-term recurrence
//! `(l+1) P_{l+1}(x) = (2l+1) x P_l(x) - l P_{l-1}(x)`, which is forward
//! stable on [-1, 1] (the Legendre polynomials are the dominant solution).
//! Series summation is provided in streaming form so that degrees in the
//! millions never materialize a coefficient-times-value array, and in an
//! 8-lane batched form used when tabulating the covariance on many angles.

use crate::error::{Error, Result};

/// Number of angles processed together by [`weighted_sum_lanes`].
pub const LANES: usize = 8;

fn check_x(x: f64) -> Result<()> {
    if !x.is_finite() || x.abs() > 1.0 {
        return Err(Error::param("x", format!("Legendre argument must lie in [-1, 1], got {x}")));
    }
    Ok(())
}

/// All values P_0(x) ... P_lmax(x).
pub fn legendre_batch(x: f64, lmax: u32) -> Result<Vec<f64>> {
    check_x(x)?;
    let mut out = Vec::with_capacity(lmax as usize + 1);
    out.push(1.0);
    if lmax == 0 {
        return Ok(out);
    }
    out.push(x);
    let mut pm1 = 1.0;
    let mut p = x;
    for l in 2..=lmax {
        let lf = f64::from(l);
        let next = ((2.0 * lf - 1.0) * x * p - (lf - 1.0) * pm1) / lf;
        pm1 = p;
        p = next;
        out.push(p);
    }
    Ok(out)
}

/// P_l(x) without allocating the whole sequence.
pub fn legendre_value(x: f64, l: u32) -> Result<f64> {
    check_x(x)?;
    match l {
        0 => Ok(1.0),
        1 => Ok(x),
        _ => {
            let mut pm1 = 1.0;
            let mut p = x;
            for k in 2..=l {
                let kf = f64::from(k);
                let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * pm1) / kf;
                pm1 = p;
                p = next;
            }
            Ok(p)
        }
    }
}

/// Streaming evaluation of `sum_{l=0}^{lmax} sigma(l) P_l(x)`.
///
/// The coefficient callback is invoked once per degree in increasing order.
pub fn weighted_sum_fn(x: f64, lmax: u32, mut sigma: impl FnMut(u32) -> f64) -> f64 {
    let mut acc = sigma(0);
    if lmax == 0 {
        return acc;
    }
    acc += sigma(1) * x;
    let mut pm1 = 1.0;
    let mut p = x;
    for l in 2..=lmax {
        let lf = f64::from(l);
        let next = ((2.0 * lf - 1.0) * x * p - (lf - 1.0) * pm1) / lf;
        pm1 = p;
        p = next;
        acc += sigma(l) * p;
    }
    acc
}

/// `sum_l sigma[l] P_l(x)` with precomputed coefficients.
pub fn weighted_sum_slice(x: f64, sigma: &[f64]) -> f64 {
    if sigma.is_empty() {
        return 0.0;
    }
    weighted_sum_fn(x, sigma.len() as u32 - 1, |l| sigma[l as usize])
}

/// Eight weighted sums at once, sharing one pass over the coefficients.
///
/// This is the covariance-table kernel: the recurrence coefficients are
/// computed once per degree and reused across all lanes, and the lane arrays
/// stay in registers.
pub fn weighted_sum_lanes(xs: &[f64; LANES], sigma: &[f64]) -> [f64; LANES] {
    let mut acc = [0.0; LANES];
    if sigma.is_empty() {
        return acc;
    }
    let s0 = sigma[0];
    for a in &mut acc {
        *a = s0;
    }
    if sigma.len() == 1 {
        return acc;
    }
    let mut pm1 = [1.0; LANES];
    let mut p = *xs;
    let s1 = sigma[1];
    for k in 0..LANES {
        acc[k] += s1 * p[k];
    }
    for (l, &s) in sigma.iter().enumerate().skip(2) {
        let lf = l as f64;
        let a = (2.0 * lf - 1.0) / lf;
        let b = (lf - 1.0) / lf;
        for k in 0..LANES {
            let next = a * xs[k] * p[k] - b * pm1[k];
            pm1[k] = p[k];
            p[k] = next;
            acc[k] += s * next;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matches_closed_forms_at_low_degree() {
        // P_2 = (3x^2 - 1)/2, P_3 = (5x^3 - 3x)/2,
        // P_7 = (429x^7 - 693x^5 + 315x^3 - 35x)/16
        for &x in &[-0.9, -0.4, 0.0, 0.31, 0.5, 1.0] {
            let p = legendre_batch(x, 7).unwrap();
            assert_relative_eq!(p[2], (3.0 * x * x - 1.0) / 2.0, epsilon = 1e-14);
            assert_relative_eq!(p[3], (5.0 * x.powi(3) - 3.0 * x) / 2.0, epsilon = 1e-14);
            let p7 = (429.0 * x.powi(7) - 693.0 * x.powi(5) + 315.0 * x.powi(3) - 35.0 * x) / 16.0;
            assert_relative_eq!(p[7], p7, epsilon = 1e-13);
            assert_relative_eq!(legendre_value(x, 7).unwrap(), p7, epsilon = 1e-13);
        }
    }

    #[test]
    fn endpoint_normalization_and_parity() {
        let at_one = legendre_batch(1.0, 200).unwrap();
        assert!(at_one.iter().all(|&v| v == 1.0));
        let at_minus_one = legendre_batch(-1.0, 201).unwrap();
        for (l, &v) in at_minus_one.iter().enumerate() {
            let expected = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(v, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn high_degree_reference_values() {
        // reference values from a 50-digit recurrence evaluation
        assert_relative_eq!(
            legendre_value(0.3, 50).unwrap(),
            0.10911051574714798,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            legendre_value(0.9, 200).unwrap(),
            -0.009267485840765235,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            legendre_value(0.99, 10).unwrap(),
            0.5200890424821924,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bounded_on_interval() {
        for i in 0..50 {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / 50.0;
            let p = legendre_batch(x, 500).unwrap();
            assert!(p.iter().all(|v| v.abs() <= 1.0 + 1e-12), "x={x}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(legendre_batch(1.0 + 1e-9, 3).is_err());
        assert!(legendre_value(f64::NAN, 3).is_err());
    }

    #[test]
    fn streaming_sum_matches_dot_product() {
        let sigma: Vec<f64> = (0..400).map(|l| 1.0 / f64::from(l + 1).powi(2)).collect();
        for &x in &[-0.7, 0.02, 0.6, 0.999] {
            let p = legendre_batch(x, 399).unwrap();
            let direct: f64 = p.iter().zip(&sigma).map(|(a, b)| a * b).sum();
            let streamed = weighted_sum_slice(x, &sigma);
            assert_relative_eq!(streamed, direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn lanes_agree_with_scalar_path() {
        let sigma: Vec<f64> = (0..1000).map(|l| (-(f64::from(l))).exp() + 1e-4).collect();
        let xs = [-0.95, -0.5, -0.1, 0.0, 0.2, 0.55, 0.9, 0.999_999];
        let lanes = weighted_sum_lanes(&xs, &sigma);
        for (k, &x) in xs.iter().enumerate() {
            assert_relative_eq!(lanes[k], weighted_sum_slice(x, &sigma), epsilon = 1e-12);
        }
    }
}
