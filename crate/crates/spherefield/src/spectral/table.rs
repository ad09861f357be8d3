//! Dense evaluation of the covariance function via a precomputed table.
//!
//! Summing the Legendre series per covariance call is too slow for matrix
//! assembly, where one run needs millions of evaluations. The table samples
//! a fixed-degree partial sum at knots that are uniform in `ln theta` and
//! interpolates with a monotonicity-preserving cubic (Fritsch-Carlson).
//!
//! Truncating the series at degree U changes the kernel: the table stores
//! the band `l <= U`, and the discarded tail mass is carried separately as
//! `white_mass`, to be added on the diagonal only. The split keeps the
//! interpolated kernel positive semi-definite in exact arithmetic (a partial
//! Schoenberg sum is itself a valid covariance) and preserves the total
//! variance exactly: `at_zero = band_mass + white_mass`.

use crate::error::{Error, Result};
use crate::spectral::legendre::{weighted_sum_lanes, weighted_sum_slice, LANES};
use crate::spectral::AngularPowerSpectrum;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smallest tabulated angle; below it the covariance is flat to well past
/// double precision for any admissible degree cap.
pub const THETA_FLOOR: f64 = 1e-8;

/// Knot count and truncation degree for a covariance table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TableConfig {
    #[serde(default = "default_knots")]
    pub knots: usize,
    #[serde(default = "default_degree")]
    pub degree: u32,
}

fn default_knots() -> usize {
    1 << 16
}
fn default_degree() -> u32 {
    400_000
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            knots: default_knots(),
            degree: default_degree(),
        }
    }
}

/// Tabulated partial-sum covariance on `[THETA_FLOOR, pi]`.
#[derive(Debug, Clone)]
pub struct CovarianceTable {
    ln_min: f64,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    degree_lo: u32,
    degree_hi: u32,
    band_mass: f64,
    white_mass: f64,
}

impl CovarianceTable {
    /// Table for the full spectrum truncated at `config.degree`; the
    /// remaining tail mass becomes `white_mass`.
    pub fn build_full(spec: &AngularPowerSpectrum, config: &TableConfig) -> Result<Self> {
        let sigma = spec.sigma_slice(config.degree);
        let white = spec.mass_tail(config.degree + 1);
        Self::build(&sigma, 0, config.degree, config.knots, white)
    }

    /// Table for the band `lmin ..= lmax` alone, with no white remainder.
    pub fn build_band(
        spec: &AngularPowerSpectrum,
        lmin: u32,
        lmax: u32,
        knots: usize,
    ) -> Result<Self> {
        if lmin > lmax {
            return Err(Error::param("lmin", format!("band start {lmin} exceeds band end {lmax}")));
        }
        let mut sigma = spec.sigma_slice(lmax);
        for s in sigma.iter_mut().take(lmin as usize) {
            *s = 0.0;
        }
        Self::build(&sigma, lmin, lmax, knots, 0.0)
    }

    fn build(
        sigma: &[f64],
        degree_lo: u32,
        degree_hi: u32,
        knots: usize,
        white_mass: f64,
    ) -> Result<Self> {
        if knots < 8 {
            return Err(Error::param("knots", format!("need at least 8 knots, got {knots}")));
        }
        if knots > 1 << 22 {
            return Err(Error::param("knots", format!("{knots} knots is beyond reason")));
        }
        let band_mass: f64 = sigma.iter().sum();
        let ln_min = THETA_FLOOR.ln();
        let step = (PI.ln() - ln_min) / (knots - 1) as f64;
        let mut xs = vec![0.0; knots];
        for (i, x) in xs.iter_mut().enumerate() {
            let theta = if i == knots - 1 {
                PI
            } else {
                (ln_min + step * i as f64).exp()
            };
            *x = theta.cos().clamp(-1.0, 1.0);
        }
        let mut values = vec![0.0; knots];
        let mut chunks = xs.chunks_exact(LANES);
        let mut offset = 0;
        for chunk in &mut chunks {
            let lane: [f64; LANES] = chunk.try_into().expect("chunk size");
            let out = weighted_sum_lanes(&lane, sigma);
            values[offset..offset + LANES].copy_from_slice(&out);
            offset += LANES;
        }
        for (k, &x) in chunks.remainder().iter().enumerate() {
            values[offset + k] = weighted_sum_slice(x, sigma);
        }
        let derivs = pchip_derivatives(&values);
        Ok(CovarianceTable {
            ln_min,
            step,
            values,
            derivs,
            degree_lo,
            degree_hi,
            band_mass,
            white_mass,
        })
    }

    /// Covariance at zero separation: band mass plus the white remainder.
    pub fn at_zero(&self) -> f64 {
        self.band_mass + self.white_mass
    }

    /// Mass of the tabulated band alone.
    pub fn band_mass(&self) -> f64 {
        self.band_mass
    }

    /// Spectral mass beyond the truncation degree, to be applied on the
    /// diagonal only.
    pub fn white_mass(&self) -> f64 {
        self.white_mass
    }

    pub fn degrees(&self) -> (u32, u32) {
        (self.degree_lo, self.degree_hi)
    }

    pub fn knot_count(&self) -> usize {
        self.values.len()
    }

    /// Interpolated band covariance at geodesic angle `theta`, clamped to
    /// the tabulated range `[1e-8, pi]`.
    ///
    /// Note the value at `theta = 0` is the band mass, not `at_zero()`;
    /// diagonal entries must go through `at_zero` so the white remainder is
    /// counted.
    pub fn eval(&self, theta: f64) -> f64 {
        let theta = theta.clamp(THETA_FLOOR, PI);
        let u = (theta.ln() - self.ln_min) / self.step;
        let n = self.values.len();
        let i = (u.floor() as usize).min(n - 2);
        let s = (u - i as f64).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivs[i], self.derivs[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        y0 * h00 + d0 * h10 + y1 * h01 + d1 * h11
    }
}

/// Fritsch-Carlson shape-preserving derivatives for uniformly spaced data,
/// in units of the knot spacing's abscissa.
fn pchip_derivatives(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut slopes = vec![0.0; n - 1];
    for (i, s) in slopes.iter_mut().enumerate() {
        *s = values[i + 1] - values[i];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (slopes[i - 1], slopes[i]);
        d[i] = if a * b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 };
    }
    d[0] = endpoint_derivative(slopes[0], slopes[1]);
    d[n - 1] = endpoint_derivative(slopes[n - 2], slopes[n - 3]);
    // slopes and derivatives are per knot interval, matching the unit-s
    // Hermite basis used by eval
    d
}

fn endpoint_derivative(nearest: f64, next: f64) -> f64 {
    let mut d = (3.0 * nearest - next) / 2.0;
    if d * nearest <= 0.0 {
        d = 0.0;
    } else if nearest * next <= 0.0 && d.abs() > 3.0 * nearest.abs() {
        d = 3.0 * nearest;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::tail::covariance_tail_bound;
    use crate::spectral::{covariance, legendre, TruncationPolicy};
    use approx::assert_relative_eq;

    fn test_spec() -> AngularPowerSpectrum {
        AngularPowerSpectrum::power_law(3.0).unwrap()
    }

    #[test]
    fn preserves_total_variance_split() {
        let spec = test_spec();
        let cfg = TableConfig {
            knots: 256,
            degree: 5_000,
        };
        let table = CovarianceTable::build_full(&spec, &cfg).unwrap();
        assert_relative_eq!(table.at_zero(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            table.band_mass() + table.white_mass(),
            spec.total_mass(),
            epsilon = 1e-12
        );
        assert!(table.white_mass() > 0.0);
    }

    #[test]
    fn matches_certified_covariance() {
        let spec = test_spec();
        let cfg = TableConfig {
            knots: 8192,
            degree: 20_000,
        };
        let table = CovarianceTable::build_full(&spec, &cfg).unwrap();
        // reference route: certified truncation at a tighter tolerance
        let policy = TruncationPolicy::absolute(1e-7);
        let mut theta = 1.2e-4;
        while theta < PI {
            let reference = covariance(&spec, theta, &policy).unwrap();
            let table_value = table.eval(theta);
            // the table's own truncation error is certified by the same
            // bound that drives the adaptive route
            let slack = 2.0 * covariance_tail_bound(&spec, theta, cfg.degree) + 2e-7;
            assert!(
                (table_value - reference).abs() <= slack,
                "theta={theta}: table={table_value} reference={reference} slack={slack}"
            );
            theta *= 1.37;
        }
    }

    #[test]
    fn matches_partial_sum_in_flat_region() {
        // below theta ~ 1/degree the partial sum is smooth and slowly
        // varying; the interpolant must reproduce it almost exactly
        let spec = test_spec();
        let cfg = TableConfig {
            knots: 8192,
            degree: 20_000,
        };
        let table = CovarianceTable::build_full(&spec, &cfg).unwrap();
        let sigma = spec.sigma_slice(cfg.degree);
        let mut theta = THETA_FLOOR;
        while theta < 1e-4 {
            let direct = legendre::weighted_sum_slice(theta.cos(), &sigma);
            assert!(
                (table.eval(theta) - direct).abs() < 5e-8,
                "theta={theta}"
            );
            theta *= 2.7;
        }
    }

    #[test]
    fn eval_clamps_out_of_range_angles() {
        let spec = test_spec();
        let cfg = TableConfig {
            knots: 128,
            degree: 500,
        };
        let table = CovarianceTable::build_full(&spec, &cfg).unwrap();
        assert_eq!(table.eval(0.0), table.eval(THETA_FLOOR / 2.0));
        assert_eq!(table.eval(0.0), table.eval(THETA_FLOOR));
        assert_eq!(table.eval(PI), table.eval(PI + 0.0));
        // near zero the band covariance approaches the band mass
        assert_relative_eq!(table.eval(0.0), table.band_mass(), epsilon = 1e-9);
    }

    #[test]
    fn band_table_has_no_white_mass() {
        let spec = test_spec();
        let table = CovarianceTable::build_band(&spec, 50, 200, 2048).unwrap();
        assert_eq!(table.white_mass(), 0.0);
        assert_relative_eq!(table.at_zero(), spec.band_mass(50, 200), epsilon = 1e-12);
        assert_eq!(table.degrees(), (50, 200));
        // a band covariance is bounded by its mass
        let mut theta = 1e-6;
        while theta < PI {
            assert!(table.eval(theta).abs() <= table.band_mass() + 1e-9);
            theta *= 1.9;
        }
        // termwise oracle at one angle
        let theta = 0.21f64;
        let p = legendre::legendre_batch(theta.cos(), 200).unwrap();
        let direct: f64 = (50..=200).map(|l| spec.sigma(l) * p[l as usize]).sum();
        assert!((table.eval(theta) - direct).abs() < 1e-9);
    }

    #[test]
    fn full_band_split_is_additive() {
        let spec = test_spec();
        let low = CovarianceTable::build_band(&spec, 0, 80, 2048).unwrap();
        let high = CovarianceTable::build_band(&spec, 81, 400, 2048).unwrap();
        let all = CovarianceTable::build_band(&spec, 0, 400, 2048).unwrap();
        // knot values are linear in the coefficients, hence exactly additive
        let step = (PI.ln() - THETA_FLOOR.ln()) / 2047.0;
        for i in [0usize, 511, 1024, 2047] {
            let theta = (THETA_FLOOR.ln() + step * i as f64).exp().min(PI);
            assert_relative_eq!(
                low.eval(theta) + high.eval(theta),
                all.eval(theta),
                epsilon = 1e-13
            );
        }
        // between knots the shape-preserving tangents are not linear in the
        // data, so additivity only holds to interpolation accuracy; where
        // the l = 400 oscillation is resolved by the knots it is near-exact,
        // beyond that the aliased fine structure dominates
        for theta in [1e-3, 0.02, 0.15] {
            assert_relative_eq!(
                low.eval(theta) + high.eval(theta),
                all.eval(theta),
                epsilon = 1e-8
            );
        }
        for theta in [0.4, 1.3, 3.0] {
            assert_relative_eq!(
                low.eval(theta) + high.eval(theta),
                all.eval(theta),
                epsilon = 2e-6
            );
        }
    }

    #[test]
    fn interpolant_tracks_small_angle_decay() {
        // the covariance must decrease from theta = 1e-6 through 1e-2
        let spec = test_spec();
        let cfg = TableConfig {
            knots: 4096,
            degree: 20_000,
        };
        let table = CovarianceTable::build_full(&spec, &cfg).unwrap();
        let mut prev = table.eval(1e-6);
        let mut theta = 2e-6;
        while theta < 1e-2 {
            let v = table.eval(theta);
            assert!(v < prev + 1e-12, "not decreasing at theta={theta}");
            prev = v;
            theta *= 1.5;
        }
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let spec = test_spec();
        let cfg = TableConfig {
            knots: 4,
            degree: 100,
        };
        assert!(CovarianceTable::build_full(&spec, &cfg).is_err());
        assert!(CovarianceTable::build_band(&spec, 10, 5, 128).is_err());
    }
}
