//! Real orthonormal spherical harmonics evaluated pointwise.
//!
//! Basis functions, indexed within the degree-l block of size 2l + 1:
//!
//! - `R_{l,0}   = Pb_l^0(cos theta)`
//! - `R_{l,m,c} = sqrt(2) Pb_l^m(cos theta) cos(m phi)`
//! - `R_{l,m,s} = sqrt(2) Pb_l^m(cos theta) sin(m phi)`
//!
//! where `Pb` is the fully normalized associated Legendre function without
//! the Condon-Shortley phase. These satisfy the addition theorem
//! `sum_m R_{lm}(x) R_{lm}(y) = (2l+1)/(4 pi) P_l(cos d(x,y))`, which is
//! what makes a diagonal coefficient draw reproduce the Schoenberg
//! covariance.
//!
//! The sectoral seed `Pb_mm ~ sin^m theta` underflows long before the
//! recurrence output becomes negligible, so the three-term recurrence runs
//! on values carrying a power-of-2^512 scale exponent and unscales on
//! emission (the usual trick for high-degree geodesy synthesis).

use crate::error::{Error, Result};

/// Above this degree the f64 recurrences lose their accuracy guarantees.
pub const MAX_DEGREE: u32 = 20_000;

const SCALE_DOWN: f64 = 2.983336292480083e-154; // 2^-510
const SCALE_UP: f64 = 3.3519519824856493e153; // 2^510
const TINY: f64 = 1e-150;
const HUGE: f64 = 1e150;

#[inline]
fn emit(value: f64, shifts: i32) -> f64 {
    match shifts {
        0 => value,
        1 => value * SCALE_DOWN,
        2 => (value * SCALE_DOWN) * SCALE_DOWN,
        _ => 0.0,
    }
}

/// Number of coefficients through degree `lmax` inclusive.
pub fn coeff_len(lmax: u32) -> usize {
    let n = lmax as usize + 1;
    n * n
}

/// Index of the block of degree l (size 2l + 1) in a coefficient vector:
/// m = 0 first, then interleaved (cos, sin) pairs for m = 1..=l.
pub fn block_start(l: u32) -> usize {
    (l as usize) * (l as usize)
}

/// All basis values `R_{lm}` at one point through degree `lmax`, in block
/// layout. The returned row has `coeff_len(lmax)` entries.
pub fn basis_row(theta: f64, phi: f64, lmax: u32) -> Result<Vec<f64>> {
    if !theta.is_finite() || !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::param("theta", format!("colatitude must lie in [0, pi], got {theta}")));
    }
    if !phi.is_finite() {
        return Err(Error::param("phi", "longitude must be finite"));
    }
    if lmax > MAX_DEGREE {
        return Err(Error::param(
            "lmax",
            format!("degree {lmax} exceeds the f64 stability cap {MAX_DEGREE}"),
        ));
    }
    let mut row = vec![0.0; coeff_len(lmax)];
    let x = theta.cos();
    let s = theta.sin().max(0.0);
    let (sin_phi, cos_phi) = phi.sin_cos();
    let sqrt2 = std::f64::consts::SQRT_2;
    let inv_4pi_sqrt = 0.28209479177387814; // sqrt(1 / (4 pi))

    // sectoral seed, carried across the m loop in scaled form
    let mut pmm = inv_4pi_sqrt;
    let mut pmm_shifts = 0i32;
    // cos(m phi), sin(m phi) by rotation
    let mut cos_m = 1.0;
    let mut sin_m = 0.0;

    for m in 0..=lmax {
        if m > 0 {
            let mf = f64::from(m);
            pmm *= s * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            if pmm.abs() < TINY {
                pmm *= SCALE_UP;
                pmm_shifts += 1;
            }
            let (c, sn) = (cos_m, sin_m);
            cos_m = c * cos_phi - sn * sin_phi;
            sin_m = sn * cos_phi + c * sin_phi;
        }
        // weights applied on emission; sqrt(2) only for m > 0
        let (w_c, w_s) = if m == 0 {
            (1.0, 0.0)
        } else {
            (sqrt2 * cos_m, sqrt2 * sin_m)
        };
        let store = |row: &mut [f64], l: u32, value: f64| {
            let base = block_start(l);
            if m == 0 {
                row[base] = value;
            } else {
                let off = 2 * m as usize - 1;
                row[base + off] = value * w_c;
                row[base + off + 1] = value * w_s;
            }
        };
        store(&mut row, m, emit(pmm, pmm_shifts));
        if m == lmax {
            break;
        }

        // upward recurrence in l at fixed m, on the scaled values
        let mut shifts = pmm_shifts;
        let mut prev = pmm;
        let mf = f64::from(m);
        let mut curr = (2.0 * mf + 3.0).sqrt() * x * pmm;
        store(&mut row, m + 1, emit(curr, shifts));
        let mut a_prev = (2.0 * mf + 3.0).sqrt();
        for l in m + 2..=lmax {
            let lf = f64::from(l);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let next = a * (x * curr - prev / a_prev);
            prev = curr;
            curr = next;
            a_prev = a;
            if curr.abs() > HUGE {
                curr *= SCALE_DOWN;
                prev *= SCALE_DOWN;
                shifts -= 1;
            } else if curr.abs() < TINY && prev.abs() < TINY && shifts > 0 {
                // both members small: still climbing out of the sectoral
                // minimum (a lone small value is just a zero crossing)
                curr *= SCALE_UP;
                prev *= SCALE_UP;
                shifts += 1;
            }
            store(&mut row, l, emit(curr, shifts));
        }
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_distance, SpherePoint};
    use crate::spectral::legendre;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const INV_4PI: f64 = 1.0 / (4.0 * PI);

    fn block(row: &[f64], l: u32) -> &[f64] {
        &row[block_start(l)..block_start(l) + 2 * l as usize + 1]
    }

    #[test]
    fn zonal_column_matches_legendre() {
        let theta = 1.234;
        let lmax = 60;
        let row = basis_row(theta, 0.77, lmax).unwrap();
        let p = legendre::legendre_batch(theta.cos(), lmax).unwrap();
        for l in 0..=lmax {
            let expected = ((2.0 * f64::from(l) + 1.0) * INV_4PI).sqrt() * p[l as usize];
            assert_relative_eq!(row[block_start(l)], expected, max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn degree_one_closed_forms() {
        // the l = 1 block is sqrt(3 / 4 pi) (cos t, sin t cos p, sin t sin p)
        let (theta, phi) = (0.9, 2.3);
        let row = basis_row(theta, phi, 1).unwrap();
        let c = (3.0 * INV_4PI).sqrt();
        assert_relative_eq!(row[1], c * theta.cos(), max_relative = 1e-14);
        assert_relative_eq!(row[2], c * theta.sin() * phi.cos(), max_relative = 1e-14);
        assert_relative_eq!(row[3], c * theta.sin() * phi.sin(), max_relative = 1e-14);
        assert_relative_eq!(row[0], INV_4PI.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn addition_theorem_holds_across_degrees() {
        let x = SpherePoint::new(0.61, 5.1).unwrap();
        let y = SpherePoint::new(2.2, 1.9).unwrap();
        let d = geodesic_distance(&x, &y);
        let lmax = 300;
        let rx = basis_row(x.theta(), x.phi(), lmax).unwrap();
        let ry = basis_row(y.theta(), y.phi(), lmax).unwrap();
        for l in [0u32, 1, 2, 5, 17, 40, 123, 300] {
            let dot: f64 = block(&rx, l)
                .iter()
                .zip(block(&ry, l))
                .map(|(a, b)| a * b)
                .sum();
            let expected =
                (2.0 * f64::from(l) + 1.0) * INV_4PI * legendre::legendre_value(d.cos(), l).unwrap();
            assert_relative_eq!(dot, expected, max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    #[test]
    fn block_norms_survive_high_degree_near_pole() {
        // sin(theta)^m underflows unscaled arithmetic around m ~ 170 here;
        // the scaled recurrence must still deliver the addition-theorem
        // norm at the top degree
        let theta = 0.01;
        let lmax = 2_000;
        let row = basis_row(theta, 0.4, lmax).unwrap();
        for l in [1_999u32, 2_000] {
            let norm: f64 = block(&row, l).iter().map(|v| v * v).sum();
            let expected = (2.0 * f64::from(l) + 1.0) * INV_4PI;
            assert_relative_eq!(norm, expected, max_relative = 1e-9);
        }
        assert!(row.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn poles_keep_only_zonal_terms() {
        for theta in [0.0, PI] {
            let row = basis_row(theta, 1.0, 12).unwrap();
            for l in 0..=12u32 {
                for (k, &v) in block(&row, l).iter().enumerate() {
                    if k == 0 {
                        let p = legendre::legendre_value(theta.cos(), l).unwrap();
                        let expected = ((2.0 * f64::from(l) + 1.0) * INV_4PI).sqrt() * p;
                        assert_relative_eq!(v, expected, max_relative = 1e-13);
                    } else {
                        // sin(pi) rounds to ~1e-16 and the recurrence
                        // amplifies that seed polynomially in l, so
                        // tesseral terms are rounding-level, not exact zeros
                        assert!(v.abs() < 1e-13, "l={l} k={k} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_range_input() {
        assert!(basis_row(-0.1, 0.0, 5).is_err());
        assert!(basis_row(0.5, f64::NAN, 5).is_err());
        assert!(basis_row(0.5, 0.0, MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn block_layout_is_dense_and_contiguous() {
        assert_eq!(coeff_len(0), 1);
        assert_eq!(coeff_len(3), 16);
        assert_eq!(block_start(0), 0);
        assert_eq!(block_start(1), 1);
        assert_eq!(block_start(4), 16);
    }
}
