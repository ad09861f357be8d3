//! Exact Gaussian linear algebra on finite point sets: covariance matrix
//! assembly, Cholesky sampling, conditional variances, and the strong local
//! nondeterminism (SLND) diagnostics.
//!
//! Everything here is d-agnostic: a d-component field is d independent
//! copies driven by separate random streams, so all matrices are built once
//! per point set.

use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, SpherePoint};
use crate::spectral::table::CovarianceTable;
use crate::spectral::{covariance, rho_alpha, AngularPowerSpectrum, TruncationPolicy};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// A positive semidefinite kernel on the sphere, evaluated by geodesic
/// angle. Implementations may be exact-but-fallible (certified series) or
/// tabulated-and-infallible.
pub trait CovKernel {
    /// Kernel value at zero separation (the diagonal of any covariance
    /// matrix built from this kernel).
    fn at_zero(&self) -> f64;

    /// Kernel value at geodesic angle `theta`.
    fn cov_theta(&self, theta: f64) -> Result<f64>;

    fn cov(&self, a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
        self.cov_theta(geodesic_distance(a, b))
    }
}

/// Certified-truncation kernel: every call meets the policy tolerance or
/// errors. Slow; intended for small matrices and cross-checks.
#[derive(Debug, Clone)]
pub struct DirectKernel<'a> {
    spec: &'a AngularPowerSpectrum,
    policy: TruncationPolicy,
}

impl<'a> DirectKernel<'a> {
    pub fn new(spec: &'a AngularPowerSpectrum, policy: TruncationPolicy) -> Self {
        DirectKernel { spec, policy }
    }
}

impl CovKernel for DirectKernel<'_> {
    fn at_zero(&self) -> f64 {
        self.spec.total_mass()
    }

    fn cov_theta(&self, theta: f64) -> Result<f64> {
        covariance(self.spec, theta, &self.policy)
    }
}

impl CovKernel for CovarianceTable {
    fn at_zero(&self) -> f64 {
        CovarianceTable::at_zero(self)
    }

    fn cov_theta(&self, theta: f64) -> Result<f64> {
        Ok(self.eval(theta))
    }
}

/// Kernel of the spectral remainder: a full table minus one of its bands.
/// Both tables must come from the same spectrum; the difference is then the
/// covariance of the complementary band plus the white remainder.
#[derive(Debug, Clone)]
pub struct DiffKernel<'a> {
    full: &'a CovarianceTable,
    band: &'a CovarianceTable,
}

impl<'a> DiffKernel<'a> {
    pub fn new(full: &'a CovarianceTable, band: &'a CovarianceTable) -> Result<Self> {
        let (_, full_hi) = full.degrees();
        let (_, band_hi) = band.degrees();
        if band_hi > full_hi {
            return Err(Error::param(
                "band",
                format!("band top degree {band_hi} exceeds the full table degree {full_hi}"),
            ));
        }
        Ok(DiffKernel { full, band })
    }
}

impl CovKernel for DiffKernel<'_> {
    fn at_zero(&self) -> f64 {
        self.full.at_zero() - self.band.at_zero()
    }

    fn cov_theta(&self, theta: f64) -> Result<f64> {
        Ok(self.full.eval(theta) - self.band.eval(theta))
    }
}

/// Dense covariance matrix of a kernel over a point set; diagonal entries
/// come from `at_zero`, never from `cov_theta(0)`.
pub fn build_covariance(
    kernel: &impl CovKernel,
    points: &[SpherePoint],
) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let diag = kernel.at_zero();
    for i in 0..n {
        m[(i, i)] = diag;
        for j in 0..i {
            let v = kernel.cov(&points[i], &points[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

const JITTER_LADDER: [f64; 8] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky-factored covariance matrix with the original matrix retained
/// for independent cross-checks.
///
/// When the plain factorization fails, a diagonal jitter is escalated
/// through `1e-12 .. 1e-6`; the jitter that succeeded is recorded. The
/// factor (and anything derived from it) then belongs to the jittered
/// matrix, while `matrix()` stays untouched.
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl CovarianceMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.is_empty() {
            return Err(Error::param("matrix", "need a nonempty square matrix"));
        }
        for jitter in JITTER_LADDER {
            let mut work = matrix.clone();
            if jitter > 0.0 {
                for i in 0..work.nrows() {
                    work[(i, i)] += jitter;
                }
            }
            if let Some(chol) = Cholesky::<f64, Dyn>::new(work) {
                return Ok(CovarianceMatrix {
                    matrix,
                    factor: chol.unpack(),
                    jitter,
                });
            }
        }
        Err(Error::NotPositiveDefinite { max_jitter: 1e-6 })
    }

    pub fn from_points(kernel: &impl CovKernel, points: &[SpherePoint]) -> Result<Self> {
        Self::new(build_covariance(kernel, points)?)
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// One joint draw of the field at all points.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.len();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.factor * z;
        x.as_slice().to_vec()
    }

    /// Draw into a preallocated slice of length `len()`.
    pub fn sample_into(&self, rng: &mut impl Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let n = self.len();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.factor * z;
        out.copy_from_slice(x.as_slice());
    }

    /// `Var(T(x_j) | T(x_0), ..., T(x_{j-1}))` for every j, in the order
    /// the points were given: the squared Cholesky diagonal.
    pub fn conditional_variances(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.factor[(j, j)].powi(2)).collect()
    }

    /// Conditional variance of the last point given all the others.
    pub fn conditional_variance_last(&self) -> f64 {
        let j = self.len() - 1;
        self.factor[(j, j)].powi(2)
    }

    /// Determinant as the product of conditional variances. Underflows for
    /// large matrices; use `log_determinant` beyond a few dozen points.
    pub fn determinant(&self) -> f64 {
        (0..self.len()).map(|j| self.factor[(j, j)].powi(2)).product()
    }

    pub fn log_determinant(&self) -> f64 {
        (0..self.len()).map(|j| 2.0 * self.factor[(j, j)].ln()).sum()
    }

    pub fn report(&self) -> ConditionalVarianceReport {
        ConditionalVarianceReport {
            n: self.len(),
            jitter: self.jitter,
            conditional_variances: self.conditional_variances(),
            log_det_cholesky: self.log_determinant(),
            log_det_lu: lu_log_determinant(&self.matrix),
        }
    }
}

/// Log of the absolute determinant through an LU factorization,
/// independent of the Cholesky route; partial pivoting leaves the sign in
/// the permutation, so pivots enter by absolute value. Equals the
/// log-determinant for SPD input.
pub fn lu_log_determinant(matrix: &DMatrix<f64>) -> f64 {
    let lu = matrix.clone().lu();
    let mut acc = 0.0;
    for i in 0..matrix.nrows() {
        acc += lu.u()[(i, i)].abs().ln();
    }
    acc
}

/// Determinant via LU, for small matrices.
pub fn lu_determinant(matrix: &DMatrix<f64>) -> f64 {
    matrix.clone().lu().determinant()
}

/// Cholesky-vs-LU determinant stack, serialized in run outputs.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalVarianceReport {
    pub n: usize,
    pub jitter: f64,
    pub conditional_variances: Vec<f64>,
    pub log_det_cholesky: f64,
    pub log_det_lu: f64,
}

/// One SLND evaluation: conditional variance of the field at `x` given its
/// values on the conditioning set, against the separation floor
/// `min_k rho_alpha(d(x, x_k))^2`.
#[derive(Debug, Clone, Serialize)]
pub struct SlndOutcome {
    pub conditional_variance: f64,
    pub floor: f64,
    pub ratio: f64,
    pub nearest_distance: f64,
}

fn distance_floor(alpha: f64, x: &SpherePoint, cond: &[SpherePoint]) -> Result<(f64, f64)> {
    let mut nearest = f64::INFINITY;
    for p in cond {
        let d = geodesic_distance(x, p);
        if d < 1e-14 {
            return Err(Error::param(
                "x",
                "evaluation point coincides with a conditioning point",
            ));
        }
        nearest = nearest.min(d);
    }
    let rho = rho_alpha(alpha, nearest);
    Ok((rho * rho, nearest))
}

/// `Var(T(x) | T(x_1), ..., T(x_m))` over the rho-squared floor.
pub fn slnd_ratio(
    kernel: &impl CovKernel,
    alpha: f64,
    x: &SpherePoint,
    cond: &[SpherePoint],
) -> Result<SlndOutcome> {
    if cond.is_empty() {
        return Err(Error::param("cond", "need at least one conditioning point"));
    }
    let (floor, nearest) = distance_floor(alpha, x, cond)?;
    let mut points = cond.to_vec();
    points.push(x.clone());
    let cov = CovarianceMatrix::from_points(kernel, &points)?;
    let conditional_variance = cov.conditional_variance_last();
    Ok(SlndOutcome {
        conditional_variance,
        floor,
        ratio: conditional_variance / floor,
        nearest_distance: nearest,
    })
}

/// Covariance matrix of the increment field `Z(y) = T(y) - T(x0)` over
/// `points`: `K(a, b) = C(a,b) - C(a,x0) - C(b,x0) + C(0)`.
pub fn build_increment_covariance(
    kernel: &impl CovKernel,
    x0: &SpherePoint,
    points: &[SpherePoint],
) -> Result<DMatrix<f64>> {
    let n = points.len();
    let to_x0: Vec<f64> = points
        .iter()
        .map(|p| kernel.cov(p, x0))
        .collect::<Result<_>>()?;
    let at_zero = kernel.at_zero();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * (at_zero - to_x0[i]);
        for j in 0..i {
            let v = kernel.cov(&points[i], &points[j])? - to_x0[i] - to_x0[j] + at_zero;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// SLND for the increment field pinned at `x0`: conditional variance of
/// `Z(x)` given `Z(x_1), ..., Z(x_m)`, with the floor minimum taken over
/// the conditioning points and `x0` itself.
pub fn increment_slnd_ratio(
    kernel: &impl CovKernel,
    alpha: f64,
    x: &SpherePoint,
    x0: &SpherePoint,
    cond: &[SpherePoint],
) -> Result<SlndOutcome> {
    if cond.is_empty() {
        return Err(Error::param("cond", "need at least one conditioning point"));
    }
    let mut with_pin = cond.to_vec();
    with_pin.push(x0.clone());
    let (floor, nearest) = distance_floor(alpha, x, &with_pin)?;
    let mut points = cond.to_vec();
    points.push(x.clone());
    let matrix = build_increment_covariance(kernel, x0, &points)?;
    let cov = CovarianceMatrix::new(matrix)?;
    let conditional_variance = cov.conditional_variance_last();
    Ok(SlndOutcome {
        conditional_variance,
        floor,
        ratio: conditional_variance / floor,
        nearest_distance: nearest,
    })
}

/// Uniform point on the sphere (area measure).
pub fn sample_uniform_sphere(rng: &mut impl Rng) -> SpherePoint {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    let theta = z.clamp(-1.0, 1.0).acos();
    SpherePoint::new(theta, phi).expect("in range by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::spectral::table::TableConfig;
    use approx::assert_relative_eq;

    fn table_kernel() -> CovarianceTable {
        let spec = AngularPowerSpectrum::power_law(3.0).unwrap();
        let cfg = TableConfig {
            knots: 2048,
            degree: 4_000,
        };
        CovarianceTable::build_full(&spec, &cfg).unwrap()
    }

    fn ring_points(n: usize, radius: f64) -> Vec<SpherePoint> {
        (0..n)
            .map(|i| {
                let az = std::f64::consts::TAU * i as f64 / n as f64;
                crate::geometry::point_at_distance(&SpherePoint::north_pole(), radius, az).unwrap()
            })
            .collect()
    }

    #[test]
    fn two_point_conditional_variance_oracle() {
        let kernel = table_kernel();
        let points = vec![
            SpherePoint::north_pole(),
            SpherePoint::new(0.3, 0.0).unwrap(),
        ];
        let cov = CovarianceMatrix::from_points(&kernel, &points).unwrap();
        let c = kernel.cov_theta(0.3).unwrap();
        let v = kernel.at_zero();
        let vars = cov.conditional_variances();
        assert_relative_eq!(vars[0], v, epsilon = 1e-14);
        // Gaussian two-point formula
        assert_relative_eq!(vars[1], v - c * c / v, epsilon = 1e-13);
        assert_eq!(cov.jitter(), 0.0);
    }

    #[test]
    fn determinant_routes_agree() {
        let mut rng = stream(7, Purpose::Validation, 0, 0);
        for trial in 0..20 {
            let n = 3 + (trial % 6);
            let b = DMatrix::<f64>::from_fn(n, n, |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let spd = &b * b.transpose() + DMatrix::<f64>::identity(n, n) * 0.5;
            let cov = CovarianceMatrix::new(spd.clone()).unwrap();
            assert_eq!(cov.jitter(), 0.0);
            assert_relative_eq!(
                cov.determinant(),
                lu_determinant(&spd),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                cov.log_determinant(),
                lu_log_determinant(&spd),
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn jitter_ladder_rescues_near_singular_matrices() {
        // rank-2 Gram matrix pushed slightly indefinite: plain Cholesky
        // must fail, a jitter well under the cap must fix it
        let mut rng = stream(3, Purpose::Validation, 0, 0);
        let b = DMatrix::<f64>::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nearly = &b * b.transpose() - DMatrix::<f64>::identity(4, 4) * 1e-9;
        let cov = CovarianceMatrix::new(nearly).unwrap();
        assert!(cov.jitter() > 0.0 && cov.jitter() <= 1e-6, "jitter={}", cov.jitter());
    }

    #[test]
    fn duplicate_points_expose_the_white_split() {
        let p = SpherePoint::new(0.7, 1.1).unwrap();
        let points = vec![SpherePoint::north_pole(), p.clone(), p.clone()];

        // under a table kernel the white remainder sits on the diagonal
        // only, so a repeated point keeps ~ 2 * white_mass of variance
        let kernel = table_kernel();
        let cov = CovarianceMatrix::from_points(&kernel, &points).unwrap();
        let twin = cov.conditional_variances()[2];
        let w = kernel.white_mass();
        assert!(twin > w && twin < 3.0 * w, "twin={twin} white={w}");

        // under the exact kernel the duplicate is fully determined
        let spec = AngularPowerSpectrum::power_law(3.0).unwrap();
        let exact = DirectKernel::new(&spec, TruncationPolicy::absolute(1e-6));
        let cov = CovarianceMatrix::from_points(&exact, &points).unwrap();
        assert!(cov.jitter() <= 1e-6);
        assert!(cov.conditional_variances()[2] < 1e-8);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match CovarianceMatrix::new(m) {
            Err(Error::NotPositiveDefinite { max_jitter }) => {
                assert_eq!(max_jitter, 1e-6);
            }
            other => panic!("expected NotPositiveDefinite, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn sample_covariance_matches_kernel() {
        let kernel = table_kernel();
        let points = ring_points(3, 0.8);
        let cov = CovarianceMatrix::from_points(&kernel, &points).unwrap();
        let mut rng = stream(42, Purpose::GaussVector, 0, 0);
        let reps = 40_000;
        let mut acc = [[0.0f64; 3]; 3];
        let mut buf = vec![0.0; 3];
        for _ in 0..reps {
            cov.sample_into(&mut rng, &mut buf);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += buf[i] * buf[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let empirical = acc[i][j] / reps as f64;
                let target = cov.matrix()[(i, j)];
                // standard error of a covariance estimate is ~ 1/sqrt(reps)
                assert!(
                    (empirical - target).abs() < 0.03,
                    "({i},{j}): empirical={empirical} target={target}"
                );
            }
        }
    }

    #[test]
    fn slnd_outcome_basics() {
        let kernel = table_kernel();
        let x = SpherePoint::north_pole();
        let cond = ring_points(4, 0.25);
        let out = slnd_ratio(&kernel, 3.0, &x, &cond).unwrap();
        // conditioning can only reduce variance
        assert!(out.conditional_variance > 0.0);
        assert!(out.conditional_variance < kernel.at_zero());
        assert_relative_eq!(out.nearest_distance, 0.25, epsilon = 1e-12);
        // rho^2 floor for alpha = 3 is the distance itself
        assert_relative_eq!(out.floor, 0.25, epsilon = 1e-12);
        assert_relative_eq!(
            out.ratio,
            out.conditional_variance / out.floor,
            epsilon = 1e-15
        );
        // coincident evaluation point is rejected
        let err = slnd_ratio(&kernel, 3.0, &cond[0].clone(), &cond);
        assert!(err.is_err());
    }

    #[test]
    fn increment_diagonal_is_the_variogram() {
        let kernel = table_kernel();
        let x0 = SpherePoint::north_pole();
        let points = ring_points(5, 0.6);
        let m = build_increment_covariance(&kernel, &x0, &points).unwrap();
        for (i, p) in points.iter().enumerate() {
            let d = geodesic_distance(&x0, p);
            let vario = 2.0 * (kernel.at_zero() - kernel.cov_theta(d).unwrap());
            assert_relative_eq!(m[(i, i)], vario, epsilon = 1e-13);
        }
        // pinning at x0 counts toward the floor
        let x = crate::geometry::point_at_distance(&x0, 0.05, 0.3).unwrap();
        let out = increment_slnd_ratio(&kernel, 3.0, &x, &x0, &points).unwrap();
        assert_relative_eq!(out.nearest_distance, 0.05, epsilon = 1e-12);
        assert!(out.conditional_variance > 0.0);
    }

    #[test]
    fn uniform_sphere_sampling_covers_both_hemispheres() {
        let mut rng = stream(11, Purpose::PointSampling, 0, 0);
        let n = 4_000;
        let mut north = 0usize;
        for _ in 0..n {
            let p = sample_uniform_sphere(&mut rng);
            if p.theta() < std::f64::consts::FRAC_PI_2 {
                north += 1;
            }
        }
        // binomial(4000, 1/2): 4 sigma is ~126
        assert!((north as i64 - 2_000).unsigned_abs() < 130, "north={north}");
    }
}
