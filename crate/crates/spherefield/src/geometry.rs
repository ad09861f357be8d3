//! Geometry of the unit sphere S^2: points in colatitude/longitude, geodesic
//! distance, geodesic disks and angular sections with their surface areas,
//! uniform sampling and deterministic near-equal-area quadrature grids.
//!
//! Surface measure is unnormalized (total mass 4*pi). A disk of geodesic
//! radius r has area 2*pi*(1 - cos r); the angular section
//! {theta <= t, 0 <= phi < w} has area w*(1 - cos t).

use crate::error::{Error, Result};
use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Golden-ratio conjugate, the azimuth step of the Fibonacci lattice.
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// A point on S^2, stored as colatitude `theta` in [0, pi], longitude `phi`
/// in [0, 2*pi), with the unit vector cached.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct SpherePoint {
    theta: f64,
    phi: f64,
    unit: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    theta: f64,
    phi: f64,
}

impl TryFrom<PointRepr> for SpherePoint {
    type Error = String;
    fn try_from(r: PointRepr) -> std::result::Result<Self, String> {
        SpherePoint::new(r.theta, r.phi).map_err(|e| e.to_string())
    }
}

impl From<SpherePoint> for PointRepr {
    fn from(p: SpherePoint) -> Self {
        PointRepr {
            theta: p.theta,
            phi: p.phi,
        }
    }
}

impl SpherePoint {
    /// Build from colatitude in [0, pi] and any finite longitude (wrapped
    /// into [0, 2*pi)).
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::param("theta", format!("colatitude must lie in [0, pi], got {theta}")));
        }
        if !phi.is_finite() {
            return Err(Error::param("phi", format!("longitude must be finite, got {phi}")));
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Ok(SpherePoint {
            theta,
            phi,
            unit: [st * cp, st * sp, ct],
        })
    }

    /// Build from a nonzero vector (normalized internally).
    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::param("vector", "cannot normalize a near-zero vector"));
        }
        let u = v / n;
        let theta = u.z.clamp(-1.0, 1.0).acos();
        let mut phi = u.y.atan2(u.x);
        if phi < 0.0 {
            phi += TAU;
        }
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(SpherePoint {
            theta,
            phi,
            unit: [u.x, u.y, u.z],
        })
    }

    pub fn north_pole() -> Self {
        SpherePoint {
            theta: 0.0,
            phi: 0.0,
            unit: [0.0, 0.0, 1.0],
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unit(&self) -> Vector3<f64> {
        Vector3::new(self.unit[0], self.unit[1], self.unit[2])
    }

    pub fn xyz(&self) -> [f64; 3] {
        self.unit
    }

    /// Apply a rotation.
    pub fn rotated(&self, rot: &Rotation3<f64>) -> SpherePoint {
        SpherePoint::from_vector(rot * self.unit()).expect("rotation preserves the norm")
    }
}

/// Geodesic (great-circle) distance, computed as atan2(|a x b|, <a,b>) which
/// stays accurate for nearly coincident and nearly antipodal points.
pub fn geodesic_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    let u = a.unit();
    let v = b.unit();
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Geodesic disk D(center, radius), radius in (0, pi].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Disk {
    pub center: SpherePoint,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: SpherePoint, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 || radius > PI {
            return Err(Error::param("radius", format!("disk radius must lie in (0, pi], got {radius}")));
        }
        Ok(Disk { center, radius })
    }

    /// Surface area 2*pi*(1 - cos radius).
    pub fn area(&self) -> f64 {
        disk_area(self.radius)
    }

    pub fn contains(&self, p: &SpherePoint) -> bool {
        geodesic_distance(&self.center, p) <= self.radius
    }
}

pub fn disk_area(radius: f64) -> f64 {
    // 2*pi*(1 - cos r) in the cancellation-free half-angle form
    2.0 * TAU * (radius / 2.0).sin().powi(2)
}

/// Angular section {(theta, phi): theta <= colat, 0 <= phi < lon_width},
/// anchored at the north pole. colat in (0, pi], lon_width in (0, 2*pi).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngularSection {
    pub colat: f64,
    pub lon_width: f64,
}

impl AngularSection {
    pub fn new(colat: f64, lon_width: f64) -> Result<Self> {
        if !colat.is_finite() || colat <= 0.0 || colat > PI {
            return Err(Error::param("colat", format!("section colatitude must lie in (0, pi], got {colat}")));
        }
        if !lon_width.is_finite() || lon_width <= 0.0 || lon_width >= TAU {
            return Err(Error::param("lon_width", format!("section longitude width must lie in (0, 2*pi), got {lon_width}")));
        }
        Ok(AngularSection { colat, lon_width })
    }

    /// Surface area lon_width * (1 - cos colat).
    pub fn area(&self) -> f64 {
        section_area(self.colat, self.lon_width)
    }
}

pub fn section_area(colat: f64, lon_width: f64) -> f64 {
    lon_width * 2.0 * (colat / 2.0).sin().powi(2)
}

/// A region that local-time experiments can integrate over.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Disk(Disk),
    Section(AngularSection),
}

impl Region {
    pub fn area(&self) -> f64 {
        match self {
            Region::Disk(d) => d.area(),
            Region::Section(s) => s.area(),
        }
    }

    pub fn grid(&self, n: usize) -> Result<RegionGrid> {
        match self {
            Region::Disk(d) => fibonacci_grid_in_disk(d, n),
            Region::Section(s) => section_grid(s, n),
        }
    }
}

/// Quadrature nodes with weights; the weights sum to the region area, so
/// sum_i w_i f(x_i) approximates the surface integral of f.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub points: Vec<SpherePoint>,
    pub weights: Vec<f64>,
}

impl RegionGrid {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rotation carrying the north pole to `center`.
fn rotation_from_pole(center: &SpherePoint) -> Rotation3<f64> {
    let target = center.unit();
    match Rotation3::rotation_between(&Vector3::z(), &target) {
        Some(r) => r,
        // antipodal: any half-turn through an equatorial axis works
        None => Rotation3::from_axis_angle(&Vector3::x_axis(), PI),
    }
}

/// Place a point at the given geodesic distance and azimuth from `center`.
/// Azimuth is measured in the rotated frame that carries the pole to the
/// center; its absolute orientation is arbitrary but deterministic.
pub fn point_at_distance(center: &SpherePoint, distance: f64, azimuth: f64) -> Result<SpherePoint> {
    if !(0.0..=PI).contains(&distance) {
        return Err(Error::param("distance", format!("must lie in [0, pi], got {distance}")));
    }
    let rot = rotation_from_pole(center);
    let (sd, cd) = distance.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    SpherePoint::from_vector(rot * Vector3::new(sd * ca, sd * sa, cd))
}

/// Draw `n` points uniformly (w.r.t. surface measure) in a geodesic disk:
/// the cosine of the distance to the center is uniform on [cos r, 1] and the
/// azimuth is uniform on [0, 2*pi).
pub fn sample_uniform_in_disk(disk: &Disk, n: usize, rng: &mut impl Rng) -> Vec<SpherePoint> {
    let rot = rotation_from_pole(&disk.center);
    let zmin = disk.radius.cos();
    (0..n)
        .map(|_| {
            let z: f64 = zmin + (1.0 - zmin) * rng.random::<f64>();
            let psi: f64 = TAU * rng.random::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            let (sp, cp) = psi.sin_cos();
            SpherePoint::from_vector(rot * Vector3::new(s * cp, s * sp, z))
                .expect("unit vector by construction")
        })
        .collect()
}

/// Deterministic near-equal-area nodes in a geodesic disk: a Fibonacci
/// lattice in (cos distance, azimuth), each node carrying weight area/n.
/// `n == 1` degenerates to the single center node.
pub fn fibonacci_grid_in_disk(disk: &Disk, n: usize) -> Result<RegionGrid> {
    if n == 0 {
        return Err(Error::param("n", "node count must be positive"));
    }
    let area = disk.area();
    if n == 1 {
        return Ok(RegionGrid {
            points: vec![disk.center.clone()],
            weights: vec![area],
        });
    }
    let rot = rotation_from_pole(&disk.center);
    let zmin = disk.radius.cos();
    let w = area / n as f64;
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let z = 1.0 - u * (1.0 - zmin);
        let psi = TAU * ((i as f64 * GOLDEN) % 1.0);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let (sp, cp) = psi.sin_cos();
        points.push(
            SpherePoint::from_vector(rot * Vector3::new(s * cp, s * sp, z))
                .expect("unit vector by construction"),
        );
    }
    Ok(RegionGrid {
        points,
        weights: vec![w; n],
    })
}

/// Deterministic near-equal-area nodes in an angular section: a golden-ratio
/// lattice in the (cos theta, phi) rectangle.
pub fn section_grid(section: &AngularSection, n: usize) -> Result<RegionGrid> {
    if n == 0 {
        return Err(Error::param("n", "node count must be positive"));
    }
    let area = section.area();
    let zmin = section.colat.cos();
    let w = area / n as f64;
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let z = 1.0 - u * (1.0 - zmin);
        let phi = ((i as f64 * GOLDEN) % 1.0) * section.lon_width;
        points.push(SpherePoint::new(z.clamp(-1.0, 1.0).acos(), phi)?);
    }
    Ok(RegionGrid {
        points,
        weights: vec![w; n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn round_trip_through_cartesian() {
        let cases = [(0.0, 0.0), (1.3, 2.2), (PI, 1.0), (1e-9, 6.2), (2.9, 0.003)];
        for (t, p) in cases {
            let a = SpherePoint::new(t, p).unwrap();
            let b = SpherePoint::from_vector(a.unit()).unwrap();
            assert!(geodesic_distance(&a, &b) < 1e-12, "({t},{p})");
        }
    }

    #[test]
    fn longitude_wraps() {
        let a = SpherePoint::new(1.0, -0.5).unwrap();
        assert!((a.phi() - (TAU - 0.5)).abs() < 1e-12);
        let b = SpherePoint::new(1.0, TAU + 0.25).unwrap();
        assert!((b.phi() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(SpherePoint::new(-0.1, 0.0).is_err());
        assert!(SpherePoint::new(PI + 0.1, 0.0).is_err());
        assert!(SpherePoint::new(f64::NAN, 0.0).is_err());
        assert!(SpherePoint::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn distance_identities() {
        let a = SpherePoint::new(0.7, 1.1).unwrap();
        let b = SpherePoint::new(2.0, 4.0).unwrap();
        assert_eq!(geodesic_distance(&a, &a), 0.0);
        assert_relative_eq!(geodesic_distance(&a, &b), geodesic_distance(&b, &a));
        // antipodal pair
        let n = SpherePoint::new(0.0, 0.0).unwrap();
        let s = SpherePoint::new(PI, 0.0).unwrap();
        assert_relative_eq!(geodesic_distance(&n, &s), PI, epsilon = 1e-15);
        // pole to equator
        let e = SpherePoint::new(PI / 2.0, 2.0).unwrap();
        assert_relative_eq!(geodesic_distance(&n, &e), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn small_distance_is_accurate() {
        let a = SpherePoint::new(1.0, 1.0).unwrap();
        let b = point_at_distance(&a, 1e-9, 0.3).unwrap();
        let d = geodesic_distance(&a, &b);
        assert_relative_eq!(d, 1e-9, max_relative = 1e-6);
    }

    #[test]
    fn areas_match_reference_values() {
        // reference values from a 50-digit evaluation of the closed forms
        assert_relative_eq!(disk_area(0.1), 0.031389755322206120858, max_relative = 1e-15);
        assert_relative_eq!(
            section_area(0.2, 1.1),
            0.021926764374634205763,
            max_relative = 1e-15
        );
        // whole sphere
        assert_relative_eq!(disk_area(PI), 4.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn area_monotone_in_radius() {
        let mut prev = 0.0;
        for i in 1..=100 {
            let a = disk_area(PI * i as f64 / 100.0);
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn point_at_distance_lands_at_distance() {
        let c = SpherePoint::new(2.2, 5.1).unwrap();
        for (d, az) in [(0.3, 0.0), (1e-4, 2.0), (2.8, 4.4)] {
            let p = point_at_distance(&c, d, az).unwrap();
            assert_relative_eq!(geodesic_distance(&c, &p), d, max_relative = 1e-9);
        }
    }

    #[test]
    fn uniform_disk_sampling_matches_area_law() {
        // fraction in the half-radius disk is (1 - cos(r/2)) / (1 - cos r)
        let disk = Disk::new(SpherePoint::new(1.2, 0.7).unwrap(), 0.5).unwrap();
        let inner = Disk::new(disk.center.clone(), 0.25).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let n = 40_000;
        let pts = sample_uniform_in_disk(&disk, n, &mut rng);
        let hits = pts.iter().filter(|p| inner.contains(p)).count();
        let p_expected = (1.0 - 0.25f64.cos()) / (1.0 - 0.5f64.cos());
        let se = (p_expected * (1.0 - p_expected) / n as f64).sqrt();
        let p_hat = hits as f64 / n as f64;
        assert!(
            (p_hat - p_expected).abs() < 3.0 * se,
            "p_hat={p_hat}, expected={p_expected}, 3se={}",
            3.0 * se
        );
        for p in &pts {
            assert!(disk.contains(p));
        }
    }

    #[test]
    fn fibonacci_grid_weights_and_coverage() {
        let disk = Disk::new(SpherePoint::new(0.4, 3.0).unwrap(), 0.05).unwrap();
        for n in [1usize, 2, 17, 500] {
            let g = fibonacci_grid_in_disk(&disk, n).unwrap();
            assert_eq!(g.len(), n);
            assert_relative_eq!(g.total_weight(), disk.area(), max_relative = 1e-9);
            for p in &g.points {
                assert!(geodesic_distance(&disk.center, p) <= disk.radius + 1e-12);
            }
        }
        // distinct nodes
        let g = fibonacci_grid_in_disk(&disk, 64).unwrap();
        for i in 0..g.len() {
            for j in (i + 1)..g.len() {
                assert!(geodesic_distance(&g.points[i], &g.points[j]) > 1e-9);
            }
        }
        // n = 1 puts the node at the center
        let g1 = fibonacci_grid_in_disk(&disk, 1).unwrap();
        assert!(geodesic_distance(&g1.points[0], &disk.center) < 1e-15);
    }

    #[test]
    fn section_grid_weights_and_coverage() {
        let sec = AngularSection::new(0.3, 1.2).unwrap();
        let g = section_grid(&sec, 300).unwrap();
        assert_relative_eq!(g.total_weight(), sec.area(), max_relative = 1e-9);
        for p in &g.points {
            assert!(p.theta() <= sec.colat + 1e-12);
            assert!(p.phi() <= sec.lon_width + 1e-12);
        }
    }

    #[test]
    fn rotation_preserves_pairwise_distances() {
        let rot = Rotation3::from_euler_angles(0.3, 1.1, -0.7);
        let a = SpherePoint::new(0.9, 2.0).unwrap();
        let b = SpherePoint::new(1.4, 5.5).unwrap();
        let d0 = geodesic_distance(&a, &b);
        let d1 = geodesic_distance(&a.rotated(&rot), &b.rotated(&rot));
        assert_relative_eq!(d0, d1, epsilon = 1e-12);
    }
}
