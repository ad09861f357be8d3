//! Local time estimation by level-set histograms.
//!
//! The occupation measure of a region D pushed through the field,
//! `nu(B) = area{x in D : T(x) in B}`, has a density in the field's value
//! space: the local time `L(v, D)`. The estimator bins weighted field
//! values on a lattice of cells with side `h` centered on a reference level
//! (so level 0 sits in the middle of a cell, never on an edge) and divides
//! cell mass by `h^d`.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Lattice of value-space cells: component c of a value v falls in cell
/// `floor((v_c - shift_c) / h + 1/2)`. Values beyond `half_extent` of the
/// shift are rejected rather than silently clipped.
#[derive(Debug, Clone)]
pub struct LevelGrid {
    h: f64,
    d: usize,
    half_extent: f64,
    shift: Vec<f64>,
}

impl LevelGrid {
    pub fn new(h: f64, d: usize, half_extent: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::param("h", format!("bin width must be positive, got {h}")));
        }
        if d == 0 {
            return Err(Error::param("d", "need at least one component"));
        }
        if !half_extent.is_finite() || half_extent < h {
            return Err(Error::param(
                "half_extent",
                format!("grid must cover at least one bin width, got {half_extent}"),
            ));
        }
        Ok(LevelGrid {
            h,
            d,
            half_extent,
            shift: vec![0.0; d],
        })
    }

    /// Same lattice translated so that cell 0 is centered on `shift`
    /// (evaluating the local time at a level other than the origin).
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.d || shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("shift", "need one finite offset per component"));
        }
        Ok(LevelGrid {
            shift: shift.to_vec(),
            ..self.clone()
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn index(&self, component: usize, v: f64) -> Result<i64> {
        let rel = v - self.shift[component];
        if !rel.is_finite() || rel.abs() > self.half_extent {
            return Err(Error::ValueOutsideGrid {
                value: v,
                component,
            });
        }
        Ok((rel / self.h + 0.5).floor() as i64)
    }

    /// Cell key of a d-component value.
    pub fn key(&self, values: &[f64]) -> Result<Vec<i64>> {
        debug_assert_eq!(values.len(), self.d);
        values
            .iter()
            .enumerate()
            .map(|(c, &v)| self.index(c, v))
            .collect()
    }

    /// Center of a cell in value space.
    pub fn center(&self, key: &[i64]) -> Vec<f64> {
        key.iter()
            .zip(&self.shift)
            .map(|(&k, &s)| s + self.h * k as f64)
            .collect()
    }
}

/// Histogram local-time estimate over one realization.
#[derive(Debug, Clone)]
pub struct LocalTimeEstimate {
    grid: LevelGrid,
    bins: BTreeMap<Vec<i64>, f64>,
    total_weight: f64,
}

impl LocalTimeEstimate {
    pub fn grid(&self) -> &LevelGrid {
        &self.grid
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    /// Total occupation mass, i.e. the surface measure of the region.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn bins(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.bins.iter().map(|(k, &v)| (k, v))
    }

    pub fn mass_at_key(&self, key: &[i64]) -> f64 {
        self.bins.get(key).copied().unwrap_or(0.0)
    }

    /// `L-hat(v) = nu(cell containing v) / h^d`.
    pub fn density_at(&self, values: &[f64]) -> Result<f64> {
        let key = self.grid.key(values)?;
        Ok(self.mass_at_key(&key) / self.grid.cell_volume())
    }

    /// Density at the grid's own reference level (cell 0).
    pub fn density_at_origin(&self) -> f64 {
        let key = vec![0i64; self.grid.d()];
        self.mass_at_key(&key) / self.grid.cell_volume()
    }

    /// Maximum local time `L-hat* = max_v L-hat(v)` and its cell.
    pub fn max_density(&self) -> (Vec<i64>, f64) {
        let vol = self.grid.cell_volume();
        self.bins
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, &m)| (k.clone(), m / vol))
            .unwrap_or_else(|| (vec![0; self.grid.d()], 0.0))
    }
}

/// Bin weighted field values. `components` holds one slice per field
/// component (component-major); `weights` carries the surface measure of
/// each evaluation point.
pub fn local_time_histogram(
    grid: &LevelGrid,
    components: &[Vec<f64>],
    weights: &[f64],
) -> Result<LocalTimeEstimate> {
    if components.len() != grid.d() {
        return Err(Error::param(
            "components",
            format!("grid expects {} components, got {}", grid.d(), components.len()),
        ));
    }
    let n = weights.len();
    if components.iter().any(|c| c.len() != n) {
        return Err(Error::param("components", "component length must match weights"));
    }
    let mut bins: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut total = 0.0;
    let mut key = vec![0i64; grid.d()];
    for i in 0..n {
        for (c, slot) in key.iter_mut().enumerate() {
            *slot = grid.index(c, components[c][i])?;
        }
        *bins.entry(key.clone()).or_insert(0.0) += weights[i];
        total += weights[i];
    }
    Ok(LocalTimeEstimate {
        grid: grid.clone(),
        bins,
        total_weight: total,
    })
}

/// Axis-aligned half-open box `[lo, hi)` in value space.
#[derive(Debug, Clone)]
pub struct LevelBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl LevelBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::param("lo", "box bounds must have equal nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b) {
            return Err(Error::param("lo", "need lo < hi componentwise"));
        }
        Ok(LevelBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, i: usize, components: &[Vec<f64>]) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .enumerate()
            .all(|(c, (&lo, &hi))| {
                let v = components[c][i];
                lo <= v && v < hi
            })
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Occupation measure `nu([lo, hi)) = sum of weights of points whose value
/// lies in the box`; the direct side of the occupation identity.
pub fn occupation_measure(
    components: &[Vec<f64>],
    weights: &[f64],
    bbox: &LevelBox,
) -> Result<f64> {
    if components.len() != bbox.dim() {
        return Err(Error::param(
            "components",
            format!("box expects {} components, got {}", bbox.dim(), components.len()),
        ));
    }
    let n = weights.len();
    if components.iter().any(|c| c.len() != n) {
        return Err(Error::param("components", "component length must match weights"));
    }
    let mut acc = 0.0;
    for i in 0..n {
        if bbox.contains(i, components) {
            acc += weights[i];
        }
    }
    Ok(acc)
}

/// Volume of the d-dimensional unit ball, by the two-step recursion
/// `V_d = V_{d-2} 2 pi / d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * std::f64::consts::TAU / d as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn uniform_values(n: usize, scale: f64, component: u64) -> Vec<f64> {
        let mut rng = stream(17, Purpose::Validation, 0, component);
        (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
    }

    #[test]
    fn level_zero_cell_is_centered() {
        let grid = LevelGrid::new(0.1, 1, 2.0).unwrap();
        assert_eq!(grid.index(0, 0.0).unwrap(), 0);
        assert_eq!(grid.index(0, 0.049).unwrap(), 0);
        assert_eq!(grid.index(0, -0.049).unwrap(), 0);
        assert_eq!(grid.index(0, 0.051).unwrap(), 1);
        assert_eq!(grid.index(0, -0.051).unwrap(), -1);
        assert_eq!(grid.index(0, 0.37).unwrap(), 4);
        assert_relative_eq!(grid.center(&[4])[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let grid = LevelGrid::new(0.1, 2, 1.0).unwrap();
        let err = grid.key(&[0.2, 1.5]).unwrap_err();
        match err {
            Error::ValueOutsideGrid { value, component } => {
                assert_eq!(component, 1);
                assert_eq!(value, 1.5);
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(grid.index(0, f64::NAN).is_err());
    }

    #[test]
    fn histogram_conserves_mass() {
        let n = 5_000;
        let components = vec![uniform_values(n, 1.5, 0), uniform_values(n, 1.5, 1)];
        let weights: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let grid = LevelGrid::new(0.25, 2, 4.0).unwrap();
        let est = local_time_histogram(&grid, &components, &weights).unwrap();
        let total: f64 = weights.iter().sum();
        assert_relative_eq!(est.total_weight(), total, max_relative = 1e-12);
        let from_bins: f64 = est.bins().map(|(_, m)| m).sum();
        assert_relative_eq!(from_bins, total, max_relative = 1e-12);
        assert!(est.bin_count() > 10);
    }

    #[test]
    fn occupation_identity_for_aligned_boxes() {
        // an indicator supported on whole cells turns the occupation
        // identity into an exact finite-sum equality
        let n = 4_000;
        let components = vec![uniform_values(n, 1.2, 3)];
        let weights = vec![0.001; n];
        let h = 0.2;
        let grid = LevelGrid::new(h, 1, 3.0).unwrap();
        let est = local_time_histogram(&grid, &components, &weights).unwrap();
        // box spanning cells -2..=1: [-0.5, 0.3)
        let bbox = LevelBox::new(vec![-2.5 * h], vec![1.5 * h]).unwrap();
        let direct = occupation_measure(&components, &weights, &bbox).unwrap();
        let through_bins: f64 = (-2i64..=1).map(|k| est.mass_at_key(&[k])).sum();
        assert_relative_eq!(direct, through_bins, max_relative = 1e-12);
        // and through the density normalization
        let through_density: f64 = (-2i64..=1)
            .map(|k| est.density_at(&[k as f64 * h]).unwrap() * h)
            .sum();
        assert_relative_eq!(direct, through_density, max_relative = 1e-12);
    }

    #[test]
    fn misaligned_box_is_off_by_at_most_the_boundary_cells() {
        let n = 6_000;
        let components = vec![uniform_values(n, 1.0, 5)];
        let weights = vec![1.0 / n as f64; n];
        let h = 0.25;
        let grid = LevelGrid::new(h, 1, 3.0).unwrap();
        let est = local_time_histogram(&grid, &components, &weights).unwrap();
        let bbox = LevelBox::new(vec![-0.4], vec![0.47]).unwrap();
        let direct = occupation_measure(&components, &weights, &bbox).unwrap();
        // cells fully inside and cells touching the box
        let inner: f64 = (-1i64..=1).map(|k| est.mass_at_key(&[k])).sum();
        let outer: f64 = (-2i64..=2).map(|k| est.mass_at_key(&[k])).sum();
        assert!(inner - 1e-12 <= direct && direct <= outer + 1e-12);
    }

    #[test]
    fn shifted_grid_translates_the_level() {
        let n = 3_000;
        let components = vec![uniform_values(n, 1.0, 6)];
        let weights = vec![1.0; n];
        let grid = LevelGrid::new(0.125, 1, 4.0).unwrap();
        let shifted = grid.shifted(&[0.4]).unwrap();
        let est0 = local_time_histogram(&grid, &components, &weights).unwrap();
        let est1 = local_time_histogram(&shifted, &components, &weights).unwrap();
        // densities at the same absolute level, asked through each grid
        let a = est0.density_at(&[0.4]).unwrap();
        let b = est1.density_at_origin();
        // 0.4 is not a multiple of 0.125 + center offset, so the cells
        // differ; both still integrate to the same total
        assert!(a >= 0.0 && b >= 0.0);
        assert_relative_eq!(est0.total_weight(), est1.total_weight());
        // shifting by an exact number of cells reproduces the same masses
        let by_cells = grid.shifted(&[0.25]).unwrap();
        let est2 = local_time_histogram(&by_cells, &components, &weights).unwrap();
        for k in -4i64..=4 {
            assert_relative_eq!(
                est2.mass_at_key(&[k]),
                est0.mass_at_key(&[k + 2]),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn max_density_picks_the_heaviest_cell() {
        let grid = LevelGrid::new(0.5, 1, 2.0).unwrap();
        let components = vec![vec![0.0, 0.1, 0.6, -0.7, 0.05]];
        let weights = vec![1.0, 1.0, 5.0, 1.0, 1.0];
        let est = local_time_histogram(&grid, &components, &weights).unwrap();
        let (key, dens) = est.max_density();
        assert_eq!(key, vec![1]);
        assert_relative_eq!(dens, 5.0 / 0.5, epsilon = 1e-12);
        assert_relative_eq!(est.density_at_origin(), 3.0 / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(0), 1.0);
        assert_relative_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn two_component_keys_bin_jointly() {
        let grid = LevelGrid::new(1.0, 2, 5.0).unwrap();
        let components = vec![vec![0.2, 1.2, 0.3], vec![-0.3, 0.9, -0.2]];
        let weights = vec![1.0, 2.0, 4.0];
        let est = local_time_histogram(&grid, &components, &weights).unwrap();
        assert_eq!(est.bin_count(), 2);
        assert_relative_eq!(est.mass_at_key(&[0, 0]), 5.0);
        assert_relative_eq!(est.mass_at_key(&[1, 1]), 2.0);
        assert_relative_eq!(est.density_at(&[0.0, 0.0]).unwrap(), 5.0);
    }
}
