//! Local-time moment scaling. For the histogram estimator at level zero
//! over shrinking disks D(z, r), the n-th moment should scale like
//! `r^{2n - d(n-1)(alpha-2)/2}`; the n = 2 case is the headline exponent
//! `2 + beta/2`. The same samples also exercise the occupation identity
//! with indicator test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{guard_radii, ExperimentResult, Purpose, RawTable, Result, RunContext};
use crate::fit::{log_mean_ladder_slope, mean, mean_se};
use crate::gaussian::CovarianceMatrix;
use crate::geometry::{fibonacci_grid_in_disk, Disk, SpherePoint};
use crate::local_time::{local_time_histogram, occupation_measure, LevelBox, LevelGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentsConfig {
    pub radii: Vec<f64>,
    pub replicates: usize,
    pub nodes: usize,
    /// Bin width as a fraction of `rho_alpha(r)`, so the value-space
    /// resolution tracks the field's own scale at every rung.
    pub bin_factor: f64,
    pub slope_tol: f64,
    /// Replicates at the widest rung double as occupation-identity trials.
    pub occupation_replicates: usize,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        MomentsConfig {
            radii: vec![0.04, 0.02, 0.01, 0.005],
            replicates: 4000,
            nodes: 200,
            bin_factor: 0.2,
            slope_tol: 0.3,
            occupation_replicates: 100,
        }
    }
}

struct Rung {
    density: Vec<f64>,
    occupation: Vec<OccupationTrial>,
}

struct OccupationTrial {
    total_rel_err: f64,
    aligned_rel_err: f64,
    bracketed: bool,
}

fn keys_within(est: &crate::local_time::LocalTimeEstimate, lo: i64, hi: i64) -> f64 {
    est.bins()
        .filter(|(key, _)| key.iter().all(|&k| lo <= k && k <= hi))
        .map(|(_, m)| m)
        .sum()
}

pub(super) fn run(cfg: &MomentsConfig, ctx: &RunContext) -> Result<ExperimentResult> {
    let mut out = ExperimentResult::new("local-time-moments", ctx);
    guard_radii("local-time-moments", &cfg.radii, ctx.delta)?;
    if cfg.radii.len() < 2 {
        return Err(super::Error::Config(
            "local-time-moments: need at least two radii".into(),
        ));
    }

    let table = ctx.full_table()?;
    let d = ctx.params.d() as usize;
    let center = SpherePoint::new(1.0, 0.0)?;
    let mut rungs = Vec::with_capacity(cfg.radii.len());
    for (ri, &r) in cfg.radii.iter().enumerate() {
        let disk = Disk::new(center.clone(), r)?;
        let area = disk.area();
        let grid = fibonacci_grid_in_disk(&disk, cfg.nodes)?;
        let cov = CovarianceMatrix::from_points(table.as_ref(), &grid.points)?;
        let h = cfg.bin_factor * ctx.params.rho(r);
        let levels = LevelGrid::new(h, d, 16.0)?;
        // misaligned box bounds chosen strictly inside cells -2..=1
        let mis = LevelBox::new(vec![-1.9 * h; d], vec![1.27 * h; d])?;
        let aligned = LevelBox::new(vec![-2.5 * h; d], vec![1.5 * h; d])?;
        let rows: Vec<(f64, Option<OccupationTrial>)> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut comps = Vec::with_capacity(d);
                for k in 0..d {
                    let mut rng = ctx.rng(
                        "local-time-moments",
                        Purpose::GaussVector,
                        rep as u64,
                        (ri * 8 + k) as u64,
                    );
                    comps.push(cov.sample(&mut rng));
                }
                let est = local_time_histogram(&levels, &comps, &grid.weights)?;
                let density = est.density_at_origin();
                let occupation = if ri == 0 && rep < cfg.occupation_replicates {
                    let direct_aligned = occupation_measure(&comps, &grid.weights, &aligned)?;
                    let through_bins = keys_within(&est, -2, 1);
                    let direct_mis = occupation_measure(&comps, &grid.weights, &mis)?;
                    let inner = keys_within(&est, -1, 0);
                    let outer = keys_within(&est, -2, 1);
                    let slack = 1e-12 * est.total_weight();
                    Some(OccupationTrial {
                        total_rel_err: (est.total_weight() - area).abs() / area,
                        aligned_rel_err: (direct_aligned - through_bins).abs() / area,
                        bracketed: inner - slack <= direct_mis && direct_mis <= outer + slack,
                    })
                } else {
                    None
                };
                Ok((density, occupation))
            })
            .collect::<Result<_>>()?;
        let density: Vec<f64> = rows.iter().map(|(v, _)| *v).collect();
        let occupation = rows.into_iter().filter_map(|(_, o)| o).collect();
        rungs.push(Rung { density, occupation });
    }

    let ln_r: Vec<f64> = cfg.radii.iter().map(|r| r.ln()).collect();
    let alpha = ctx.params.alpha();
    let exponent = |n: f64| 2.0 * n - f64::from(ctx.params.d()) * (n - 1.0) * (alpha - 2.0) / 2.0;

    for (n, tol, gating) in [(1.0, 0.2, true), (2.0, cfg.slope_tol, true), (3.0, 0.4, false)] {
        let groups: Vec<Vec<f64>> = rungs
            .iter()
            .map(|rung| rung.density.iter().map(|v| v.powf(n)).collect())
            .collect();
        let mut boot = ctx.rng("local-time-moments", Purpose::Bootstrap, n as u64, 0);
        let fitted = log_mean_ladder_slope(&ln_r, &groups, 200, &mut boot)?;
        let target = exponent(n);
        let label = format!("moment n={n} ladder slope");
        out.fit(&label, fitted.slope, fitted.se, f64::NAN);
        out.check(
            &label,
            fitted.slope,
            format!("{target} within {tol}"),
            super::within(fitted.slope, target, tol),
            gating,
            format!("bootstrap se {:.4}", fitted.se),
        );
    }

    let trials: Vec<&OccupationTrial> = rungs[0].occupation.iter().collect();
    let worst_total = trials.iter().map(|t| t.total_rel_err).fold(0.0f64, f64::max);
    let worst_aligned = trials.iter().map(|t| t.aligned_rel_err).fold(0.0f64, f64::max);
    let all_bracketed = trials.iter().all(|t| t.bracketed);
    out.check(
        "histogram mass equals region area",
        worst_total,
        "relative error <= 1e-6",
        worst_total <= 1e-6,
        true,
        format!("{} trials", trials.len()),
    );
    out.check(
        "cell-aligned indicator identity",
        worst_aligned,
        "relative error <= 1e-9",
        worst_aligned <= 1e-9,
        true,
        "direct occupation measure against summed bin masses",
    );
    out.check(
        "misaligned indicator bracketed by one cell",
        if all_bracketed { 1.0 } else { 0.0 },
        "inner sum <= direct <= outer sum, every trial",
        all_bracketed,
        true,
        "",
    );

    let mut raw = RawTable::new(
        "moment_ladder",
        &["r", "mean_L1", "se_L1", "mean_L2", "se_L2", "mean_L3", "se_L3", "hit_fraction"],
    );
    for (ri, rung) in rungs.iter().enumerate() {
        let l1 = rung.density.clone();
        let l2: Vec<f64> = l1.iter().map(|v| v * v).collect();
        let l3: Vec<f64> = l1.iter().map(|v| v * v * v).collect();
        let hits = l1.iter().filter(|&&v| v > 0.0).count() as f64 / l1.len() as f64;
        raw.push(vec![
            cfg.radii[ri],
            mean(&l1),
            mean_se(&l1),
            mean(&l2),
            mean_se(&l2),
            mean(&l3),
            mean_se(&l3),
            hits,
        ]);
        if ri + 1 == rungs.len() {
            out.constant("hit_fraction_smallest_r", hits);
        }
    }
    out.tables.push(raw);
    out.constant("second_moment_target", exponent(2.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_time::{local_time_histogram, LevelGrid};

    #[test]
    fn key_windows_partition_the_histogram() {
        let grid = LevelGrid::new(1.0, 1, 16.0).unwrap();
        let comps = vec![vec![-1.2, 0.1, 0.9, 2.1, 0.2]];
        let weights = vec![1.0; 5];
        let est = local_time_histogram(&grid, &comps, &weights).unwrap();
        let total = est.total_weight();
        let inner = keys_within(&est, 0, 1);
        let outer = keys_within(&est, -2, 2);
        assert!(inner < outer);
        assert!((outer - total).abs() < 1e-12);
        // values at -1.2 -> key -1, {0.1, 0.2} -> 0, 0.9 -> 1, 2.1 -> 2
        assert!((inner - 3.0).abs() < 1e-12);
    }

    #[test]
    fn key_window_in_two_dimensions_needs_every_component_inside() {
        let grid = LevelGrid::new(1.0, 2, 16.0).unwrap();
        let comps = vec![vec![0.1, 1.9, 0.0], vec![0.1, 0.1, 3.0]];
        let weights = vec![1.0; 3];
        let est = local_time_histogram(&grid, &comps, &weights).unwrap();
        // keys: (0,0), (2,0), (0,3); only the first lands in -1..=1 x -1..=1
        assert!((keys_within(&est, -1, 1) - 1.0).abs() < 1e-12);
        assert!((keys_within(&est, 0, 3) - 3.0).abs() < 1e-12);
    }
}
