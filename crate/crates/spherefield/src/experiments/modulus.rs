//! Maximum local time and its exact modulus. Over D(z, r) the peak of the
//! level-space density `L-hat*` should track `phi(r) = r^2 / rho_alpha(r /
//! sqrt(log log 1/r))^d`: the ratio stays in a fixed band with no log-r
//! drift, the plain mean scales like `r^{2 - d(alpha-2)/2}`, and a
//! pigeonhole bound ties every single realization to the occupied value
//! range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{guard_radii, ExperimentResult, Purpose, RawTable, Result, RunContext};
use crate::fit::{log_mean_ladder_slope, mean, mean_se};
use crate::gaussian::CovarianceMatrix;
use crate::geometry::{fibonacci_grid_in_disk, Disk, SpherePoint};
use crate::local_time::{local_time_histogram, LevelGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulusConfig {
    pub radii: Vec<f64>,
    pub replicates: usize,
    pub nodes: usize,
    pub bin_factor: f64,
    /// Drift allowance for the ratio `L-hat* / phi(r)` across the ladder.
    pub slope_tol: f64,
    /// Tolerance around the mean-scaling exponent `2 - d(alpha-2)/2`.
    pub mean_slope_tol: f64,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig {
            radii: vec![0.04, 0.02, 0.01, 0.005],
            replicates: 400,
            nodes: 220,
            bin_factor: 0.2,
            slope_tol: 0.15,
            mean_slope_tol: 0.2,
        }
    }
}

struct Rung {
    ratio: Vec<f64>,
    lstar: Vec<f64>,
    min_margin: f64,
}

fn ladder(
    cfg: &ModulusConfig,
    ctx: &RunContext,
    bin_factor: f64,
    nodes: usize,
    stream_tag: usize,
) -> Result<Vec<Rung>> {
    let table = ctx.full_table()?;
    let d = ctx.params.d() as usize;
    let center = SpherePoint::new(1.0, 0.0)?;
    let mut rungs = Vec::with_capacity(cfg.radii.len());
    for (ri, &r) in cfg.radii.iter().enumerate() {
        let disk = Disk::new(center.clone(), r)?;
        let grid = fibonacci_grid_in_disk(&disk, nodes)?;
        let cov = CovarianceMatrix::from_points(table.as_ref(), &grid.points)?;
        let h = bin_factor * ctx.params.rho(r);
        let levels = LevelGrid::new(h, d, 16.0)?;
        let phi = ctx.params.chung_modulus(r)?;
        let rows: Vec<(f64, f64, f64)> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut comps = Vec::with_capacity(d);
                for k in 0..d {
                    let mut rng = ctx.rng(
                        "local-time-modulus",
                        Purpose::GaussVector,
                        rep as u64,
                        (stream_tag + ri * 8 + k) as u64,
                    );
                    comps.push(cov.sample(&mut rng));
                }
                let est = local_time_histogram(&levels, &comps, &grid.weights)?;
                let (_, lstar) = est.max_density();
                // the occupied value box has sides span_k, covered by at
                // most (span_k/h + 2) cells per axis, so the peak cell
                // holds at least nu(D) / prod(span_k + 2h) per unit volume
                let mut cover = 1.0;
                for comp in &comps {
                    let lo = comp.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = comp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    cover *= (hi - lo) + 2.0 * h;
                }
                let margin = lstar * cover - est.total_weight();
                Ok((lstar / phi, lstar, margin))
            })
            .collect::<Result<_>>()?;
        rungs.push(Rung {
            ratio: rows.iter().map(|x| x.0).collect(),
            lstar: rows.iter().map(|x| x.1).collect(),
            min_margin: rows.iter().map(|x| x.2).fold(f64::INFINITY, f64::min),
        });
    }
    Ok(rungs)
}

pub(super) fn run(cfg: &ModulusConfig, ctx: &RunContext) -> Result<ExperimentResult> {
    let mut out = ExperimentResult::new("local-time-modulus", ctx);
    guard_radii("local-time-modulus", &cfg.radii, ctx.delta)?;
    if cfg.radii.len() < 2 {
        return Err(super::Error::Config(
            "local-time-modulus: need at least two radii".into(),
        ));
    }

    let rungs = ladder(cfg, ctx, cfg.bin_factor, cfg.nodes, 0)?;
    let ln_r: Vec<f64> = cfg.radii.iter().map(|r| r.ln()).collect();

    let ratio_groups: Vec<Vec<f64>> = rungs.iter().map(|rung| rung.ratio.clone()).collect();
    let mut boot = ctx.rng("local-time-modulus", Purpose::Bootstrap, 0, 0);
    let ratio_slope = log_mean_ladder_slope(&ln_r, &ratio_groups, 200, &mut boot)?;
    out.fit("log mean ratio vs log r", ratio_slope.slope, ratio_slope.se, f64::NAN);
    out.check(
        "peak-to-phi ratio drift",
        ratio_slope.slope,
        format!("slope 0 within {}", cfg.slope_tol),
        super::within(ratio_slope.slope, 0.0, cfg.slope_tol),
        true,
        format!("bootstrap se {:.4}", ratio_slope.se),
    );

    let lstar_groups: Vec<Vec<f64>> = rungs.iter().map(|rung| rung.lstar.clone()).collect();
    let mut boot = ctx.rng("local-time-modulus", Purpose::Bootstrap, 1, 0);
    let mean_slope = log_mean_ladder_slope(&ln_r, &lstar_groups, 200, &mut boot)?;
    let target = 2.0 - f64::from(ctx.params.d()) * (ctx.params.alpha() - 2.0) / 2.0;
    out.fit("log mean peak vs log r", mean_slope.slope, mean_slope.se, f64::NAN);
    out.check(
        "mean peak ladder slope",
        mean_slope.slope,
        format!("{target} within {}", cfg.mean_slope_tol),
        super::within(mean_slope.slope, target, cfg.mean_slope_tol),
        true,
        format!("bootstrap se {:.4}", mean_slope.se),
    );

    let worst_margin = rungs.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
    out.check(
        "pigeonhole mass bound holds per realization",
        worst_margin,
        ">= -1e-12 (peak times covered volume vs region area)",
        worst_margin >= -1e-12,
        true,
        "value-space span plus one cell on each side",
    );

    // discretization robustness: half the bin width, double the nodes
    let fine = ladder(cfg, ctx, cfg.bin_factor / 2.0, cfg.nodes * 2, 2000)?;
    let fine_groups: Vec<Vec<f64>> = fine.iter().map(|rung| rung.ratio.clone()).collect();
    let mut boot = ctx.rng("local-time-modulus", Purpose::Bootstrap, 2, 0);
    let fine_slope = log_mean_ladder_slope(&ln_r, &fine_groups, 200, &mut boot)?;
    let shift = (fine_slope.slope - ratio_slope.slope).abs();
    out.fit("log mean ratio vs log r, refined bins", fine_slope.slope, fine_slope.se, f64::NAN);
    out.check(
        "ratio drift stable under refinement",
        shift,
        format!("slope change < {:.4}", cfg.slope_tol / 1.5),
        shift < cfg.slope_tol / 1.5,
        true,
        "bin width halved, node count doubled",
    );

    let mut raw = RawTable::new(
        "modulus_ladder",
        &["r", "mean_ratio", "se_ratio", "mean_peak", "se_peak", "min_margin"],
    );
    for (ri, rung) in rungs.iter().enumerate() {
        raw.push(vec![
            cfg.radii[ri],
            mean(&rung.ratio),
            mean_se(&rung.ratio),
            mean(&rung.lstar),
            mean_se(&rung.lstar),
            rung.min_margin,
        ]);
    }
    out.tables.push(raw);
    out.constant("mean_peak_target", target);
    out.constant("ratio_band_lo", rungs.iter().flat_map(|r| &r.ratio).copied().fold(f64::INFINITY, f64::min));
    out.constant("ratio_band_hi", rungs.iter().flat_map(|r| &r.ratio).copied().fold(0.0f64, f64::max));
    Ok(out)
}
