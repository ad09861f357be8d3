//! Strong local nondeterminism: over random conditioning configurations,
//! the conditional variance of the field at a point given nearby values
//! stays above a positive multiple of `rho_alpha(nearest distance)^2`.

use std::f64::consts::TAU;

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentResult, Purpose, RawTable, Result, RunContext};
use crate::fit::quantile;
use crate::gaussian::{increment_slnd_ratio, sample_uniform_sphere, slnd_ratio};
use crate::geometry::{point_at_distance, SpherePoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SlndConfig {
    /// Base number of random configurations; the stability check doubles it.
    pub configurations: usize,
    /// Conditioning set sizes are drawn uniformly from `2..=max_conditioning`.
    pub max_conditioning: usize,
    /// Smallest conditioning distance; the largest is the regime bound delta.
    pub r_lo: f64,
    /// Allowed relative change of the minimum ratio when doubling the
    /// configuration count.
    pub stability_tol: f64,
}

impl Default for SlndConfig {
    fn default() -> Self {
        SlndConfig {
            configurations: 1000,
            max_conditioning: 4,
            r_lo: 1e-3,
            stability_tol: 0.2,
        }
    }
}

struct Configuration {
    x: SpherePoint,
    cond: Vec<SpherePoint>,
}

fn draw_configuration(cfg: &SlndConfig, ctx: &RunContext, index: u64) -> Result<Configuration> {
    let mut rng = ctx.rng("slnd", Purpose::Configurations, index, 0);
    let x = sample_uniform_sphere(&mut rng);
    let n = rng.random_range(2..=cfg.max_conditioning.max(2));
    let span = (ctx.delta * 0.999 / cfg.r_lo).ln();
    let mut cond = Vec::with_capacity(n);
    for _ in 0..n {
        let dist = cfg.r_lo * (span * rng.random::<f64>()).exp();
        let az = TAU * rng.random::<f64>();
        cond.push(point_at_distance(&x, dist, az)?);
    }
    Ok(Configuration { x, cond })
}

pub(super) fn run(cfg: &SlndConfig, ctx: &RunContext) -> Result<ExperimentResult> {
    let mut out = ExperimentResult::new("slnd", ctx);
    if !(cfg.r_lo > 0.0 && cfg.r_lo < ctx.delta) {
        return Err(super::Error::Config(format!(
            "slnd: r_lo = {} must lie in (0, delta = {})",
            cfg.r_lo, ctx.delta
        )));
    }
    let table = ctx.full_table()?;
    let kernel = table.as_ref();
    let alpha = ctx.params.alpha();

    let total = 2 * cfg.configurations;
    let rows: Vec<(f64, f64, f64, f64, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let c = draw_configuration(cfg, ctx, i as u64)?;
            let plain = slnd_ratio(kernel, alpha, &c.x, &c.cond)?;
            // pin the increment field at the first conditioning point
            let inc = increment_slnd_ratio(kernel, alpha, &c.x, &c.cond[0], &c.cond[1..])?;
            Ok((
                c.cond.len() as f64,
                plain.nearest_distance,
                plain.conditional_variance,
                plain.ratio,
                inc.ratio,
                plain.floor,
            ))
        })
        .collect::<Result<_>>()?;

    let ratios: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let inc_ratios: Vec<f64> = rows.iter().map(|r| r.4).collect();
    let min_base = ratios[..cfg.configurations]
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let min_doubled = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let inc_min_base = inc_ratios[..cfg.configurations]
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let inc_min_doubled = inc_ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    out.check(
        "minimum slnd ratio strictly positive",
        min_doubled,
        "> 0",
        min_doubled > 0.0,
        true,
        format!("empirical K over {total} configurations"),
    );
    out.check(
        "minimum increment-field ratio strictly positive",
        inc_min_doubled,
        "> 0",
        inc_min_doubled > 0.0,
        true,
        "",
    );
    let drift = (min_base - min_doubled).abs() / min_base;
    out.check(
        "minimum stable under doubling the configurations",
        drift,
        format!("relative change < {}", cfg.stability_tol),
        drift < cfg.stability_tol,
        true,
        format!("min {min_base:.4} -> {min_doubled:.4}"),
    );
    let inc_drift = (inc_min_base - inc_min_doubled).abs() / inc_min_base;
    out.check(
        "increment minimum stable under doubling",
        inc_drift,
        format!("relative change < {}", cfg.stability_tol),
        inc_drift < cfg.stability_tol,
        true,
        format!("min {inc_min_base:.4} -> {inc_min_doubled:.4}"),
    );

    // two-point closed form: Var(T(x) | T(y)) = v - c^2 / v
    let x = SpherePoint::new(1.1, 0.4)?;
    let y = point_at_distance(&x, 0.01, 1.9)?;
    let outcome = slnd_ratio(kernel, alpha, &x, std::slice::from_ref(&y))?;
    let v = kernel.at_zero();
    let c = kernel.eval(0.01);
    let oracle = v - c * c / v;
    let rel = (outcome.conditional_variance - oracle).abs() / oracle;
    out.check(
        "two-point configuration matches the closed form",
        rel,
        "relative error <= 1e-10",
        rel <= 1e-10,
        true,
        "Var(T(x) | T(y)) = v - c^2 / v through the Cholesky path",
    );

    // isotropy: a rigid rotation leaves the ratio unchanged
    let first = draw_configuration(cfg, ctx, 0)?;
    let plain = slnd_ratio(kernel, alpha, &first.x, &first.cond)?;
    let rot = Rotation3::from_axis_angle(
        &nalgebra::Unit::new_normalize(Vector3::new(0.3, 0.5, 0.8)),
        1.1,
    );
    let xr = first.x.rotated(&rot);
    let cr: Vec<SpherePoint> = first.cond.iter().map(|p| p.rotated(&rot)).collect();
    let rotated = slnd_ratio(kernel, alpha, &xr, &cr)?;
    let rot_err = (plain.ratio - rotated.ratio).abs() / plain.ratio.max(1e-300);
    out.check(
        "rotation invariance of the ratio",
        rot_err,
        "relative difference <= 1e-8",
        rot_err <= 1e-8,
        true,
        "",
    );

    out.constant("k_hat", min_doubled);
    out.constant("k_hat_increment", inc_min_doubled);
    out.constant("ratio_q05", quantile(&ratios, 0.05));
    out.constant("ratio_q50", quantile(&ratios, 0.50));
    out.constant("ratio_q95", quantile(&ratios, 0.95));

    let mut raw = RawTable::new(
        "slnd_configurations",
        &["cond_count", "nearest", "cond_variance", "ratio", "increment_ratio", "floor"],
    );
    for r in rows {
        raw.push(vec![r.0, r.1, r.2, r.3, r.4, r.5]);
    }
    out.tables.push(raw);
    Ok(out)
}
