//! Variogram scaling: the log-log slope of `E[(T0(x) - T0(y))^2]` against
//! the geodesic angle must match `alpha - 2`. The series route is
//! deterministic with certified truncation error; a Monte Carlo route
//! cross-checks it through exact Cholesky sampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{guard_radii, ExperimentResult, Purpose, RawTable, Result, RunContext};
use crate::fit::{mean, mean_se, ols_line};
use crate::gaussian::CovarianceMatrix;
use crate::geometry::{point_at_distance, SpherePoint};
use crate::spectral::{rho_alpha, variogram_certified, TruncationPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VariogramConfig {
    /// Exponents swept by the deterministic series route.
    pub alphas: Vec<f64>,
    /// Angle ladder for the series fit.
    pub thetas: Vec<f64>,
    /// Angle subset for the Monte Carlo cross-check (run spectrum only).
    pub mc_thetas: Vec<f64>,
    pub mc_replicates: usize,
    /// Allowed deviation of the fitted slope from `alpha - 2`.
    pub tolerance: f64,
    /// Absolute truncation tolerance requested per series point; where the
    /// degree cap makes it unreachable the certified achievable bound is
    /// used and recorded instead.
    pub series_tol: f64,
}

impl Default for VariogramConfig {
    fn default() -> Self {
        VariogramConfig {
            alphas: vec![2.5, 3.0, 3.5],
            thetas: super::log_spaced(1e-3, 2e-2, 12),
            mc_thetas: vec![2e-3, 5e-3, 1e-2, 2e-2],
            mc_replicates: 4000,
            tolerance: 0.05,
            series_tol: 1e-6,
        }
    }
}

pub(super) fn run(cfg: &VariogramConfig, ctx: &RunContext) -> Result<ExperimentResult> {
    let mut out = ExperimentResult::new("variogram-scaling", ctx);
    guard_radii("variogram-scaling", &cfg.thetas, ctx.delta)?;
    guard_radii("variogram-scaling", &cfg.mc_thetas, ctx.delta)?;
    let policy = TruncationPolicy::absolute(cfg.series_tol);

    let mut series = RawTable::new(
        "variogram_series",
        &["alpha", "theta", "variogram", "certified_error", "ratio_to_rho_sq"],
    );
    for &alpha in &cfg.alphas {
        let spec = ctx.params.spectrum().with_alpha(alpha)?;
        let mut ln_theta = Vec::with_capacity(cfg.thetas.len());
        let mut ln_vario = Vec::with_capacity(cfg.thetas.len());
        let mut ratio_lo = f64::INFINITY;
        let mut ratio_hi = 0.0f64;
        let mut worst_rel_err = 0.0f64;
        for &theta in &cfg.thetas {
            let (vario, bound) = variogram_certified(&spec, theta, &policy)?;
            let rho = rho_alpha(alpha, theta);
            let ratio = vario / (rho * rho);
            ratio_lo = ratio_lo.min(ratio);
            ratio_hi = ratio_hi.max(ratio);
            worst_rel_err = worst_rel_err.max(bound / vario);
            ln_theta.push(theta.ln());
            ln_vario.push(vario.ln());
            series.push(vec![alpha, theta, vario, bound, ratio]);
        }
        let fit = ols_line(&ln_theta, &ln_vario)?;
        out.fit(format!("series log-log slope, alpha = {alpha}"), fit.slope, 0.0, fit.r_squared);
        out.check(
            format!("series slope at alpha = {alpha}"),
            fit.slope,
            format!("{} within {}", alpha - 2.0, cfg.tolerance),
            super::within(fit.slope, alpha - 2.0, cfg.tolerance),
            true,
            format!("certified series error at most {worst_rel_err:.2e} of the value"),
        );
        out.check(
            format!("variogram/rho^2 band at alpha = {alpha}"),
            ratio_hi / ratio_lo,
            "finite positive band across the ladder",
            ratio_lo > 0.0 && ratio_hi.is_finite(),
            true,
            format!("band [{ratio_lo:.4}, {ratio_hi:.4}]"),
        );
        out.constant(&format!("ratio_lo_alpha_{alpha}"), ratio_lo);
        out.constant(&format!("ratio_hi_alpha_{alpha}"), ratio_hi);
    }
    out.tables.push(series);

    // Monte Carlo route at the run spectrum: exact pair sampling
    let spec = ctx.params.spectrum();
    let table = ctx.full_table()?;
    let base = SpherePoint::new(1.0, 0.3)?;
    let mut mc = RawTable::new(
        "variogram_mc",
        &["theta", "mc_mean", "mc_se", "series_value", "z_score"],
    );
    let mut ln_theta = Vec::new();
    let mut ln_mc = Vec::new();
    let mut worst_z = 0.0f64;
    for (ti, &theta) in cfg.mc_thetas.iter().enumerate() {
        let y = point_at_distance(&base, theta, 0.7)?;
        let pair = CovarianceMatrix::from_points(table.as_ref(), &[base.clone(), y])?;
        let sq: Vec<f64> = (0..cfg.mc_replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng =
                    ctx.rng("variogram-scaling", Purpose::GaussVector, rep as u64, ti as u64);
                let v = pair.sample(&mut rng);
                let d = v[0] - v[1];
                d * d
            })
            .collect();
        let m = mean(&sq);
        let se = mean_se(&sq);
        let (series_value, _) = variogram_certified(spec, theta, &policy)?;
        let z = (m - series_value) / se;
        worst_z = worst_z.max(z.abs());
        ln_theta.push(theta.ln());
        ln_mc.push(m.ln());
        mc.push(vec![theta, m, se, series_value, z]);
    }
    out.check(
        "Monte Carlo variogram matches the series route",
        worst_z,
        "max |z| <= 3 across the angle subset",
        worst_z <= 3.0,
        true,
        format!("{} replicates per angle", cfg.mc_replicates),
    );
    let mc_fit = ols_line(&ln_theta, &ln_mc)?;
    out.fit("mc log-log slope (run spectrum)", mc_fit.slope, f64::NAN, mc_fit.r_squared);
    out.check(
        "Monte Carlo slope is in the series ballpark",
        mc_fit.slope,
        format!("{} within 0.15", ctx.params.alpha() - 2.0),
        super::within(mc_fit.slope, ctx.params.alpha() - 2.0, 0.15),
        false,
        "informational: the gating slope comes from the series route",
    );
    out.tables.push(mc);
    Ok(out)
}
