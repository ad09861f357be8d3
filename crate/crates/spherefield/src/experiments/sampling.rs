//! Two independent sampling routes for the same band-limited field: exact
//! Cholesky draws from the covariance table, and spherical-harmonic
//! synthesis with independent N(0, c C_l) coefficients. Their first and
//! second moments at matched points must agree within Monte Carlo error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentResult, Purpose, RawTable, Result, RunContext};
use crate::gaussian::{sample_uniform_sphere, CovarianceMatrix};
use crate::geometry::SpherePoint;
use crate::synthesis::{draw_coefficients, SynthesisBasis};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Band limit of the compared field.
    pub lmax: u32,
    /// Number of matched evaluation points.
    pub points: usize,
    pub replicates: usize,
    /// Low band is `0..=band_split`, high band is `band_split+1..=lmax`.
    pub band_split: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            lmax: 80,
            points: 8,
            replicates: 10_000,
            band_split: 20,
        }
    }
}

struct Moments {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

fn moments(draws: &[Vec<f64>], n: usize) -> Moments {
    let r = draws.len() as f64;
    let mut mean = vec![0.0; n];
    for d in draws {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= r;
    }
    let mut cov = vec![vec![0.0; n]; n];
    for d in draws {
        for i in 0..n {
            let di = d[i] - mean[i];
            for j in 0..=i {
                cov[i][j] += di * (d[j] - mean[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            cov[i][j] /= r - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    Moments { mean, cov }
}

pub(super) fn run(cfg: &SamplingConfig, ctx: &RunContext) -> Result<ExperimentResult> {
    let mut out = ExperimentResult::new("sampling-agreement", ctx);
    if cfg.points < 2 {
        return Err(super::Error::Config(
            "sampling-agreement: need at least two matched points".into(),
        ));
    }
    if cfg.band_split + 1 >= cfg.lmax {
        return Err(super::Error::Config(format!(
            "sampling-agreement: band_split = {} leaves no high band below lmax = {}",
            cfg.band_split, cfg.lmax
        )));
    }
    let spec = ctx.params.spectrum();
    let n = cfg.points;
    let r = cfg.replicates;

    let points: Vec<SpherePoint> = (0..n)
        .map(|i| {
            let mut rng = ctx.rng("sampling-agreement", Purpose::PointSampling, i as u64, 0);
            sample_uniform_sphere(&mut rng)
        })
        .collect();

    let band_table = ctx.band_table(0, cfg.lmax)?;
    let exact_cov = CovarianceMatrix::from_points(band_table.as_ref(), &points)?;
    let basis = SynthesisBasis::build(&points, cfg.lmax)?;
    let full_table = ctx.full_table()?;
    let full_point = CovarianceMatrix::from_points(full_table.as_ref(), &points[..1])?;

    struct Rep {
        exact: Vec<f64>,
        spectral: Vec<f64>,
        low: Vec<f64>,
        high: Vec<f64>,
        full: f64,
    }
    let reps: Vec<Rep> = (0..r)
        .into_par_iter()
        .map(|rep| -> Result<Rep> {
            let mut g = ctx.rng("sampling-agreement", Purpose::GaussVector, rep as u64, 0);
            let exact = exact_cov.sample(&mut g);
            let full = full_point.sample(&mut g)[0];
            let mut c = ctx.rng("sampling-agreement", Purpose::Coefficients, rep as u64, 0);
            let coeffs = draw_coefficients(spec, cfg.lmax, &mut c);
            let spectral = basis.synthesize(&coeffs)?;
            let low = basis.synthesize_band(&coeffs, 0, cfg.band_split)?;
            let high = basis.synthesize_band(&coeffs, cfg.band_split + 1, cfg.lmax)?;
            Ok(Rep { exact, spectral, low, high, full })
        })
        .collect::<Result<_>>()?;

    let exact_draws: Vec<Vec<f64>> = reps.iter().map(|x| x.exact.clone()).collect();
    let spectral_draws: Vec<Vec<f64>> = reps.iter().map(|x| x.spectral.clone()).collect();
    let a = moments(&exact_draws, n);
    let b = moments(&spectral_draws, n);
    let rf = r as f64;

    let mut mean_z = 0.0f64;
    let mut var_z = 0.0f64;
    let mut cov_z = 0.0f64;
    let mut table = RawTable::new(
        "sampling_moments",
        &["i", "j", "exact", "spectral", "se_diff", "z", "kind"],
    );
    for i in 0..n {
        let se = ((a.cov[i][i] + b.cov[i][i]) / rf).sqrt();
        let z = (a.mean[i] - b.mean[i]) / se;
        mean_z = mean_z.max(z.abs());
        table.push(vec![i as f64, i as f64, a.mean[i], b.mean[i], se, z, 0.0]);
    }
    for i in 0..n {
        for j in 0..=i {
            let se_a = ((a.cov[i][i] * a.cov[j][j] + a.cov[i][j].powi(2)) / (rf - 1.0)).sqrt();
            let se_b = ((b.cov[i][i] * b.cov[j][j] + b.cov[i][j].powi(2)) / (rf - 1.0)).sqrt();
            let se = (se_a * se_a + se_b * se_b).sqrt();
            let z = (a.cov[i][j] - b.cov[i][j]) / se;
            if i == j {
                var_z = var_z.max(z.abs());
            } else {
                cov_z = cov_z.max(z.abs());
            }
            table.push(vec![
                i as f64,
                j as f64,
                a.cov[i][j],
                b.cov[i][j],
                se,
                z,
                if i == j { 1.0 } else { 2.0 },
            ]);
        }
    }
    out.check(
        "means agree at matched points",
        mean_z,
        "max |z| <= 3",
        mean_z <= 3.0,
        true,
        format!("{n} points, {r} replicates"),
    );
    out.check("variances agree at matched points", var_z, "max |z| <= 3", var_z <= 3.0, true, "");
    out.check(
        "covariances agree at matched points",
        cov_z,
        "max |z| <= 3",
        cov_z <= 3.0,
        true,
        format!("{} distinct pairs", n * (n - 1) / 2),
    );

    // normalization: the full spectrum carries unit variance
    let mass_err = (full_table.at_zero() - 1.0).abs();
    out.check(
        "total spectral mass is one",
        mass_err,
        "|mass - 1| <= 1e-9",
        mass_err <= 1e-9,
        true,
        "analytic tail completion",
    );
    let full_vals: Vec<f64> = reps.iter().map(|x| x.full).collect();
    let mean_f = crate::fit::mean(&full_vals);
    let var_f: f64 =
        full_vals.iter().map(|v| (v - mean_f) * (v - mean_f)).sum::<f64>() / (rf - 1.0);
    let z_full = (var_f - 1.0) / (var_f * (2.0 / (rf - 1.0)).sqrt());
    out.check(
        "sampled full-field variance is one",
        z_full.abs(),
        "|z| <= 3",
        z_full.abs() <= 3.0,
        true,
        format!("empirical variance {var_f:.4}"),
    );

    // disjoint multipole bands are uncorrelated
    let mut band_z = 0.0f64;
    for p in 0..n {
        let lows: Vec<f64> = reps.iter().map(|x| x.low[p]).collect();
        let highs: Vec<f64> = reps.iter().map(|x| x.high[p]).collect();
        let ml = crate::fit::mean(&lows);
        let mh = crate::fit::mean(&highs);
        let mut c = 0.0;
        let mut vl = 0.0;
        let mut vh = 0.0;
        for (l, h) in lows.iter().zip(&highs) {
            c += (l - ml) * (h - mh);
            vl += (l - ml) * (l - ml);
            vh += (h - mh) * (h - mh);
        }
        let corr = c / (vl.sqrt() * vh.sqrt());
        band_z = band_z.max(corr.abs() * rf.sqrt());
    }
    out.check(
        "disjoint bands uncorrelated",
        band_z,
        "max |corr| * sqrt(R) <= 3",
        band_z <= 3.0,
        true,
        format!("bands 0..={} and {}..={}", cfg.band_split, cfg.band_split + 1, cfg.lmax),
    );

    out.constant("max_mean_z", mean_z);
    out.constant("max_var_z", var_z);
    out.constant("max_cov_z", cov_z);
    out.constant("band_mass", band_table.at_zero());
    out.tables.push(table);
    Ok(out)
}
