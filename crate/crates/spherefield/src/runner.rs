//! Batch runner: JSON run configs, validation with derived-quantity echoes,
//! experiment dispatch, and a run manifest.
//!
//! Repeating a run with the same config reproduces every result JSON and
//! CSV byte for byte; only the manifest timestamps move. The numerical
//! content is additionally invariant to the thread count, which enters the
//! outputs solely through the recorded config hash.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{
    run_experiment, ExperimentResult, ExperimentSpec, RunContext, TOOLKIT_VERSION,
};
use crate::output;
use crate::spectral::table::TableConfig;
use crate::spectral::{AngularPowerSpectrum, BandKind, ModelParams};

/// Environment variable consulted for the output directory when the CLI is
/// invoked without `--out`.
pub const OUT_DIR_ENV: &str = "SPHEREFIELD_OUT";

/// Fallback output directory when neither `--out` nor the environment
/// variable is set.
pub const OUT_DIR_FALLBACK: &str = "spherefield-runs";

/// A complete run description. The JSON form accepts any subset of fields
/// beyond `spectrum`; omissions take the documented defaults, and unknown
/// fields are rejected by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// The angular power spectrum, e.g. `{"alpha": 3.0}`.
    pub spectrum: AngularPowerSpectrum,
    /// Number of independent field components (default 1).
    #[serde(default = "default_d")]
    pub d: u32,
    /// Local-time level exponent, in `(0, gamma0)` (default 0.5).
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Regime bound: every experiment radius must lie in `(0, delta)`
    /// (default 0.08).
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Master seed (default 7).
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; omit for machine parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Covariance table resolution.
    #[serde(default)]
    pub table: TableConfig,
    /// Experiments to run, in order. Defaults to all ten.
    #[serde(default = "ExperimentSpec::all_defaults")]
    pub experiments: Vec<ExperimentSpec>,
}

fn default_d() -> u32 {
    1
}

fn default_gamma() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.08
}

fn default_seed() -> u64 {
    7
}

impl RunConfig {
    /// Read and parse a config file. Parse failures name the offending
    /// field or location.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form of this config (after any seed or
    /// thread overrides), so result provenance reflects what actually ran.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        Ok(hex)
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.spectrum.clone(), self.d, self.gamma)
    }

    fn effective_threads(&self) -> usize {
        self.threads.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}

/// Derived quantities echoed per distinct experiment radius.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusEcho {
    pub radius: f64,
    /// The scaling rate `rho_alpha(radius)`.
    pub rho: f64,
    /// Band limits `(L, U)` at this radius, when the band function is
    /// defined there.
    pub band: Option<(u32, u32)>,
}

/// Full validation result: the regime guards passed and these are the
/// derived quantities the run would use.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub alpha: f64,
    pub d: u32,
    pub gamma: f64,
    pub delta: f64,
    pub seed: u64,
    pub threads: usize,
    pub beta: f64,
    pub eta: f64,
    pub gamma0: f64,
    pub experiments: Vec<String>,
    pub radii: Vec<RadiusEcho>,
}

/// Validate a config without running anything: construct the model (regime
/// guards on alpha, d, gamma), check delta and threads, apply every
/// experiment's radius guard, and echo the derived quantities.
pub fn validate(cfg: &RunConfig) -> Result<ValidationReport> {
    let params = cfg.params()?;
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::Config(format!(
            "delta must lie in (0, 1), got {}",
            cfg.delta
        )));
    }
    if cfg.threads == Some(0) {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    if cfg.experiments.is_empty() {
        return Err(Error::Config("experiments list is empty".into()));
    }
    let mut radii: Vec<f64> = Vec::new();
    for spec in &cfg.experiments {
        let guarded = spec.guarded_radii();
        if !guarded.is_empty() {
            crate::experiments::guard_radii(spec.name(), &guarded, cfg.delta)?;
        }
        radii.extend(guarded);
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();

    // Echo band limits with the parameters of the configured band-limited
    // experiment where there is one, so the echo matches the run.
    let mut band_params = None;
    for spec in &cfg.experiments {
        if let ExperimentSpec::BandlimitedTail(c) = spec {
            let kind = crate::experiments::parse_band_kind(&c.b_kind)?;
            if band_params.is_none() {
                band_params = Some((
                    c.kappa1,
                    c.kappa2.unwrap_or_else(|| params.kappa2_default(c.kappa1)),
                    kind,
                ));
            }
        }
    }
    let (kappa1, kappa2, kind) =
        band_params.unwrap_or((0.5, params.kappa2_default(0.5), BandKind::LogLog));

    let radii = radii
        .into_iter()
        .map(|radius| RadiusEcho {
            radius,
            rho: params.rho(radius),
            band: params.band_limits(radius, kappa1, kappa2, kind).ok(),
        })
        .collect();

    Ok(ValidationReport {
        alpha: params.alpha(),
        d: params.d(),
        gamma: params.gamma(),
        delta: cfg.delta,
        seed: cfg.seed,
        threads: cfg.effective_threads(),
        beta: params.beta(),
        eta: params.eta(),
        gamma0: params.gamma0(),
        experiments: cfg.experiments.iter().map(|s| s.name().to_string()).collect(),
        radii,
    })
}

/// One manifest row per executed experiment; paths are relative to the
/// output directory.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub experiment: String,
    pub passed: bool,
    pub result: String,
    pub tables: Vec<String>,
    pub seconds: f64,
}

/// Written atomically at run end; every path it names exists by then.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub all_passed: bool,
    pub experiments: Vec<ManifestEntry>,
}

pub struct RunOutcome {
    pub all_passed: bool,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

/// Run every configured experiment and persist results under `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    run_with_progress(cfg, out_dir, |_, _| {})
}

/// As [`run`], invoking `on_done(result, seconds)` after each experiment.
pub fn run_with_progress(
    cfg: &RunConfig,
    out_dir: &Path,
    mut on_done: impl FnMut(&ExperimentResult, f64),
) -> Result<RunOutcome> {
    validate(cfg)?;
    let started_at = chrono::Utc::now();
    let hash = cfg.hash()?;
    let threads = cfg.effective_threads();
    let ctx = RunContext::new(
        cfg.params()?,
        cfg.seed,
        cfg.delta,
        threads,
        cfg.table.clone(),
    )?
    .with_config_hash(hash.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    fs::create_dir_all(out_dir)?;
    output::write_json(&out_dir.join("config.json"), cfg)?;

    let mut entries = Vec::with_capacity(cfg.experiments.len());
    let mut all_passed = true;
    for spec in &cfg.experiments {
        let clock = Instant::now();
        let result = pool.install(|| run_experiment(spec, &ctx))?;
        let seconds = clock.elapsed().as_secs_f64();
        let result_name = format!("{}.json", result.experiment);
        output::write_json(&out_dir.join(&result_name), &result)?;
        let mut tables = Vec::with_capacity(result.tables.len());
        for table in &result.tables {
            let table_name = format!("{}.{}.csv", result.experiment, table.name);
            output::write_csv(&out_dir.join(&table_name), table)?;
            tables.push(table_name);
        }
        all_passed &= result.passed;
        on_done(&result, seconds);
        entries.push(ManifestEntry {
            experiment: result.experiment.clone(),
            passed: result.passed,
            result: result_name,
            tables,
            seconds,
        });
    }

    let manifest = RunManifest {
        version: TOOLKIT_VERSION.to_string(),
        config_hash: hash,
        seed: cfg.seed,
        threads,
        started_at: started_at.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        all_passed,
        experiments: entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    output::write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome {
        all_passed,
        manifest,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> Result<RunConfig> {
        serde_json::from_str(json).map_err(Error::from)
    }

    #[test]
    fn minimal_config_takes_documented_defaults() {
        let cfg = config(r#"{"spectrum": {"alpha": 3.0}}"#).unwrap();
        assert_eq!(cfg.d, 1);
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.delta, 0.08);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.threads, None);
        assert_eq!(cfg.experiments.len(), 10);
    }

    #[test]
    fn unknown_fields_are_named() {
        let err = config(r#"{"spectrum": {"alpha": 3.0}, "sede": 9}"#).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
    }

    #[test]
    fn validation_echoes_derived_quantities() {
        let cfg = config(r#"{"spectrum": {"alpha": 3.0}, "gamma": 0.4}"#).unwrap();
        let report = validate(&cfg).unwrap();
        assert_eq!(report.beta, 3.0);
        assert!((report.eta - 1.1).abs() < 1e-12);
        assert_eq!(report.gamma0, 1.0);
        assert_eq!(report.experiments.len(), 10);
        assert!(!report.radii.is_empty());
        assert!(report.radii.windows(2).all(|w| w[0].radius > w[1].radius));
        for echo in &report.radii {
            assert!(echo.radius < cfg.delta);
            assert!(echo.rho > 0.0);
            if let Some((lo, hi)) = echo.band {
                assert!(lo < hi);
            }
        }
    }

    #[test]
    fn out_of_regime_alpha_cites_the_open_interval() {
        let err = config(r#"{"spectrum": {"alpha": 5.0}}"#).unwrap_err();
        assert!(err.to_string().contains("(2, 4)"), "{err}");
    }

    #[test]
    fn beta_guard_rejects_high_dimension() {
        let cfg = config(r#"{"spectrum": {"alpha": 3.0}, "d": 4}"#).unwrap();
        let err = validate(&cfg).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn out_of_regime_radius_is_named() {
        let cfg = config(
            r#"{"spectrum": {"alpha": 3.0},
                "experiments": [{"name": "chung-lil", "ladder": [0.01, 0.25]}]}"#,
        )
        .unwrap();
        let err = validate(&cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.25"), "{msg}");
        assert!(msg.contains("chung-lil"), "{msg}");
    }

    #[test]
    fn hash_tracks_effective_config() {
        let a = config(r#"{"spectrum": {"alpha": 3.0}}"#).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 8;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
