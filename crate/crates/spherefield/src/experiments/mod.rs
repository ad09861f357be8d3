//! Empirical verification experiments.
//!
//! Each experiment runs a deterministic or Monte Carlo study against a
//! pinned quantitative prediction and reports machine-checkable rows:
//! pass/fail checks, fitted exponents with bootstrap standard errors, and
//! raw replicate tables for offline scrutiny. Everything is reproducible
//! bit for bit from `(config, seed)`.

mod appendix;
mod bandlimited;
mod chung;
mod joint;
mod modulus;
mod moments;
mod sampling;
mod slnd;
mod small_ball;
mod variogram;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, tagged_seed, Purpose};
use crate::spectral::table::{CovarianceTable, TableConfig};
use crate::spectral::{AngularPowerSpectrum, BandKind, ModelParams};

pub(crate) use bandlimited::parse_kind as parse_band_kind;

pub use appendix::AppendixConfig;
pub use bandlimited::BandlimitedConfig;
pub use chung::ChungConfig;
pub use joint::JointConfig;
pub use modulus::ModulusConfig;
pub use moments::MomentsConfig;
pub use sampling::SamplingConfig;
pub use slnd::SlndConfig;
pub use small_ball::SmallBallConfig;
pub use variogram::VariogramConfig;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Registry of experiment names with one-line descriptions, in a stable
/// order used by the CLI `list` command.
pub const EXPERIMENT_NAMES: [(&str, &str); 10] = [
    (
        "variogram-scaling",
        "log-log slope of the variogram across an angle ladder, series and Monte Carlo",
    ),
    (
        "slnd",
        "strong local nondeterminism: conditional-variance ratios over random configurations",
    ),
    (
        "sampling-agreement",
        "spectral synthesis versus exact covariance sampling at matched points",
    ),
    (
        "small-ball",
        "lower tail of sup increments against the r^2 / eps^{4/(alpha-2)} predictor",
    ),
    (
        "chung-lil",
        "ratio stability of sup increments over a shrinking radius ladder",
    ),
    (
        "local-time-moments",
        "moment scaling of the local time at the origin level over shrinking disks",
    ),
    (
        "local-time-modulus",
        "maximum local time against the phi modulus across radii",
    ),
    (
        "joint-continuity",
        "local time increments in the level, the disk center, and section parameters",
    ),
    (
        "bandlimited-tail",
        "sup-increment tail of the band-complement field against its predictor",
    ),
    (
        "appendix-bounds",
        "partial-sum and tail envelopes of the truncated covariance series",
    ),
];

/// Which experiment to run, with its settings. The JSON form is internally
/// tagged: `{"name": "variogram-scaling", ...fields...}`; omitted fields
/// take documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ExperimentSpec {
    #[serde(rename = "variogram-scaling")]
    VariogramScaling(VariogramConfig),
    #[serde(rename = "slnd")]
    Slnd(SlndConfig),
    #[serde(rename = "sampling-agreement")]
    SamplingAgreement(SamplingConfig),
    #[serde(rename = "small-ball")]
    SmallBall(SmallBallConfig),
    #[serde(rename = "chung-lil")]
    ChungLil(ChungConfig),
    #[serde(rename = "local-time-moments")]
    LocalTimeMoments(MomentsConfig),
    #[serde(rename = "local-time-modulus")]
    LocalTimeModulus(ModulusConfig),
    #[serde(rename = "joint-continuity")]
    JointContinuity(JointConfig),
    #[serde(rename = "bandlimited-tail")]
    BandlimitedTail(BandlimitedConfig),
    #[serde(rename = "appendix-bounds")]
    AppendixBounds(AppendixConfig),
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::VariogramScaling(_) => "variogram-scaling",
            ExperimentSpec::Slnd(_) => "slnd",
            ExperimentSpec::SamplingAgreement(_) => "sampling-agreement",
            ExperimentSpec::SmallBall(_) => "small-ball",
            ExperimentSpec::ChungLil(_) => "chung-lil",
            ExperimentSpec::LocalTimeMoments(_) => "local-time-moments",
            ExperimentSpec::LocalTimeModulus(_) => "local-time-modulus",
            ExperimentSpec::JointContinuity(_) => "joint-continuity",
            ExperimentSpec::BandlimitedTail(_) => "bandlimited-tail",
            ExperimentSpec::AppendixBounds(_) => "appendix-bounds",
        }
    }

    /// Default configuration for a registered name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "variogram-scaling" => Ok(ExperimentSpec::VariogramScaling(Default::default())),
            "slnd" => Ok(ExperimentSpec::Slnd(Default::default())),
            "sampling-agreement" => Ok(ExperimentSpec::SamplingAgreement(Default::default())),
            "small-ball" => Ok(ExperimentSpec::SmallBall(Default::default())),
            "chung-lil" => Ok(ExperimentSpec::ChungLil(Default::default())),
            "local-time-moments" => Ok(ExperimentSpec::LocalTimeMoments(Default::default())),
            "local-time-modulus" => Ok(ExperimentSpec::LocalTimeModulus(Default::default())),
            "joint-continuity" => Ok(ExperimentSpec::JointContinuity(Default::default())),
            "bandlimited-tail" => Ok(ExperimentSpec::BandlimitedTail(Default::default())),
            "appendix-bounds" => Ok(ExperimentSpec::AppendixBounds(Default::default())),
            other => Err(Error::Config(format!("unknown experiment name '{other}'"))),
        }
    }

    /// All ten experiments with default settings, in registry order.
    pub fn all_defaults() -> Vec<Self> {
        EXPERIMENT_NAMES
            .iter()
            .map(|(name, _)| Self::from_name(name).expect("registry names are valid"))
            .collect()
    }

    /// The radius-like quantities (geodesic radii or angles) this experiment
    /// requires to lie strictly inside `(0, delta)`. Validation rejects a
    /// config exactly when one of these falls outside the regime, matching
    /// the guard the experiment itself applies at run time.
    pub fn guarded_radii(&self) -> Vec<f64> {
        match self {
            ExperimentSpec::VariogramScaling(c) => {
                c.thetas.iter().chain(&c.mc_thetas).copied().collect()
            }
            ExperimentSpec::Slnd(c) => vec![c.r_lo],
            ExperimentSpec::SamplingAgreement(_) => Vec::new(),
            ExperimentSpec::SmallBall(c) => c.radii.clone(),
            ExperimentSpec::ChungLil(c) => c.ladder.clone(),
            ExperimentSpec::LocalTimeMoments(c) => c.radii.clone(),
            ExperimentSpec::LocalTimeModulus(c) => c.radii.clone(),
            ExperimentSpec::JointContinuity(c) => vec![c.disk_radius],
            ExperimentSpec::BandlimitedTail(c) => c.radii.clone(),
            ExperimentSpec::AppendixBounds(_) => Vec::new(),
        }
    }
}

/// Run one experiment against a prepared context.
pub fn run_experiment(spec: &ExperimentSpec, ctx: &RunContext) -> Result<ExperimentResult> {
    match spec {
        ExperimentSpec::VariogramScaling(c) => variogram::run(c, ctx),
        ExperimentSpec::Slnd(c) => slnd::run(c, ctx),
        ExperimentSpec::SamplingAgreement(c) => sampling::run(c, ctx),
        ExperimentSpec::SmallBall(c) => small_ball::run(c, ctx),
        ExperimentSpec::ChungLil(c) => chung::run(c, ctx),
        ExperimentSpec::LocalTimeMoments(c) => moments::run(c, ctx),
        ExperimentSpec::LocalTimeModulus(c) => modulus::run(c, ctx),
        ExperimentSpec::JointContinuity(c) => joint::run(c, ctx),
        ExperimentSpec::BandlimitedTail(c) => bandlimited::run(c, ctx),
        ExperimentSpec::AppendixBounds(c) => appendix::run(c, ctx),
    }
}

/// One pass/fail criterion. `gating` rows decide the experiment verdict;
/// informational rows record context without affecting it.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub observed: f64,
    pub target: String,
    pub passed: bool,
    pub gating: bool,
    pub note: String,
}

/// A fitted exponent. `stderr` is a bootstrap standard error where the fit
/// is stochastic and zero for deterministic fits.
#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub name: String,
    pub slope: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

/// Raw numeric table destined for a CSV file next to the JSON result.
#[derive(Debug, Clone, Serialize)]
pub struct RawTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        RawTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub alpha: f64,
    pub d: u32,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<CheckRow>,
    pub fits: Vec<FitRow>,
    pub constants: BTreeMap<String, f64>,
    pub tables: Vec<RawTable>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    fn new(name: &str, ctx: &RunContext) -> Self {
        ExperimentResult {
            experiment: name.to_string(),
            passed: true,
            checks: Vec::new(),
            fits: Vec::new(),
            constants: BTreeMap::new(),
            tables: Vec::new(),
            provenance: ctx.provenance(),
        }
    }

    fn check(
        &mut self,
        name: impl Into<String>,
        observed: f64,
        target: impl Into<String>,
        passed: bool,
        gating: bool,
        note: impl Into<String>,
    ) {
        if gating && !passed {
            self.passed = false;
        }
        self.checks.push(CheckRow {
            name: name.into(),
            observed,
            target: target.into(),
            passed,
            gating,
            note: note.into(),
        });
    }

    fn fit(&mut self, name: impl Into<String>, slope: f64, stderr: f64, r_squared: f64) {
        self.fits.push(FitRow {
            name: name.into(),
            slope,
            stderr,
            r_squared,
        });
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }
}

/// Shared run state: model parameters, master seed, regime bound, thread
/// count, table resolution, and a cache of built covariance tables so
/// repeated experiments share the expensive Legendre sweeps.
pub struct RunContext {
    pub params: ModelParams,
    pub seed: u64,
    pub delta: f64,
    pub threads: usize,
    pub table: TableConfig,
    pub config_hash: String,
    cache: TableCache,
}

impl RunContext {
    pub fn new(
        params: ModelParams,
        seed: u64,
        delta: f64,
        threads: usize,
        table: TableConfig,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(RunContext {
            params,
            seed,
            delta,
            threads,
            table,
            config_hash: "unspecified".to_string(),
            cache: TableCache::default(),
        })
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    /// The full-spectrum covariance table at the configured resolution,
    /// built once and shared.
    pub fn full_table(&self) -> Result<Arc<CovarianceTable>> {
        self.cache.full(self.params.spectrum(), &self.table)
    }

    /// A band table `lmin ..= lmax` of the run spectrum.
    pub fn band_table(&self, lmin: u32, lmax: u32) -> Result<Arc<CovarianceTable>> {
        self.cache
            .band(self.params.spectrum(), lmin, lmax, self.table.knots)
    }

    /// Stream for `(experiment, purpose, replicate, component)`; experiments
    /// never share streams even at equal replicate indices.
    pub fn rng(
        &self,
        experiment: &str,
        purpose: Purpose,
        replicate: u64,
        component: u64,
    ) -> ChaCha12Rng {
        stream(tagged_seed(self.seed, experiment), purpose, replicate, component)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            version: TOOLKIT_VERSION.to_string(),
            alpha: self.params.alpha(),
            d: self.params.d(),
            gamma: self.params.gamma(),
        }
    }
}

#[derive(Default)]
struct TableCache {
    map: Mutex<BTreeMap<String, Arc<CovarianceTable>>>,
}

impl TableCache {
    fn full(
        &self,
        spec: &AngularPowerSpectrum,
        config: &TableConfig,
    ) -> Result<Arc<CovarianceTable>> {
        let key = format!(
            "full|{}|{}|{}",
            spectrum_key(spec)?,
            config.knots,
            config.degree
        );
        self.get_or_build(key, || CovarianceTable::build_full(spec, config))
    }

    fn band(
        &self,
        spec: &AngularPowerSpectrum,
        lmin: u32,
        lmax: u32,
        knots: usize,
    ) -> Result<Arc<CovarianceTable>> {
        let key = format!("band|{}|{}|{}|{}", spectrum_key(spec)?, knots, lmin, lmax);
        self.get_or_build(key, || CovarianceTable::build_band(spec, lmin, lmax, knots))
    }

    fn get_or_build(
        &self,
        key: String,
        build: impl FnOnce() -> Result<CovarianceTable>,
    ) -> Result<Arc<CovarianceTable>> {
        // the lock is held across the build on purpose: a second caller for
        // the same key waits instead of duplicating seconds of work
        let mut map = self.map.lock().expect("table cache poisoned");
        if let Some(t) = map.get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(build()?);
        map.insert(key, Arc::clone(&table));
        Ok(table)
    }
}

fn spectrum_key(spec: &AngularPowerSpectrum) -> Result<String> {
    Ok(serde_json::to_string(spec)?)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub(crate) fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Refuse any ladder entry at or beyond the small-radius regime bound.
pub(crate) fn guard_radii(name: &str, radii: &[f64], delta: f64) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Config(format!("{name}: empty radius ladder")));
    }
    for &r in radii {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Config(format!("{name}: radius {r} must be positive")));
        }
        if r >= delta {
            return Err(Error::Config(format!(
                "{name}: radius {r} is not below delta = {delta}; shrink the ladder or raise delta"
            )));
        }
    }
    Ok(())
}

/// Largest pairwise Euclidean distance among `n` field values with `d`
/// components, component-major. For scalar fields this is max minus min.
pub(crate) fn pair_sup(components: &[Vec<f64>]) -> f64 {
    let n = components[0].len();
    if components.len() == 1 {
        let vs = &components[0];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in vs {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        return hi - lo;
    }
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            let mut s = 0.0;
            for comp in components {
                let dv = comp[i] - comp[j];
                s += dv * dv;
            }
            best = best.max(s);
        }
    }
    best.sqrt()
}

/// Largest Euclidean norm among `n` field values (for increment fields
/// already pinned at a base point), component-major.
pub(crate) fn centered_sup(components: &[Vec<f64>]) -> f64 {
    let n = components[0].len();
    let mut best = 0.0f64;
    for i in 0..n {
        let mut s = 0.0;
        for comp in components {
            s += comp[i] * comp[i];
        }
        best = best.max(s);
    }
    best.sqrt()
}

/// Shorthand: `|observed - target| <= tol`.
pub(crate) fn within(observed: f64, target: f64, tol: f64) -> bool {
    (observed - target).abs() <= tol
}

pub(crate) fn band_kind_label(kind: BandKind) -> &'static str {
    match kind {
        BandKind::LogLog => "loglog",
        BandKind::Log => "log",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_round_trip() {
        for (name, _) in EXPERIMENT_NAMES {
            let spec = ExperimentSpec::from_name(name).unwrap();
            assert_eq!(spec.name(), name);
            let json = serde_json::to_string(&spec).unwrap();
            assert!(json.contains(&format!("\"name\":\"{name}\"")));
            let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back.name(), name);
        }
        assert!(ExperimentSpec::from_name("no-such-experiment").is_err());
    }

    #[test]
    fn spec_json_defaults_fill_in() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"name": "variogram-scaling"}"#).unwrap();
        match spec {
            ExperimentSpec::VariogramScaling(c) => assert!(!c.alphas.is_empty()),
            _ => panic!("wrong variant"),
        }
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"name": "chung-lil", "replicates": 7}"#).unwrap();
        match spec {
            ExperimentSpec::ChungLil(c) => assert_eq!(c.replicates, 7),
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn radius_guard_names_the_offender() {
        let err = guard_radii("chung-lil", &[0.01, 0.2], 0.05).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.2"), "message should name the radius: {msg}");
        assert!(msg.contains("chung-lil"));
        assert!(guard_radii("x", &[0.01, 0.02], 0.05).is_ok());
    }

    #[test]
    fn log_spacing_hits_both_ends() {
        let v = log_spaced(1e-3, 2e-2, 12);
        assert_eq!(v.len(), 12);
        assert!((v[0] - 1e-3).abs() < 1e-15);
        assert!((v[11] - 2e-2).abs() < 1e-15);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn sup_helpers_agree_on_scalars() {
        let comps = vec![vec![0.3, -0.5, 1.1, 0.0]];
        assert!((pair_sup(&comps) - 1.6).abs() < 1e-15);
        assert!((centered_sup(&comps) - 1.1).abs() < 1e-15);
        // two components: pair sup is the diagonal of the value rectangle
        let comps2 = vec![vec![0.0, 3.0], vec![0.0, 4.0]];
        assert!((pair_sup(&comps2) - 5.0).abs() < 1e-15);
        assert!((centered_sup(&comps2) - 5.0).abs() < 1e-15);
    }
}
