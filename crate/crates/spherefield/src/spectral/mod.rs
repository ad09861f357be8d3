//! The angular power spectrum `C_l = G(l) l^{-alpha}` (2 < alpha < 4), its
//! Schoenberg covariance series, the variogram, and the derived exponents
//! and rate functions of the model.
//!
//! A normalized spectrum has unit total variance
//! `sum_l c C_l (2l+1)/(4 pi) = 1`; the normalizing scalar is computed with
//! the tail of the sum completed analytically (Hurwitz zeta), not by brute
//! truncation, so the unit-variance identity holds to full precision.

pub mod legendre;
pub mod table;
pub mod tail;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const FOUR_PI: f64 = 4.0 * PI;

/// Multiplier G in `C_l = G(l) l^{-alpha}`: constant one, or a finite table
/// of overrides; degrees beyond the table use G = 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    One,
    Table(Vec<(u32, f64)>),
}

impl Modulation {
    fn value(&self, l: u32) -> f64 {
        match self {
            Modulation::One => 1.0,
            Modulation::Table(entries) => entries
                .binary_search_by_key(&l, |e| e.0)
                .map(|i| entries[i].1)
                .unwrap_or(1.0),
        }
    }

    fn last_degree(&self) -> u32 {
        match self {
            Modulation::One => 0,
            Modulation::Table(entries) => entries.last().map(|e| e.0).unwrap_or(0),
        }
    }
}

/// Power spectrum of the model, with its normalization precomputed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpectrumSpec", into = "SpectrumSpec")]
pub struct AngularPowerSpectrum {
    alpha: f64,
    k0: f64,
    c0: f64,
    modulation: Modulation,
    normalize: bool,
    /// The scalar c applied to every C_l.
    norm_c: f64,
    /// Unnormalized total `sum_l C_l (2l+1) / (4 pi)`.
    mass_raw: f64,
}

/// JSON form of a spectrum:
/// `{"alpha": 3.0, "K0": 1.0, "G": "one" | {"table": [[l, g], ...]},
///   "C0": 0.0, "normalize": true}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub alpha: f64,
    #[serde(rename = "K0", default = "default_k0")]
    pub k0: f64,
    #[serde(rename = "G", default)]
    pub g: ModulationSpec,
    #[serde(rename = "C0", default)]
    pub c0: f64,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_k0() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModulationSpec {
    Named(String),
    Table { table: Vec<(u32, f64)> },
}

impl Default for ModulationSpec {
    fn default() -> Self {
        ModulationSpec::Named("one".to_owned())
    }
}

impl TryFrom<SpectrumSpec> for AngularPowerSpectrum {
    type Error = String;
    fn try_from(s: SpectrumSpec) -> std::result::Result<Self, String> {
        let modulation = match s.g {
            ModulationSpec::Named(name) if name == "one" => Modulation::One,
            ModulationSpec::Named(name) => {
                return Err(format!("unknown modulation \"{name}\"; expected \"one\" or a table"));
            }
            ModulationSpec::Table { table } => Modulation::Table(table),
        };
        AngularPowerSpectrum::new(s.alpha, s.k0, s.c0, modulation, s.normalize)
            .map_err(|e| e.to_string())
    }
}

impl From<AngularPowerSpectrum> for SpectrumSpec {
    fn from(s: AngularPowerSpectrum) -> Self {
        SpectrumSpec {
            alpha: s.alpha,
            k0: s.k0,
            g: match s.modulation {
                Modulation::One => ModulationSpec::Named("one".to_owned()),
                Modulation::Table(t) => ModulationSpec::Table { table: t },
            },
            c0: s.c0,
            normalize: s.normalize,
        }
    }
}

impl AngularPowerSpectrum {
    pub fn new(
        alpha: f64,
        k0: f64,
        c0: f64,
        modulation: Modulation,
        normalize: bool,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 2.0 || alpha >= 4.0 {
            return Err(Error::param(
                "alpha",
                format!("spectral exponent must lie strictly inside (2, 4), got {alpha}"),
            ));
        }
        if !k0.is_finite() || k0 < 1.0 {
            return Err(Error::param("K0", format!("bound K0 must be >= 1, got {k0}")));
        }
        if !c0.is_finite() || c0 < 0.0 {
            return Err(Error::param("C0", format!("C0 must be nonnegative, got {c0}")));
        }
        if let Modulation::Table(entries) = &modulation {
            let mut prev = 0u32;
            for &(l, g) in entries {
                if l < 1 {
                    return Err(Error::param("G", "table degrees must be >= 1"));
                }
                if l <= prev && prev != 0 {
                    return Err(Error::param("G", "table degrees must be strictly increasing"));
                }
                if !g.is_finite() || g < 1.0 / k0 || g > k0 {
                    return Err(Error::param(
                        "G",
                        format!("G({l}) = {g} violates the bound [1/K0, K0] = [{}, {}]", 1.0 / k0, k0),
                    ));
                }
                prev = l;
            }
        }
        let lt = modulation.last_degree();
        let mut raw = c0 / FOUR_PI;
        for l in 1..=lt {
            let lf = f64::from(l);
            raw += modulation.value(l) * lf.powf(-alpha) * (2.0 * lf + 1.0) / FOUR_PI;
        }
        raw += tail::raw_power_mass_tail(alpha, lt + 1) / FOUR_PI;
        let norm_c = if normalize { 1.0 / raw } else { 1.0 };
        Ok(AngularPowerSpectrum {
            alpha,
            k0,
            c0,
            modulation,
            normalize,
            norm_c,
            mass_raw: raw,
        })
    }

    /// The plain normalized power law: G = 1, K0 = 1, C0 = 0.
    pub fn power_law(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 0.0, Modulation::One, true)
    }

    /// Same modulation and normalization mode, different exponent.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.k0, self.c0, self.modulation.clone(), self.normalize)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn is_normalized(&self) -> bool {
        self.normalize
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }

    /// The scalar c multiplying every C_l.
    pub fn normalization(&self) -> f64 {
        self.norm_c
    }

    /// `c C_l`: the (normalized) coefficient variance at degree l.
    pub fn c_ell(&self, l: u32) -> f64 {
        if l == 0 {
            return self.norm_c * self.c0;
        }
        let lf = f64::from(l);
        self.norm_c * self.modulation.value(l) * lf.powf(-self.alpha)
    }

    /// Series weight `sigma_l = c C_l (2l+1) / (4 pi)`; the covariance is
    /// `sum_l sigma_l P_l(cos theta)` and the variance is `sum_l sigma_l`.
    pub fn sigma(&self, l: u32) -> f64 {
        self.c_ell(l) * (2.0 * f64::from(l) + 1.0) / FOUR_PI
    }

    /// `sigma_0 ..= sigma_lmax` as a dense slice (table-building hot path).
    pub fn sigma_slice(&self, lmax: u32) -> Vec<f64> {
        (0..=lmax).map(|l| self.sigma(l)).collect()
    }

    /// Total variance `sum_{l>=0} sigma_l`; exactly 1 for a normalized
    /// spectrum, up to the analytic-tail completion.
    pub fn total_mass(&self) -> f64 {
        self.norm_c * self.mass_raw
    }

    /// `sum_{l >= from} sigma_l`, with the unmodulated part of the tail
    /// evaluated analytically.
    pub fn mass_tail(&self, from: u32) -> f64 {
        if from == 0 {
            return self.total_mass();
        }
        let lt = self.modulation.last_degree();
        let mut raw = 0.0;
        if from <= lt {
            for l in from..=lt {
                let lf = f64::from(l);
                raw += self.modulation.value(l) * lf.powf(-self.alpha) * (2.0 * lf + 1.0);
            }
        }
        raw += tail::raw_power_mass_tail(self.alpha, from.max(lt + 1));
        self.norm_c * raw / FOUR_PI
    }

    /// `sum_{l=lmin..=lmax} sigma_l` (lmin >= 1), by analytic tail
    /// differencing.
    pub fn band_mass(&self, lmin: u32, lmax: u32) -> f64 {
        if lmin > lmax {
            return 0.0;
        }
        if lmin == 0 {
            return self.total_mass() - self.mass_tail(lmax + 1);
        }
        self.mass_tail(lmin) - self.mass_tail(lmax + 1)
    }

    /// Upper bound for G over all degrees `>= from` (tail envelopes).
    pub fn modulation_sup_beyond(&self, from: u32) -> f64 {
        match &self.modulation {
            Modulation::One => 1.0,
            Modulation::Table(entries) => {
                let mut sup: f64 = 1.0;
                for &(l, g) in entries {
                    if l >= from {
                        sup = sup.max(g);
                    }
                }
                sup
            }
        }
    }
}

/// How far to sum the covariance series and how much certified truncation
/// error to allow.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Absolute tolerance on the covariance value.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Hard cap on the truncation degree.
    #[serde(default = "default_cap")]
    pub cap: u32,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_cap() -> u32 {
    2_000_000
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tol: default_tol(),
            cap: default_cap(),
        }
    }
}

impl TruncationPolicy {
    pub fn absolute(tol: f64) -> Self {
        TruncationPolicy {
            tol,
            ..Self::default()
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
        return Err(Error::param("theta", format!("angle must lie in [0, pi], got {theta}")));
    }
    Ok(())
}

/// Covariance `sum_l sigma_l P_l(cos theta)` summed to the smallest degree
/// whose certified tail bound meets the policy tolerance.
///
/// At theta = 0 the series telescopes to the total spectral mass and is
/// returned exactly. Errors with `ToleranceUnreachable` when the policy
/// cannot be met at the degree cap.
pub fn covariance(
    spec: &AngularPowerSpectrum,
    theta: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Ok(spec.total_mass());
    }
    let u = tail::required_degree(spec, theta, policy.tol, policy.cap)?;
    let x = theta.cos().clamp(-1.0, 1.0);
    Ok(legendre::weighted_sum_fn(x, u, |l| spec.sigma(l)))
}

/// Variogram `E[(T0(x) - T0(y))^2] = 2 (variance - covariance)` at geodesic
/// angle theta; absolute error at most twice the policy tolerance.
pub fn variogram(
    spec: &AngularPowerSpectrum,
    theta: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let cov = covariance(spec, theta, policy)?;
    Ok((2.0 * (spec.total_mass() - cov)).max(0.0))
}

/// Series covariance with a certified absolute error bound. When the
/// requested tolerance is unreachable below the degree cap, the sum is taken
/// at the cap and the certified achievable bound is returned instead, so the
/// caller always knows the true error budget.
pub fn covariance_certified(
    spec: &AngularPowerSpectrum,
    theta: f64,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    match covariance(spec, theta, policy) {
        Ok(v) => Ok((v, policy.tol)),
        Err(Error::ToleranceUnreachable { achievable, .. }) => {
            // pad the achievable bound a whisker so the retry cannot ping-pong
            let relaxed = TruncationPolicy {
                tol: achievable * 1.0001,
                cap: policy.cap,
            };
            let v = covariance(spec, theta, &relaxed)?;
            Ok((v, achievable))
        }
        Err(e) => Err(e),
    }
}

/// Variogram with a certified error bound (twice the covariance bound).
pub fn variogram_certified(
    spec: &AngularPowerSpectrum,
    theta: f64,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let (cov, bound) = covariance_certified(spec, theta, policy)?;
    Ok(((2.0 * (spec.total_mass() - cov)).max(0.0), 2.0 * bound))
}

/// Exact finite sum `sum_{l=1}^{L} sigma_l (1 - P_l(cos theta))`.
pub fn appendix_partial_sum(spec: &AngularPowerSpectrum, l_top: u32, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if l_top == 0 {
        return Ok(0.0);
    }
    let x = theta.cos().clamp(-1.0, 1.0);
    let mut acc = spec.sigma(1) * (1.0 - x);
    let mut pm1 = 1.0;
    let mut p = x;
    for l in 2..=l_top {
        let lf = f64::from(l);
        let next = ((2.0 * lf - 1.0) * x * p - (lf - 1.0) * pm1) / lf;
        pm1 = p;
        p = next;
        acc += spec.sigma(l) * (1.0 - next);
    }
    Ok(acc)
}

/// Which slowly varying function drives the band split of the tail-field
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    #[serde(rename = "loglog")]
    LogLog,
    Log,
}

/// Model parameters: spectrum, component count, Hölder parameter, and the
/// derived exponents
/// `beta = 4 - (alpha-2) d`, `eta = beta/2 - (alpha-2) gamma`,
/// `gamma0 = min(beta / (2 (alpha-2)), 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct ModelParams {
    spectrum: AngularPowerSpectrum,
    d: u32,
    gamma: f64,
    beta: f64,
    eta: f64,
    gamma0: f64,
}

impl ModelParams {
    pub fn new(spectrum: AngularPowerSpectrum, d: u32, gamma: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::param("d", "component count must be at least 1"));
        }
        let alpha = spectrum.alpha();
        let beta = 4.0 - (alpha - 2.0) * f64::from(d);
        if beta <= 0.0 {
            return Err(Error::param(
                "d",
                format!("beta = 4 - (alpha - 2) d = {beta} must be positive; reduce d or alpha"),
            ));
        }
        let gamma0 = (beta / (2.0 * (alpha - 2.0))).min(1.0);
        if !gamma.is_finite() || gamma <= 0.0 || gamma >= gamma0 {
            return Err(Error::param(
                "gamma",
                format!("gamma must lie in (0, gamma0) = (0, {gamma0}), got {gamma}"),
            ));
        }
        let eta = beta / 2.0 - (alpha - 2.0) * gamma;
        Ok(ModelParams {
            spectrum,
            d,
            gamma,
            beta,
            eta,
            gamma0,
        })
    }

    pub fn spectrum(&self) -> &AngularPowerSpectrum {
        &self.spectrum
    }

    pub fn alpha(&self) -> f64 {
        self.spectrum.alpha()
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Rate function `rho_alpha(r) = r^{alpha/2 - 1}`.
    pub fn rho(&self, r: f64) -> f64 {
        rho_alpha(self.alpha(), r)
    }

    pub fn rho_sq(&self, r: f64) -> f64 {
        let v = self.rho(r);
        v * v
    }

    /// Modulus `phi(r) = r^2 / rho_alpha(r / sqrt(log log 1/r))^d`,
    /// defined for 0 < r < 1/e.
    pub fn chung_modulus(&self, r: f64) -> Result<f64> {
        let loglog = loglog_recip(r)?;
        let scaled = r / loglog.sqrt();
        Ok(r * r / self.rho(scaled).powi(self.d as i32))
    }

    /// Slowly varying band function `B(r)`: `(log log 1/r)^{kappa2}` or
    /// `(log 1/r)^{kappa2}`.
    pub fn band_b(&self, r: f64, kind: BandKind, kappa2: f64) -> Result<f64> {
        if !(kappa2 > 0.0) {
            return Err(Error::param("kappa2", format!("must be positive, got {kappa2}")));
        }
        match kind {
            BandKind::LogLog => Ok(loglog_recip(r)?.powf(kappa2)),
            BandKind::Log => {
                // require B > 1 so the band split L < U is honest
                loglog_recip(r)?;
                Ok((1.0 / r).ln().powf(kappa2))
            }
        }
    }

    /// Band split `L = floor(B^{-kappa1} / r)`, `U = floor(B^{1-kappa1} / r)`
    /// with `0 < kappa1 <= alpha/2 - 1`.
    pub fn band_limits(
        &self,
        r: f64,
        kappa1: f64,
        kappa2: f64,
        kind: BandKind,
    ) -> Result<(u32, u32)> {
        let alpha = self.alpha();
        if !(kappa1 > 0.0) || kappa1 > alpha / 2.0 - 1.0 {
            return Err(Error::param(
                "kappa1",
                format!("must satisfy 0 < kappa1 <= alpha/2 - 1 = {}, got {kappa1}", alpha / 2.0 - 1.0),
            ));
        }
        let b = self.band_b(r, kind, kappa2)?;
        let l = (b.powf(-kappa1) / r).floor();
        let u = (b.powf(1.0 - kappa1) / r).floor();
        if l < 1.0 {
            return Err(Error::param("r", format!("radius {r} too large: band start L = {l} < 1")));
        }
        if u >= f64::from(u32::MAX) || l >= u {
            return Err(Error::param("r", format!("degenerate band split L = {l}, U = {u}")));
        }
        Ok((l as u32, u as u32))
    }

    /// The kappa2 that balances `B^{kappa1 (4-alpha)} = (log log 1/r)^{alpha/2}`.
    pub fn kappa2_default(&self, kappa1: f64) -> f64 {
        let alpha = self.alpha();
        alpha / (2.0 * kappa1 * (4.0 - alpha))
    }
}

pub fn rho_alpha(alpha: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    r.powf(alpha / 2.0 - 1.0)
}

fn loglog_recip(r: f64) -> Result<f64> {
    let e_inv = (-1.0f64).exp();
    if !r.is_finite() || r <= 0.0 || r >= e_inv {
        return Err(Error::param(
            "r",
            format!("radius must lie in (0, 1/e) = (0, {e_inv:.6}), got {r}"),
        ));
    }
    Ok((1.0 / r).ln().ln())
}
