//! Experiment configuration: one JSON document per run.

use rmt_lab_core::beta::MCMC_MAX_N;
use rmt_lab_core::ensemble::{matched_entry_law, BetaClass, EnsembleSpec, EntryLaw, PotentialSpec, MAX_N};
use rmt_lab_core::localstats::{window_admissible, MIN_CORRELATION_SAMPLES, WINDOW_DELTA};
use rmt_lab_core::measure::{MeasureSpec, SpectralMeasure};
use rmt_lab_core::spectral::eta_floor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Law,
    Locallaw,
    Rigidity,
    Dbm,
    Beta,
    Gaps,
    Paircorr,
    Moments,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Law => "law",
            Kind::Locallaw => "locallaw",
            Kind::Rigidity => "rigidity",
            Kind::Dbm => "dbm",
            Kind::Beta => "beta",
            Kind::Gaps => "gaps",
            Kind::Paircorr => "paircorr",
            Kind::Moments => "moments",
        }
    }

    fn needs_ensemble(self) -> bool {
        !matches!(self, Kind::Law | Kind::Moments)
    }

    /// Threshold names a kind understands.
    fn thresholds(self) -> &'static [&'static str] {
        match self {
            Kind::Law => &["endpoint_tol", "edge_exponent_tol"],
            Kind::Locallaw => &["median_dev_factor", "eta_ratio_max"],
            Kind::Rigidity => &["quad_dev_factor", "exponent_tol"],
            Kind::Dbm => &["z_max"],
            Kind::Beta => &["z_max", "location_tol"],
            Kind::Gaps => &["ks_max", "ks_min"],
            Kind::Paircorr => &["rms_max"],
            Kind::Moments => &["m4_tol"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    /// V = 0.
    Zero,
    /// v_i = Q_ν((i − ½)/N).
    Quantile,
    /// iid draws from ν, fresh for every sample.
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// 1 (real symmetric) or 2 (complex Hermitian).
    pub beta: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "gaussian")]
    pub entry_law: EntryLaw,
    #[serde(default = "quantile")]
    pub potential: PotentialKind,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub t: f64,
}

fn gaussian() -> EntryLaw {
    EntryLaw::Gaussian
}

fn quantile() -> PotentialKind {
    PotentialKind::Quantile
}

impl EnsembleConfig {
    pub fn new(beta: u32, n: usize, potential: PotentialKind) -> Self {
        Self {
            beta,
            n,
            entry_law: EntryLaw::Gaussian,
            potential,
            t0: 0.0,
            t: 0.0,
        }
    }

    pub fn beta_class(&self) -> BetaClass {
        BetaClass::from_beta(self.beta).expect("validated beta")
    }

    pub fn spec(&self, measure: &MeasureSpec, seed: u64) -> EnsembleSpec {
        let potential = match self.potential {
            PotentialKind::Zero => PotentialSpec::Zero,
            PotentialKind::Quantile => PotentialSpec::Quantile { measure: measure.clone() },
            PotentialKind::Iid => PotentialSpec::Iid { measure: measure.clone(), seed: None },
        };
        EnsembleSpec {
            t0: self.t0,
            t: self.t,
            seed,
            ..EnsembleSpec::new(self.beta_class(), self.n, self.entry_law, potential)
        }
    }
}

/// Kind-specific parameters; every field is optional and falls back to a
/// documented default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// law: coupling θ (default: from the ensemble times, else 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// law: number of classical locations to export.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_n: Option<usize>,
    /// law: expected support [L−, L+] checked against `endpoint_tol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_support: Option<(f64, f64)>,
    /// locallaw: spectral parameters E (default −1, 0, 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    /// locallaw: η values (default 10/N, √(10/N), 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    /// rigidity: second size for the scaling-exponent fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_n: Option<usize>,
    /// dbm: flow time (default 0.5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// dbm: largest Euler step (default 1e-3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    /// beta: use U ≡ 0 instead of the potential built from the measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_potential: Option<bool>,
    /// beta: number of independent chains (default 4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    /// beta: matrices drawn for the GOE/GUE reference when U ≡ 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_samples: Option<usize>,
    /// gaps: offsets m (default [1]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<usize>>,
    /// gaps: reference ensemble (default: same β and N, V = 0, Gaussian).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<EnsembleConfig>,
    /// paircorr: window centre (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// paircorr: window half-width b (default N^{−1/4}).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// paircorr: bin width (default 0.1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dr: Option<f64>,
    /// paircorr: largest separation (default 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// paircorr: range for the RMS distance (default [0.2, 2]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_range: Option<(f64, f64)>,
    /// moments: target third and fourth moments and the Gaussian weight γ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub kind: Kind,
    /// The measure ν (default δ₀).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub params: Params,
    /// Named pass/fail thresholds; only configured ones are checked.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Field-level validation failures.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigInvalid {
    pub errors: Vec<(String, String)>,
}

impl fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config:")?;
        for (field, msg) in &self.errors {
            write!(f, "\n  {field}: {msg}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigInvalid {}

impl ConfigInvalid {
    pub fn single(field: &str, msg: impl Into<String>) -> Self {
        Self {
            errors: vec![(field.to_string(), msg.into())],
        }
    }
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            kind,
            measure: None,
            ensemble: None,
            samples: None,
            params: Params::default(),
            thresholds: BTreeMap::new(),
            out: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigInvalid> {
        serde_json::from_str(text).map_err(|e| ConfigInvalid::single("<document>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigInvalid> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigInvalid::single("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn measure_spec(&self) -> MeasureSpec {
        self.measure.clone().unwrap_or_else(MeasureSpec::delta0)
    }

    pub fn threshold(&self, name: &str) -> Option<f64> {
        self.thresholds.get(name).copied()
    }

    pub fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    /// Checks every cross-field constraint; `base` resolves relative
    /// measure sample paths.
    pub fn validate(&self, base: Option<&Path>) -> Result<SpectralMeasure, ConfigInvalid> {
        let mut errs: Vec<(String, String)> = Vec::new();
        let mut err = |f: &str, m: String| errs.push((f.to_string(), m));
        if self.schema != SCHEMA_VERSION {
            err("schema", format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema));
        }
        let nu = match self.measure_spec().build(base) {
            Ok(nu) => Some(nu),
            Err(e) => {
                err("measure", e.to_string());
                None
            }
        };
        for name in self.thresholds.keys() {
            if !self.kind.thresholds().contains(&name.as_str()) {
                err(
                    &format!("thresholds.{name}"),
                    format!("unknown for kind {}; expected one of {:?}", self.kind, self.kind.thresholds()),
                );
            }
        }
        if let Some(s) = self.samples {
            if s == 0 {
                err("samples", "must be positive".into());
            }
        }
        let ens = self.ensemble.as_ref();
        if self.kind.needs_ensemble() && ens.is_none() {
            err("ensemble", format!("required for kind {}", self.kind));
        }
        if let Some(e) = ens {
            validate_ensemble("ensemble", e, &mut err);
        }
        let p = &self.params;
        match self.kind {
            Kind::Law => {
                if let Some(th) = p.theta {
                    if !(th >= 0.0 && th.is_finite()) {
                        err("params.theta", "must be finite and nonnegative".into());
                    }
                }
                if let Some(n) = p.classical_n {
                    if n == 0 || n > MAX_N {
                        err("params.classical_n", format!("must lie in [1, {MAX_N}]"));
                    }
                }
                if self.threshold("endpoint_tol").is_some() && p.expected_support.is_none() {
                    err("params.expected_support", "required by thresholds.endpoint_tol".into());
                }
            }
            Kind::Locallaw => {
                if let Some(e) = ens {
                    let floor = eta_floor(e.n);
                    for (k, eta) in p.etas.iter().flatten().enumerate() {
                        if !(*eta >= floor * (1.0 - 1e-12) && *eta <= 3.0) {
                            err(&format!("params.etas[{k}]"), format!("{eta} outside [10/N = {floor}, 3]"));
                        }
                    }
                }
                if p.energies.as_ref().is_some_and(|v| v.is_empty()) {
                    err("params.energies", "must be non-empty".into());
                }
            }
            Kind::Rigidity => {
                if self.threshold("exponent_tol").is_some() && p.compare_n.is_none() {
                    err("params.compare_n", "required by thresholds.exponent_tol".into());
                }
                if let Some(n) = p.compare_n {
                    if n < 2 || n > MAX_N || ens.is_some_and(|e| e.n == n) {
                        err("params.compare_n", format!("must lie in [2, {MAX_N}] and differ from N"));
                    }
                }
            }
            Kind::Dbm => {
                if let Some(t) = p.t_end {
                    if !(t >= 0.0 && t.is_finite()) {
                        err("params.t_end", "must be finite and nonnegative".into());
                    }
                }
                if let Some(dt) = p.dt_max {
                    if !(dt > 0.0) {
                        err("params.dt_max", "must be positive".into());
                    }
                }
                if self.samples.is_some_and(|s| s < 2) {
                    err("samples", "at least 2 are needed for variances".into());
                }
            }
            Kind::Beta => {
                if let Some(e) = ens {
                    if e.n > MCMC_MAX_N {
                        err("ensemble.N", format!("the sampler is capped at N = {MCMC_MAX_N}"));
                    }
                }
                if p.chains == Some(0) {
                    err("params.chains", "must be positive".into());
                }
                if p.thin == Some(0) {
                    err("params.thin", "must be positive".into());
                }
                if self.threshold("z_max").is_some() && p.zero_potential != Some(true) {
                    err("thresholds.z_max", "the GOE/GUE reference exists only with params.zero_potential = true".into());
                }
            }
            Kind::Gaps => {
                if p.offsets.as_ref().is_some_and(|o| o.is_empty() || o.contains(&0)) {
                    err("params.offsets", "must be non-empty and positive".into());
                }
                if let Some(r) = &p.reference {
                    validate_ensemble("params.reference", r, &mut err);
                    if ens.is_some_and(|e| e.n != r.n) {
                        err("params.reference.N", "must equal ensemble.N".into());
                    }
                }
            }
            Kind::Paircorr => {
                if self.samples.is_some_and(|s| s < MIN_CORRELATION_SAMPLES) {
                    err("samples", format!("at least {MIN_CORRELATION_SAMPLES} are required"));
                }
                if let Some(e) = ens {
                    let b = p.b.unwrap_or_else(|| rmt_lab_core::localstats::default_window(e.n));
                    let random = e.potential == PotentialKind::Iid;
                    if !window_admissible(e.n, b, random, WINDOW_DELTA) {
                        let lower = if random { "N^{-1/2+delta}" } else { "N^{-1+delta}" };
                        err(
                            "params.b",
                            format!(
                                "window b = {b} violates the rule {lower} <= b <= N^{{-delta}} (delta = {WINDOW_DELTA}, N = {}){}",
                                e.n,
                                if random { "; random diagonals need b above N^{-1/2}" } else { "" }
                            ),
                        );
                    }
                }
                if p.dr.is_some_and(|d| !(d > 0.0)) {
                    err("params.dr", "must be positive".into());
                }
                if let Some((lo, hi)) = p.rms_range {
                    if !(lo >= 0.0 && hi > lo) {
                        err("params.rms_range", "must satisfy 0 <= lo < hi".into());
                    }
                }
            }
            Kind::Moments => match (p.m3, p.m4, p.gamma) {
                (Some(m3), Some(m4), Some(g)) => {
                    if let Err(e) = matched_entry_law(m3, m4, g) {
                        err("params", format!("targets (m3 = {m3}, m4 = {m4}, gamma = {g}) rejected: {e}"));
                    }
                }
                _ => err("params", "m3, m4 and gamma are required".into()),
            },
        }
        if errs.is_empty() {
            Ok(nu.expect("measure built"))
        } else {
            Err(ConfigInvalid { errors: errs })
        }
    }

    /// Canonical JSON of the effective config (keys sorted).
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        rmt_lab_core::canonical_json(&v)
    }
}

fn validate_ensemble(prefix: &str, e: &EnsembleConfig, err: &mut impl FnMut(&str, String)) {
    if BetaClass::from_beta(e.beta).is_err() {
        err(&format!("{prefix}.beta"), format!("{} must be 1 or 2", e.beta));
    }
    if e.n < 2 || e.n > MAX_N {
        err(&format!("{prefix}.N"), format!("{} must lie in [2, {MAX_N}]", e.n));
    }
    if !(e.t >= 0.0 && e.t0 >= 0.0 && e.t.is_finite() && e.t0.is_finite()) {
        err(&format!("{prefix}.t"), "times must be finite and nonnegative".into());
    }
    if let Err(x) = e.entry_law.sampler() {
        err(&format!("{prefix}.entry_law"), x.to_string());
    }
}
