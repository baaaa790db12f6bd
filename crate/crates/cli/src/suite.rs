//! Canned experiment sets: `quick` for a smoke run, `full` for the
//! acceptance-scale parameters.

use crate::config::{EnsembleConfig, ExperimentConfig, Kind, PotentialKind};
use crate::manifest::Check;
use crate::run::{run, RunError};
use rmt_lab_core::ensemble::EntryLaw;
use rmt_lab_core::measure::MeasureSpec;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SuiteName {
    Quick,
    Full,
}

impl SuiteName {
    pub fn name(self) -> &'static str {
        match self {
            SuiteName::Quick => "quick",
            SuiteName::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub id: String,
    pub kind: String,
    pub passed: bool,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    /// True when some experiment failed with a runtime or config error.
    pub errored: bool,
    pub experiments: Vec<SuiteEntry>,
}

fn cfg(kind: Kind, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        ..ExperimentConfig::new(kind)
    }
}

fn with(mut c: ExperimentConfig, f: impl FnOnce(&mut ExperimentConfig)) -> ExperimentConfig {
    f(&mut c);
    c
}

fn th(c: &mut ExperimentConfig, pairs: &[(&str, f64)]) {
    for (k, v) in pairs {
        c.thresholds.insert(k.to_string(), *v);
    }
}

fn ens(beta: u32, n: usize, potential: PotentialKind) -> Option<EnsembleConfig> {
    Some(EnsembleConfig::new(beta, n, potential))
}

/// The experiment list of a suite, in run order.
pub fn experiments(name: SuiteName) -> Vec<(String, ExperimentConfig)> {
    let full = name == SuiteName::Full;
    let two_point = Some(MeasureSpec::two_point(0.5));
    let mut v: Vec<(&str, ExperimentConfig)> = vec![
        (
            "law_semicircle",
            with(cfg(Kind::Law, 1), |c| {
                c.params.expected_support = Some((-2.0, 2.0));
                c.params.classical_n = Some(100);
                th(c, &[("endpoint_tol", 1e-10), ("edge_exponent_tol", 0.05)]);
            }),
        ),
        (
            "law_two_point",
            with(cfg(Kind::Law, 2), |c| {
                c.measure = two_point.clone();
                th(c, &[("edge_exponent_tol", 0.05)]);
            }),
        ),
        (
            "law_jacobi",
            with(cfg(Kind::Law, 3), |c| {
                c.measure = Some(MeasureSpec::jacobi(0.5, 0.5));
                th(c, &[("edge_exponent_tol", 0.05)]);
            }),
        ),
    ];
    for (i, (m3, m4)) in [(0.0, 3.0), (0.2, 3.5), (0.0, 4.0)].into_iter().enumerate() {
        if !full && i > 0 {
            break;
        }
        let id = ["moments_gaussian_like", "moments_skewed", "moments_heavy"][i];
        v.push((
            id,
            with(cfg(Kind::Moments, 10 + i as u64), |c| {
                c.params.m3 = Some(m3);
                c.params.m4 = Some(m4);
                c.params.gamma = Some(0.1);
                th(c, &[("m4_tol", 0.5)]);
            }),
        ));
    }
    let (n_ll, s_ll) = if full { (1000, 100) } else { (200, 20) };
    v.push((
        "locallaw_two_point",
        with(cfg(Kind::Locallaw, 20), |c| {
            c.measure = two_point.clone();
            c.ensemble = ens(1, n_ll, PotentialKind::Quantile);
            c.samples = Some(s_ll);
            th(c, &[("median_dev_factor", 30.0), ("eta_ratio_max", 2.0)]);
        }),
    ));
    let (n_rg, n_rg2) = if full { (1000, 500) } else { (400, 200) };
    v.push((
        "rigidity_two_point",
        with(cfg(Kind::Rigidity, 30), |c| {
            c.measure = two_point.clone();
            c.ensemble = ens(1, n_rg, PotentialKind::Quantile);
            c.samples = Some(20);
            c.params.compare_n = Some(n_rg2);
            th(c, &[("quad_dev_factor", 10.0), ("exponent_tol", 0.3)]);
        }),
    ));
    let (n_dbm, s_dbm) = if full { (50, 2000) } else { (10, 200) };
    v.push((
        "dbm_two_point",
        with(cfg(Kind::Dbm, 40), |c| {
            c.measure = two_point.clone();
            c.ensemble = ens(1, n_dbm, PotentialKind::Quantile);
            c.samples = Some(s_dbm);
            c.params.t_end = Some(0.5);
            th(c, &[("z_max", 4.0)]);
        }),
    ));
    let (s_mc, s_ref) = if full { (10_000, 40_000) } else { (2000, 5000) };
    v.push((
        "beta_gue",
        with(cfg(Kind::Beta, 50), |c| {
            c.ensemble = ens(2, if full { 8 } else { 4 }, PotentialKind::Zero);
            c.samples = Some(s_mc);
            c.params.zero_potential = Some(true);
            c.params.reference_samples = Some(s_ref);
            th(c, &[("z_max", 3.0)]);
        }),
    ));
    let (n_gp, s_gp, ks) = if full { (1000, 200, 0.02) } else { (200, 50, 0.06) };
    v.push((
        "gaps_deformed_vs_goe",
        with(cfg(Kind::Gaps, 60), |c| {
            c.measure = two_point.clone();
            c.ensemble = ens(1, n_gp, PotentialKind::Quantile);
            c.samples = Some(s_gp);
            th(c, &[("ks_max", ks)]);
        }),
    ));
    v.push((
        "gaps_iid_rademacher_vs_goe",
        with(cfg(Kind::Gaps, 61), |c| {
            c.measure = two_point.clone();
            c.ensemble = Some(EnsembleConfig {
                entry_law: EntryLaw::Rademacher,
                ..EnsembleConfig::new(1, n_gp, PotentialKind::Iid)
            });
            c.samples = Some(s_gp);
            th(c, &[("ks_max", ks)]);
        }),
    ));
    v.push((
        "gaps_goe_vs_gue_control",
        with(cfg(Kind::Gaps, 62), |c| {
            c.ensemble = ens(1, n_gp, PotentialKind::Zero);
            c.params.reference = ens(2, n_gp, PotentialKind::Zero);
            c.samples = Some(s_gp);
            th(c, &[("ks_min", 0.05)]);
        }),
    ));
    let (n_pc, s_pc, b_pc, rms) = if full { (1000, 500, 0.1, 0.05) } else { (200, 100, 0.3, 0.1) };
    for (id, potential, seed) in [("paircorr_gue", PotentialKind::Zero, 70), ("paircorr_deformed_gue", PotentialKind::Quantile, 71)] {
        v.push((
            id,
            with(cfg(Kind::Paircorr, seed), |c| {
                c.measure = two_point.clone();
                c.ensemble = ens(2, n_pc, potential);
                c.samples = Some(s_pc);
                c.params.b = Some(b_pc);
                th(c, &[("rms_max", rms)]);
            }),
        ));
    }
    v.into_iter().map(|(id, c)| (id.to_string(), c)).collect()
}

/// Runs every experiment of the suite under `out/<id>` and writes
/// `out/suite_report.json`.
pub fn run_suite(name: SuiteName, out: &Path, verbose: bool) -> std::io::Result<SuiteReport> {
    std::fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for (id, c) in experiments(name) {
        let res = run(&c, &out.join(&id), None, Vec::new());
        let entry = match res {
            Ok(m) => SuiteEntry {
                id: id.clone(),
                kind: m.kind,
                passed: m.passed,
                wall_time_s: m.wall_time_s,
                checks: m.checks,
                error: None,
            },
            Err(e) => SuiteEntry {
                id: id.clone(),
                kind: c.kind.name().to_string(),
                passed: false,
                wall_time_s: 0.0,
                checks: Vec::new(),
                error: Some(match e {
                    RunError::Config(c) => c.to_string(),
                    other => other.to_string(),
                }),
            },
        };
        if verbose {
            eprintln!("{:<28} {}", entry.id, if entry.passed { "pass" } else { "FAIL" });
        }
        entries.push(entry);
    }
    let report = SuiteReport {
        suite: name.name().to_string(),
        passed: entries.iter().all(|e| e.passed),
        errored: entries.iter().any(|e| e.error.is_some()),
        experiments: entries,
    };
    std::fs::write(out.join("suite_report.json"), serde_json::to_string_pretty(&report).map_err(std::io::Error::other)? + "\n")?;
    Ok(report)
}
