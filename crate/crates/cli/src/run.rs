//! Experiment pipelines, one per kind.

use crate::config::{ConfigInvalid, EnsembleConfig, ExperimentConfig, Kind, PotentialKind};
use crate::manifest::{Check, RunManifest};
use rayon::prelude::*;
use rmt_lab_core::beta::{build_potential, mcmc_chains, McmcOptions, Potential, ZeroPotential};
use rmt_lab_core::dbm::{dbm_integrate, flow_agreement, matrix_flow_sample, DbmOptions, ParticleConfiguration};
use rmt_lab_core::ensemble::{gamma_max, interpolating_matrix_with, matched_entry_law, sample_wigner, tail_probabilities, EnsembleSpec, EntryLaw, PotentialSpec};
use rmt_lab_core::export::{write_classical_locations, write_json, write_law, write_local_law, write_rigidity};
use rmt_lab_core::freeconv::{law_at_time, theta_at, FreeConvolutionLaw, Side};
use rmt_lab_core::localstats::{
    bulk_indices, default_window, gap_distribution_distance, pair_correlation_unfolded, ComparisonReport, CorrelationEstimate, GapStatistics, Unfolder,
    BULK_ALPHA,
};
use rmt_lab_core::measure::SpectralMeasure;
use rmt_lab_core::spectral::{eigenvalues, local_law_scan, rigidity_report, SpectrumSample};
use rmt_lab_core::{seed, stats, LabError};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigInvalid),
    Stage { stage: String, error: LabError },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(c) => write!(f, "{c}"),
            RunError::Stage { stage, error } => write!(f, "stage `{stage}` failed: {error}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigInvalid> for RunError {
    fn from(c: ConfigInvalid) -> Self {
        RunError::Config(c)
    }
}

type RunResult<T> = Result<T, RunError>;

/// Tags a core error with the stage that raised it.
trait StageExt<T> {
    fn stage(self, name: &str) -> RunResult<T>;
}

impl<T> StageExt<T> for rmt_lab_core::Result<T> {
    fn stage(self, name: &str) -> RunResult<T> {
        self.map_err(|error| RunError::Stage {
            stage: name.to_string(),
            error,
        })
    }
}

impl<T> StageExt<T> for std::io::Result<T> {
    fn stage(self, name: &str) -> RunResult<T> {
        self.map_err(|e| RunError::Stage {
            stage: name.to_string(),
            error: e.into(),
        })
    }
}

/// Per-run state shared by the pipelines.
struct Run<'a> {
    cfg: &'a ExperimentConfig,
    nu: SpectralMeasure,
    out: PathBuf,
    experiment_seed: u64,
    seeds: BTreeMap<String, u64>,
    checks: Vec<Check>,
}

impl Run<'_> {
    fn seed(&mut self, stage: &str) -> u64 {
        let s = seed::derive_named(self.experiment_seed, stage);
        self.seeds.insert(stage.to_string(), s);
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensemble(&self) -> &EnsembleConfig {
        self.cfg.ensemble.as_ref().expect("validated: ensemble present")
    }

    fn check_le(&mut self, name: &str, value: f64) {
        if let Some(th) = self.cfg.threshold(name) {
            self.checks.push(Check::new(name, value, "<=", th));
        }
    }

    fn check_ge(&mut self, name: &str, value: f64) {
        if let Some(th) = self.cfg.threshold(name) {
            self.checks.push(Check::new(name, value, ">=", th));
        }
    }
}

/// Validates, executes and persists one experiment; `base` resolves relative
/// paths inside the measure spec. The manifest is written to `<out>/manifest.json`.
pub fn run(cfg: &ExperimentConfig, out: &Path, base: Option<&Path>, overrides: Vec<String>) -> RunResult<RunManifest> {
    let nu = cfg.validate(base)?;
    let start = Instant::now();
    std::fs::create_dir_all(out).stage("output")?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg).expect("config serializes") + "\n").stage("output")?;
    let mut r = Run {
        cfg,
        nu,
        out: out.to_path_buf(),
        experiment_seed: seed::derive_named(cfg.seed, cfg.kind.name()),
        seeds: BTreeMap::new(),
        checks: Vec::new(),
    };
    let results = match cfg.kind {
        Kind::Law => run_law(&mut r)?,
        Kind::Locallaw => run_locallaw(&mut r)?,
        Kind::Rigidity => run_rigidity(&mut r)?,
        Kind::Dbm => run_dbm(&mut r)?,
        Kind::Beta => run_beta(&mut r)?,
        Kind::Gaps => run_gaps(&mut r)?,
        Kind::Paircorr => run_paircorr(&mut r)?,
        Kind::Moments => run_moments(&mut r)?,
    };
    let manifest = RunManifest::new(cfg, r.seeds, overrides, results, r.checks, start.elapsed().as_secs_f64());
    manifest.write(out).stage("manifest")
}

fn endpoints_json(law: &FreeConvolutionLaw) -> Value {
    let ep = law.endpoints();
    json!({
        "theta": law.theta(),
        "L_minus": ep.l_minus,
        "L_plus": ep.l_plus,
        "zeta_minus": ep.zeta_minus,
        "zeta_plus": ep.zeta_plus,
    })
}

fn run_law(r: &mut Run) -> RunResult<Value> {
    let p = &r.cfg.params;
    let theta = p
        .theta
        .or_else(|| r.cfg.ensemble.as_ref().map(|e| theta_at(e.t0, e.t)))
        .unwrap_or(1.0);
    let law = FreeConvolutionLaw::solve(&r.nu, theta).stage("solve")?;
    write_law(&r.path("law.csv"), &law).stage("write")?;
    if let Some(n) = p.classical_n.or(r.cfg.ensemble.as_ref().map(|e| e.n)) {
        let gammas = law.classical_locations(n).stage("classical-locations")?;
        write_classical_locations(&r.path("classical_locations.csv"), &gammas).stage("write")?;
    }
    let ep = law.endpoints();
    let lower = law.edge_exponent(Side::Lower);
    let upper = law.edge_exponent(Side::Upper);
    if let Some((lo, hi)) = p.expected_support {
        r.check_le("endpoint_tol", (ep.l_minus - lo).abs().max((ep.l_plus - hi).abs()));
    }
    if r.cfg.threshold("edge_exponent_tol").is_some() {
        let (a, b) = (lower.clone().stage("edge-exponent")?, upper.clone().stage("edge-exponent")?);
        r.check_le("edge_exponent_tol", (a - 0.5).abs().max((b - 0.5).abs()));
    }
    let mut res = endpoints_json(&law);
    res["edge_exponent_lower"] = json!(lower.ok());
    res["edge_exponent_upper"] = json!(upper.ok());
    res["eta_floor"] = json!(law.eta_floor());
    Ok(res)
}

fn run_locallaw(r: &mut Run) -> RunResult<Value> {
    let e = r.ensemble().clone();
    let spec = e.spec(&r.cfg.measure_spec(), r.seed("samples"));
    let law = law_at_time(&r.nu, e.t0, e.t).stage("solve")?;
    let nf = e.n as f64;
    let energies = r.cfg.params.energies.clone().unwrap_or_else(|| vec![-1.0, 0.0, 1.0]);
    let etas = r.cfg.params.etas.clone().unwrap_or_else(|| default_etas(e.n));
    let report = local_law_scan(&spec, &law, &energies, &etas, r.cfg.samples_or(100)).stage("local-law")?;
    write_local_law(&r.path("local_law.csv"), &report).stage("write")?;
    let worst = report.points.iter().map(|p| p.median_dev).fold(0.0, f64::max);
    let ratio = energies
        .iter()
        .map(|&en| {
            let row: Vec<f64> = report.points.iter().filter(|p| p.e == en).map(|p| p.median_dev).collect();
            row.iter().fold(0.0f64, |a, &b| a.max(b)) / row.iter().fold(f64::INFINITY, |a, &b| a.min(b))
        })
        .fold(0.0, f64::max);
    // The factor threshold f means: max median ≤ f·log N.
    if let Some(f) = r.cfg.threshold("median_dev_factor") {
        r.checks.push(Check::new("median_dev_factor", worst / nf.ln(), "<=", f));
    }
    r.check_le("eta_ratio_max", ratio);
    Ok(json!({
        "N": e.n,
        "theta": report.theta,
        "max_median_dev": worst,
        "max_eta_ratio": ratio,
        "points": report.points,
    }))
}

/// Three η values spaced geometrically from the floor 10/N up to 1.
pub fn default_etas(n: usize) -> Vec<f64> {
    let lo = (10.0 / n as f64).min(1.0);
    vec![lo, lo.sqrt(), 1.0]
}

/// Classical locations to compare sample k against: shared for
/// deterministic diagonals, conditioned on the realized V otherwise.
fn realized(spec: &EnsembleSpec, e: &EnsembleConfig, k: u64, shared: Option<&FreeConvolutionLaw>) -> rmt_lab_core::Result<(SpectrumSample, FreeConvolutionLaw)> {
    let s = spec.for_sample(k);
    let v = s.potential_values()?;
    let ev = eigenvalues(&interpolating_matrix_with(&s, &v)?)?;
    let law = match shared {
        Some(l) => l.clone(),
        None => law_at_time(&SpectralMeasure::empirical(&v)?, e.t0, e.t)?,
    };
    Ok((ev, law))
}

/// The law shared by every sample, or None when V is redrawn per sample.
fn shared_law(spec: &EnsembleSpec, e: &EnsembleConfig) -> rmt_lab_core::Result<Option<FreeConvolutionLaw>> {
    if e.potential == PotentialKind::Iid {
        return Ok(None);
    }
    let v = spec.potential_values()?;
    Ok(Some(law_at_time(&SpectralMeasure::empirical(&v)?, e.t0, e.t)?))
}

fn run_rigidity(r: &mut Run) -> RunResult<Value> {
    let e = r.ensemble().clone();
    let samples = r.cfg.samples_or(20);
    let mut sizes = vec![e.n];
    sizes.extend(r.cfg.params.compare_n);
    let stage_seed = r.seed("samples");
    let mut w = csv::Writer::from_path(r.path("rigidity_samples.csv")).map_err(LabError::from).stage("write")?;
    w.write_record(["N", "sample", "quad_dev", "mean_square_dev", "max_scaled_dev"])
        .map_err(LabError::from)
        .stage("write")?;
    let mut per_n = Vec::new();
    for &n in &sizes {
        let ec = EnsembleConfig { n, ..e.clone() };
        let spec = ec.spec(&r.cfg.measure_spec(), seed::derive(stage_seed, n as u64));
        let shared = shared_law(&spec, &ec).stage("solve")?;
        let rows: Vec<(SpectrumSample, Vec<f64>, _)> = (0..samples as u64)
            .into_par_iter()
            .map(|k| {
                let (ev, law) = realized(&spec, &ec, k, shared.as_ref())?;
                let gammas = law.classical_locations(n)?;
                let rep = rigidity_report(&ev, &gammas)?;
                Ok((ev, gammas, rep))
            })
            .collect::<rmt_lab_core::Result<_>>()
            .stage("sample")?;
        for (k, (_, _, rep)) in rows.iter().enumerate() {
            w.write_record([n.to_string(), k.to_string(), rep.quad_dev.to_string(), rep.mean_square_dev().to_string(), rep.max_scaled_dev.to_string()])
                .map_err(LabError::from)
                .stage("write")?;
        }
        if n == e.n {
            let (ev, gammas, rep) = &rows[0];
            write_rigidity(&r.path("rigidity.csv"), &ev.eigenvalues, gammas, rep).stage("write")?;
        }
        let quad: Vec<f64> = rows.iter().map(|x| x.2.quad_dev).collect();
        let ms: Vec<f64> = rows.iter().map(|x| x.2.mean_square_dev()).collect();
        let maxd: Vec<f64> = rows.iter().map(|x| x.2.max_scaled_dev).collect();
        per_n.push((n, stats::median(&quad), stats::median(&ms), stats::median(&maxd)));
    }
    w.flush().map_err(LabError::from).stage("write")?;
    let (n0, q0, ms0, _) = per_n[0];
    if let Some(f) = r.cfg.threshold("quad_dev_factor") {
        r.checks.push(Check::new("quad_dev_factor", q0 / (n0 as f64).ln().powi(4), "<=", f));
    }
    let exponent = per_n.get(1).map(|&(n1, _, ms1, _)| (ms1 / ms0).ln() / (n1 as f64 / n0 as f64).ln());
    if let Some(x) = exponent {
        r.check_le("exponent_tol", (x + 2.0).abs());
    }
    Ok(json!({
        "samples": samples,
        "sizes": per_n.iter().map(|&(n, q, ms, md)| json!({
            "N": n, "median_quad_dev": q, "median_mean_square_dev": ms, "median_max_scaled_dev": md
        })).collect::<Vec<_>>(),
        "mean_square_dev_exponent": exponent,
    }))
}

fn run_dbm(r: &mut Run) -> RunResult<Value> {
    let e = r.ensemble().clone();
    let t_end = r.cfg.params.t_end.unwrap_or(if e.t > 0.0 { e.t } else { 0.5 });
    let spec = EnsembleConfig { t: 0.0, ..e.clone() }.spec(&r.cfg.measure_spec(), r.seed("flow"));
    let opts = DbmOptions {
        dt_max: r.cfg.params.dt_max.unwrap_or(1e-3),
        ..DbmOptions::default()
    };
    let report = flow_agreement(&spec, t_end, r.cfg.samples_or(2000), &opts).stage("agreement")?;
    write_json(&r.path("dbm_agreement.json"), &report).stage("write")?;
    // One recorded trajectory for inspection.
    let traj_seed = r.seed("trajectory");
    let h0 = matrix_flow_sample(&spec.for_sample(0), 0.0).stage("trajectory")?;
    let x0 = ParticleConfiguration::new(h0.eigenvalues, 0.0, e.beta_class()).stage("trajectory")?;
    let topts = DbmOptions {
        record_every: Some(t_end / 50.0),
        ..opts
    };
    if t_end > 0.0 {
        let tr = dbm_integrate(&x0, t_end, &topts, traj_seed).stage("trajectory")?;
        tr.write_csv(&r.path("trajectory.csv")).stage("write")?;
    }
    r.check_le("z_max", report.max_abs_z());
    Ok(json!({ "t": t_end, "max_abs_z": report.max_abs_z(), "rows": report.rows, "total_retries": report.total_retries }))
}

fn run_beta(r: &mut Run) -> RunResult<Value> {
    let e = r.ensemble().clone();
    let p = r.cfg.params.clone();
    let zero = p.zero_potential.unwrap_or(false);
    let model = if zero {
        None
    } else {
        Some(build_potential(&r.nu, e.t0, e.t).stage("potential")?)
    };
    let (u, law): (&dyn Potential, FreeConvolutionLaw) = match &model {
        Some(m) => {
            let (a, b) = m.support();
            m.write_csv(&r.path("potential.csv"), a - 1.0, b + 1.0, 401).stage("write")?;
            (m, m.law().clone())
        }
        None => (&ZeroPotential, FreeConvolutionLaw::solve(&SpectralMeasure::delta0(), 1.0).stage("solve")?),
    };
    let opts = McmcOptions {
        burn_in: p.burn_in.unwrap_or(2000),
        thin: p.thin.unwrap_or(2),
        ..McmcOptions::default()
    };
    let n = e.n;
    let beta = e.beta as f64;
    let n_chains = p.chains.unwrap_or(4);
    let chains = mcmc_chains(u, beta, n, r.cfg.samples_or(5000), n_chains, r.seed("chains"), &opts).stage("mcmc")?;
    let mut mean = vec![0.0; n];
    let mut var = vec![0.0; n];
    let c = chains.len() as f64;
    for (k, ch) in chains.iter().enumerate() {
        ch.write(&r.path(&format!("chain_{k}.csv"))).stage("write")?;
        let (m, s) = (ch.index_means(), ch.index_std_errs(40));
        for i in 0..n {
            mean[i] += m[i] / c;
            var[i] += s[i] * s[i] / (c * c);
        }
    }
    let gammas = law.classical_locations(n).stage("classical-locations")?;
    let loc_dev = mean.iter().zip(&gammas).map(|(m, g)| (m - g).abs()).fold(0.0, f64::max);
    r.check_le("location_tol", loc_dev);
    let mut res = json!({
        "N": n,
        "beta": beta,
        "index_means": mean,
        "index_std_errs": var.iter().map(|v| v.sqrt()).collect::<Vec<_>>(),
        "classical_locations": gammas,
        "max_location_dev": loc_dev,
        "diagnostics": chains.iter().map(|c| &c.diagnostics).collect::<Vec<_>>(),
    });
    if zero {
        let spec = EnsembleSpec {
            seed: r.seed("reference"),
            ..EnsembleSpec::new(e.beta_class(), n, EntryLaw::Gaussian, PotentialSpec::Zero)
        };
        let evs: Vec<Vec<f64>> = (0..p.reference_samples.unwrap_or(20_000) as u64)
            .into_par_iter()
            .map(|k| Ok(eigenvalues(&sample_wigner(&spec.for_sample(k))?)?.eigenvalues))
            .collect::<rmt_lab_core::Result<_>>()
            .stage("reference")?;
        let z: Vec<f64> = (0..n)
            .map(|i| {
                let col: Vec<f64> = evs.iter().map(|v| v[i]).collect();
                (mean[i] - stats::mean(&col)) / (var[i] + stats::std_err(&col).powi(2)).sqrt()
            })
            .collect();
        let zmax = z.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        r.check_le("z_max", zmax);
        res["reference_z"] = json!(z);
        res["max_abs_z"] = json!(zmax);
    }
    Ok(res)
}

fn gap_arm(spec: &EnsembleSpec, e: &EnsembleConfig, samples: usize, offsets: &[usize]) -> rmt_lab_core::Result<GapStatistics> {
    let shared = shared_law(spec, e)?;
    let max_m = offsets.iter().copied().max().unwrap_or(1);
    let (lo, hi) = bulk_indices(e.n, BULK_ALPHA);
    let window = (lo, hi.saturating_sub(max_m).max(lo));
    let parts: Vec<GapStatistics> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let (ev, law) = realized(spec, e, k, shared.as_ref())?;
            Unfolder::new(&law, e.n, window, offsets, BULK_ALPHA)?.apply(&ev.eigenvalues)
        })
        .collect::<rmt_lab_core::Result<_>>()?;
    GapStatistics::merge(parts)
}

fn run_gaps(r: &mut Run) -> RunResult<Value> {
    let e = r.ensemble().clone();
    let reference = r.cfg.params.reference.clone().unwrap_or(EnsembleConfig {
        potential: PotentialKind::Zero,
        entry_law: EntryLaw::Gaussian,
        ..e.clone()
    });
    let offsets = r.cfg.params.offsets.clone().unwrap_or_else(|| vec![1]);
    let samples = r.cfg.samples_or(200);
    let measure = r.cfg.measure_spec();
    let a = gap_arm(&e.spec(&measure, r.seed("arm_a")), &e, samples, &offsets).stage("arm-a")?;
    let b = gap_arm(&reference.spec(&measure, r.seed("arm_b")), &reference, samples, &offsets).stage("arm-b")?;
    a.write_csv(&r.path("gaps_a.csv")).stage("write")?;
    b.write_csv(&r.path("gaps_b.csv")).stage("write")?;
    let d = gap_distribution_distance(&a, &b);
    let report = ComparisonReport::new(d, r.cfg.threshold("ks_max"), r.cfg.threshold("ks_min"));
    report.write_json(&r.path("comparison.json")).stage("write")?;
    r.check_le("ks_max", d.ks);
    r.check_ge("ks_min", d.ks);
    Ok(json!({ "ks": d.ks, "wasserstein1": d.wasserstein1, "n_A": d.n_a, "n_B": d.n_b, "reference": reference }))
}

fn run_paircorr(r: &mut Run) -> RunResult<Value> {
    let e = r.ensemble().clone();
    let p = r.cfg.params.clone();
    let energy = p.energy.unwrap_or(0.0);
    let b = p.b.unwrap_or_else(|| default_window(e.n));
    let dr = p.dr.unwrap_or(0.1);
    let r_max = p.r_max.unwrap_or(3.0);
    let (r_lo, r_hi) = p.rms_range.unwrap_or((0.2, 2.0));
    let r_grid: Vec<f64> = (0..).map(|k| (k as f64 + 0.5) * dr).take_while(|&x| x <= r_max).collect();
    let spec = e.spec(&r.cfg.measure_spec(), r.seed("samples"));
    let shared = shared_law(&spec, &e).stage("solve")?;
    let nf = e.n as f64;
    let sets: Vec<(Vec<f64>, f64)> = (0..r.cfg.samples_or(500) as u64)
        .into_par_iter()
        .map(|k| {
            let (ev, law) = realized(&spec, &e, k, shared.as_ref())?;
            let (lm, lp) = law.support();
            if energy - b <= lm || energy + b >= lp {
                return Err(LabError::PreconditionViolated(format!("window [{}, {}] is not inside the bulk ({lm}, {lp})", energy - b, energy + b)));
            }
            let pts = ev
                .eigenvalues
                .iter()
                .filter(|&&x| (x - energy).abs() <= b)
                .map(|&x| nf * law.cdf(x))
                .collect();
            Ok((pts, nf * (law.cdf(energy + b) - law.cdf(energy - b))))
        })
        .collect::<rmt_lab_core::Result<_>>()
        .stage("sample")?;
    let (values, std_err, window_length, one_point, one_point_se) = pair_correlation_unfolded(&sets, &r_grid, dr).stage("correlation")?;
    let est = CorrelationEstimate {
        order: 2,
        e: energy,
        b,
        r_grid,
        bin_width: dr,
        values,
        std_err,
        samples: sets.len(),
        window_length,
        one_point,
        one_point_se,
    };
    est.write_csv(&r.path("pair_correlation.csv")).stage("write")?;
    let rms = est.rms_to_sine_kernel(r_lo, r_hi);
    r.check_le("rms_max", rms);
    Ok(json!({
        "E": energy, "b": b, "bin_width": dr, "rms_range": [r_lo, r_hi], "rms_to_sine_kernel": rms,
        "window_length": window_length, "one_point": one_point, "one_point_se": one_point_se, "samples": est.samples,
    }))
}

fn run_moments(r: &mut Run) -> RunResult<Value> {
    let p = &r.cfg.params;
    let (m3, m4, gamma) = (p.m3.unwrap_or(0.0), p.m4.unwrap_or(3.0), p.gamma.unwrap_or(0.1));
    let law = matched_entry_law(m3, m4, gamma).stage("match")?;
    let m = law.moments();
    let exact = m[0].abs().max((m[1] - 1.0).abs()).max((m[2] - m3).abs());
    r.checks.push(Check::new("m1_m3_exact", exact, "<=", 1e-10));
    r.check_le("m4_tol", (m[3] - m4).abs());
    let tails = tail_probabilities(&EntryLaw::Matched { m3, m4, gamma }, 200_000, r.seed("tails")).stage("tails")?;
    let res = json!({
        "target": [m3, m4],
        "gamma": gamma,
        "gamma_max": gamma_max(m3, m4),
        "atoms": law.atoms,
        "moments": m,
        "m4_constant": law.m4_constant(),
        "tail_probabilities": tails.iter().map(|(x, p)| json!({"x": x, "p": p})).collect::<Vec<_>>(),
    });
    write_json(&r.path("moments.json"), &res).stage("write")?;
    Ok(res)
}
