//! Dyson Brownian motion: the particle SDE, the exact matrix
//! Ornstein–Uhlenbeck flow, and their cross-validation.

use crate::ensemble::{interpolating_matrix_with, BetaClass, EnsembleSpec};
use crate::error::{LabError, Result};
use crate::freeconv::law_at_time;
use crate::measure::SpectralMeasure;
use crate::seed::{self, LabRng};
use crate::spectral::{eigenvalues, SpectrumSample};
use crate::stats;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// Ordered configuration in the Weyl chamber.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleConfiguration {
    pub x: Vec<f64>,
    pub t: f64,
    pub beta: BetaClass,
}

impl ParticleConfiguration {
    pub fn new(x: Vec<f64>, t: f64, beta: BetaClass) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("particle positions".into()));
        }
        if !is_strictly_ordered(&x) {
            return Err(LabError::PreconditionViolated("particles must be strictly increasing".into()));
        }
        Ok(Self { x, t, beta })
    }

    pub fn min_gap(&self) -> f64 {
        min_gap(&self.x)
    }
}

fn is_strictly_ordered(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

fn min_gap(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbmOptions {
    pub dt_max: f64,
    /// c in δ ≤ c·(min gap)²·N.
    pub gap_factor: f64,
    pub max_halvings: u32,
    /// Test hook: drop the Brownian term.
    pub zero_noise: bool,
    /// Record a frame whenever this much time has elapsed (None: final only).
    pub record_every: Option<f64>,
}

impl Default for DbmOptions {
    fn default() -> Self {
        Self {
            dt_max: 1e-3,
            gap_factor: 0.1,
            max_halvings: 20,
            zero_noise: false,
            record_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub frames: Vec<ParticleConfiguration>,
    pub steps: u64,
    /// Number of rejected (crossing) proposals.
    pub retries: u64,
}

impl Trajectory {
    pub fn last(&self) -> &ParticleConfiguration {
        self.frames.last().expect("trajectory holds at least the initial frame")
    }

    /// CSV (t, x_1, …, x_N).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = self.frames.first().map_or(0, |f| f.x.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for f in &self.frames {
            let mut row = vec![f.t.to_string()];
            row.extend(f.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// −x_i/2 + (1/N) Σ_{j≠i} 1/(x_i − x_j).
pub fn dbm_drift(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    let mut d: Vec<f64> = x.iter().map(|v| -0.5 * v).collect();
    for i in 0..n {
        let mut s = 0.0;
        for j in i + 1..n {
            let r = 1.0 / (x[i] - x[j]);
            s += r;
            d[j] -= inv_n * r;
        }
        d[i] += inv_n * s;
    }
    d
}

struct Integrator<'a> {
    sigma: f64,
    opts: &'a DbmOptions,
    rngs: Vec<LabRng>,
    retries: u64,
    t: f64,
}

impl Integrator<'_> {
    fn gaussians(&mut self, scale: f64) -> Vec<f64> {
        self.rngs
            .iter_mut()
            .map(|r| {
                let g: f64 = StandardNormal.sample(r);
                scale * g
            })
            .collect()
    }

    /// One accepted Euler–Maruyama step of size at most `delta`; a proposal
    /// that breaks the ordering is redrawn at half the step.
    fn step(&mut self, x: &mut Vec<f64>, mut delta: f64) -> Result<()> {
        let drift = dbm_drift(x);
        for halvings in 0..=self.opts.max_halvings {
            let db = if self.sigma == 0.0 { vec![0.0; x.len()] } else { self.gaussians(delta.sqrt()) };
            let y: Vec<f64> = x.iter().zip(&drift).zip(&db).map(|((xi, di), bi)| xi + delta * di + self.sigma * bi).collect();
            if is_strictly_ordered(&y) && y.iter().all(|v| v.is_finite()) {
                *x = y;
                self.t += delta;
                return Ok(());
            }
            if halvings < self.opts.max_halvings {
                self.retries += 1;
                delta /= 2.0;
            }
        }
        Err(LabError::StepCollapse {
            halvings: self.opts.max_halvings as usize,
            t: self.t,
        })
    }
}

/// Integrates dλ_i = √(2/(βN)) db_i + (−λ_i/2 + (1/N)Σ_{j≠i} 1/(λ_i−λ_j)) dt to t_end.
pub fn dbm_integrate(x0: &ParticleConfiguration, t_end: f64, opts: &DbmOptions, seed: u64) -> Result<Trajectory> {
    if !(opts.dt_max > 0.0 && opts.dt_max <= 1e-3) {
        return Err(LabError::PreconditionViolated(format!("dt_max = {} must lie in (0, 1e-3]", opts.dt_max)));
    }
    if !is_strictly_ordered(&x0.x) || x0.x.iter().any(|v| !v.is_finite()) {
        return Err(LabError::PreconditionViolated("initial configuration must be finite and strictly increasing".into()));
    }
    if !(t_end >= x0.t) {
        return Err(LabError::PreconditionViolated(format!("t_end = {t_end} precedes the start time {}", x0.t)));
    }
    let n = x0.x.len();
    let sigma = if opts.zero_noise { 0.0 } else { (2.0 / (x0.beta.beta() * n as f64)).sqrt() };
    let mut integ = Integrator {
        sigma,
        opts,
        rngs: (0..n as u64).map(|i| seed::rng(seed::derive(seed, i))).collect(),
        retries: 0,
        t: x0.t,
    };
    let mut x = x0.x.clone();
    let mut frames = vec![x0.clone()];
    let mut next_record = opts.record_every.map(|r| x0.t + r);
    let mut steps = 0u64;
    while t_end - integ.t > 1e-15 * t_end.abs().max(1.0) {
        let cap = if n > 1 { opts.gap_factor * min_gap(&x).powi(2) * n as f64 } else { f64::INFINITY };
        let delta = opts.dt_max.min(cap).min(t_end - integ.t);
        integ.step(&mut x, delta)?;
        steps += 1;
        if let (Some(nr), Some(every)) = (next_record, opts.record_every) {
            if integ.t >= nr {
                frames.push(ParticleConfiguration { x: x.clone(), t: integ.t, beta: x0.beta });
                next_record = Some(nr + every);
            }
        }
    }
    let last = ParticleConfiguration { x, t: t_end, beta: x0.beta };
    if frames.last().map(|f| f.t) != Some(t_end) || frames.len() == 1 {
        frames.push(last);
    }
    Ok(Trajectory {
        frames,
        steps,
        retries: integ.retries,
    })
}

/// Spectrum of e^{−(t−t0)/2}V + e^{−t/2}W + √(1−e^{−t})W′, sampled exactly.
pub fn matrix_flow_sample(spec: &EnsembleSpec, t: f64) -> Result<SpectrumSample> {
    if !(t >= 0.0) {
        return Err(LabError::PreconditionViolated(format!("time t = {t} must be nonnegative")));
    }
    let s = EnsembleSpec { t, ..spec.clone() };
    let v = s.potential_values()?;
    eigenvalues(&interpolating_matrix_with(&s, &v)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub statistic: String,
    pub mean_dbm: f64,
    pub mean_matrix: f64,
    pub var_dbm: f64,
    pub var_matrix: f64,
    pub z_mean: f64,
    pub z_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub samples: usize,
    pub dt_max: f64,
    pub rows: Vec<AgreementRow>,
    pub total_retries: u64,
}

impl AgreementReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z_mean.abs().max(r.z_var.abs())).fold(0.0, f64::max)
    }
}

fn summary(ev: &[f64]) -> [f64; 3] {
    let n = ev.len();
    [ev[n.div_ceil(2) - 1], ev.iter().sum(), ev.iter().map(|x| x * x).sum()]
}

fn z_score(a: f64, b: f64, sa: f64, sb: f64) -> f64 {
    let s = (sa * sa + sb * sb).sqrt();
    if s == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / s
    }
}

/// Compares DBM run from the diagonalized time-0 matrix against the exact
/// matrix flow at time t, on λ_{⌈N/2⌉}, Σλ and Σλ².
pub fn flow_agreement(spec: &EnsembleSpec, t: f64, samples: usize, opts: &DbmOptions) -> Result<AgreementReport> {
    if samples < 2 {
        return Err(LabError::TooFewSamples { needed: 2, got: samples });
    }
    let a_seed = seed::derive_named(spec.seed, "flow-dbm");
    let b_seed = seed::derive_named(spec.seed, "flow-matrix");
    let pairs: Vec<([f64; 3], [f64; 3], u64)> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let sa = EnsembleSpec { seed: a_seed, ..spec.clone() }.for_sample(k);
            let h0 = matrix_flow_sample(&sa, 0.0)?;
            let x0 = ParticleConfiguration::new(h0.eigenvalues, 0.0, spec.beta_class)?;
            let traj = dbm_integrate(&x0, t, opts, seed::derive_named(sa.seed, "brownian"))?;
            let sb = EnsembleSpec { seed: b_seed, ..spec.clone() }.for_sample(k);
            let hb = matrix_flow_sample(&sb, t)?;
            Ok((summary(&traj.last().x), summary(&hb.eigenvalues), traj.retries))
        })
        .collect::<Result<_>>()?;
    let names = ["lambda_mid", "sum_lambda", "sum_lambda_sq"];
    let rows = (0..3)
        .map(|q| {
            let a: Vec<f64> = pairs.iter().map(|p| p.0[q]).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1[q]).collect();
            let (ma, mb) = (stats::mean(&a), stats::mean(&b));
            let (va, vb) = (stats::variance(&a), stats::variance(&b));
            AgreementRow {
                statistic: names[q].to_string(),
                mean_dbm: ma,
                mean_matrix: mb,
                var_dbm: va,
                var_matrix: vb,
                z_mean: z_score(ma, mb, stats::std_err(&a), stats::std_err(&b)),
                z_var: z_score(va, vb, stats::variance_std_err(&a), stats::variance_std_err(&b)),
            }
        })
        .collect();
    Ok(AgreementReport {
        n: spec.n,
        t,
        samples,
        dt_max: opts.dt_max,
        rows,
        total_retries: pairs.iter().map(|p| p.2).sum(),
    })
}

/// (1/N)·Σ(λ_i − γ_i)².
pub fn quad_deviation(lambda: &[f64], gammas: &[f64]) -> Result<f64> {
    if lambda.len() != gammas.len() {
        return Err(LabError::DimensionMismatch {
            expected: lambda.len(),
            got: gammas.len(),
        });
    }
    Ok(lambda.iter().zip(gammas).map(|(l, g)| (l - g).powi(2)).sum::<f64>() / lambda.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRigidityPoint {
    pub t: f64,
    pub mean_quad_dev: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Per t, the Monte Carlo mean of (1/N)Σ(λ_i − γ̂_i(t))² with γ̂ from the
/// time-t law of the realized diagonal.
pub fn flow_rigidity_scan(spec: &EnsembleSpec, t_list: &[f64], samples: usize) -> Result<Vec<FlowRigidityPoint>> {
    if samples == 0 {
        return Err(LabError::TooFewSamples { needed: 1, got: 0 });
    }
    let gammas_for = |v: &[f64], t: f64| -> Result<Vec<f64>> {
        let nu_hat = SpectralMeasure::empirical(v)?;
        law_at_time(&nu_hat, spec.t0, t)?.classical_locations(spec.n)
    };
    let shared_v = if spec.potential.is_random() { None } else { Some(spec.potential_values()?) };
    t_list
        .iter()
        .map(|&t| {
            let shared_g = match &shared_v {
                Some(v) => Some(gammas_for(v, t)?),
                None => None,
            };
            let devs: Vec<f64> = (0..samples as u64)
                .into_par_iter()
                .map(|k| {
                    let sk = EnsembleSpec { t, ..spec.for_sample(k) };
                    let v = sk.potential_values()?;
                    let g = match &shared_g {
                        Some(g) => g.clone(),
                        None => gammas_for(&v, t)?,
                    };
                    let s = eigenvalues(&interpolating_matrix_with(&sk, &v)?)?;
                    quad_deviation(&s.eigenvalues, &g)
                })
                .collect::<Result<_>>()?;
            Ok(FlowRigidityPoint {
                t,
                mean_quad_dev: stats::mean(&devs),
                std_err: if samples > 1 { stats::std_err(&devs) } else { f64::NAN },
                samples,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EntryLaw, PotentialSpec};
    use crate::measure::MeasureSpec;
    use proptest::prelude::*;

    fn cfg(x: Vec<f64>, beta: BetaClass) -> ParticleConfiguration {
        ParticleConfiguration::new(x, 0.0, beta).unwrap()
    }

    #[test]
    fn zero_noise_two_particles_reach_fixed_point() {
        let opts = DbmOptions { zero_noise: true, ..DbmOptions::default() };
        let tr = dbm_integrate(&cfg(vec![-1.0, 1.0], BetaClass::ComplexHermitian), 40.0, &opts, 0).unwrap();
        let x = &tr.last().x;
        let fp = 0.5f64.sqrt();
        assert!((x[0] + fp).abs() < 1e-8 && (x[1] - fp).abs() < 1e-8, "{x:?}");
    }

    #[test]
    fn single_particle_is_ou_with_unit_variance() {
        let opts = DbmOptions { record_every: Some(1.0), ..DbmOptions::default() };
        let tr = dbm_integrate(&cfg(vec![0.0], BetaClass::ComplexHermitian), 4000.0, &opts, 11).unwrap();
        let xs: Vec<f64> = tr.frames.iter().skip(10).map(|f| f.x[0]).collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let se = stats::batch_means_se(&sq, 40);
        assert!((stats::mean(&sq) - 1.0).abs() < 3.0 * se, "{} ± {se}", stats::mean(&sq));
    }

    #[test]
    fn two_particle_midpoint_variance() {
        let opts = DbmOptions { record_every: Some(1.0), ..DbmOptions::default() };
        let tr = dbm_integrate(&cfg(vec![-0.5, 0.5], BetaClass::ComplexHermitian), 4000.0, &opts, 5).unwrap();
        let sq: Vec<f64> = tr.frames.iter().skip(10).map(|f| (0.5 * (f.x[0] + f.x[1])).powi(2)).collect();
        let se = stats::batch_means_se(&sq, 40);
        assert!((stats::mean(&sq) - 0.25).abs() < 3.0 * se, "{} ± {se}", stats::mean(&sq));
    }

    #[test]
    fn center_of_mass_drift_is_exact_ou() {
        // Without noise the mean moves by exactly −m·δ/2 each step.
        let x0 = cfg(vec![-0.3, 0.1, 0.2, 0.9, 1.4], BetaClass::RealSymmetric);
        let m0 = stats::mean(&x0.x);
        let opts = DbmOptions { zero_noise: true, ..DbmOptions::default() };
        let tr = dbm_integrate(&x0, 0.5, &opts, 0).unwrap();
        let m1 = stats::mean(&tr.last().x);
        assert!((m1 - m0 * (-0.25f64).exp()).abs() < 1e-4);
        // With noise, regress one-step increments of the mean on the mean.
        let delta = 1e-3;
        let opts = DbmOptions { dt_max: delta, ..DbmOptions::default() };
        let (mut ms, mut dms) = (Vec::new(), Vec::new());
        for k in 0..4000u64 {
            let shift = (k as f64 / 4000.0 - 0.5) * 4.0;
            let x: Vec<f64> = [-1.0, -0.3, 0.4, 1.2].iter().map(|v| v + shift).collect();
            let m = stats::mean(&x);
            let tr = dbm_integrate(&cfg(x, BetaClass::RealSymmetric), delta, &opts, k).unwrap();
            ms.push(m);
            dms.push((stats::mean(&tr.last().x) - m) / delta);
        }
        let (slope, _) = stats::linear_fit(&ms, &dms);
        // Noise on dm/δ has sd √(2/(βN)/N/δ); slope SE = sd/(√n·sd(m)).
        let se = (2.0f64 / 16.0 / delta).sqrt() / (4000f64.sqrt() * stats::variance(&ms).sqrt());
        assert!((slope + 0.5).abs() < 3.0 * se, "slope {slope} ± {se}");
    }

    #[test]
    fn preconditions_and_collapse() {
        let x0 = cfg(vec![0.0, 1.0], BetaClass::RealSymmetric);
        assert!(dbm_integrate(&x0, 1.0, &DbmOptions { dt_max: 0.01, ..DbmOptions::default() }, 0).is_err());
        assert!(ParticleConfiguration::new(vec![1.0, 0.0], 0.0, BetaClass::RealSymmetric).is_err());
        // A gap cap that ignores the spacing together with a single halving
        // cannot resolve a near-collision.
        let tight = cfg(vec![0.0, 1e-9, 1.0], BetaClass::RealSymmetric);
        let opts = DbmOptions { gap_factor: f64::INFINITY, max_halvings: 1, zero_noise: true, ..DbmOptions::default() };
        assert!(matches!(dbm_integrate(&tight, 1e-3, &opts, 0), Err(LabError::StepCollapse { .. })));
    }

    #[test]
    fn trajectory_csv() {
        let dir = tempfile::tempdir().unwrap();
        let opts = DbmOptions { record_every: Some(0.01), ..DbmOptions::default() };
        let tr = dbm_integrate(&cfg(vec![-1.0, 0.0, 1.0], BetaClass::RealSymmetric), 0.05, &opts, 1).unwrap();
        let p = dir.path().join("traj.csv");
        tr.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("t,x_1,x_2,x_3"));
        assert!(text.lines().count() >= 6);
    }

    #[test]
    fn matrix_flow_examples() {
        let spec = EnsembleSpec { t0: 0.2, ..EnsembleSpec::new(BetaClass::RealSymmetric, 20, EntryLaw::Gaussian, PotentialSpec::Quantile { measure: MeasureSpec::two_point(0.5) }) };
        assert_eq!(matrix_flow_sample(&spec, 0.3).unwrap(), matrix_flow_sample(&spec, 0.3).unwrap());
        let a = matrix_flow_sample(&spec, 0.0).unwrap();
        let v = spec.potential_values().unwrap();
        let w = crate::ensemble::sample_wigner(&spec).unwrap();
        let direct = eigenvalues(&crate::ensemble::assemble_deformed(0.1f64.exp(), &v, &w).unwrap()).unwrap();
        assert_eq!(a.eigenvalues, direct.eigenvalues);
        // N = 1, β = 2, V = 0: unit variance at every t.
        let one = EnsembleSpec::new(BetaClass::ComplexHermitian, 1, EntryLaw::Rademacher, PotentialSpec::Zero);
        let xs: Vec<f64> = (0..20_000u64).map(|k| matrix_flow_sample(&one.for_sample(k), 0.7).unwrap().eigenvalues[0]).collect();
        assert!((stats::variance(&xs) - 1.0).abs() < 3.0 * stats::variance_std_err(&xs));
        // V = 0 at large t: λ_max near the edge.
        let big = EnsembleSpec::new(BetaClass::RealSymmetric, 500, EntryLaw::Rademacher, PotentialSpec::Zero);
        let top: Vec<f64> = (0..5u64).map(|k| *matrix_flow_sample(&big.for_sample(k), 30.0).unwrap().eigenvalues.last().unwrap()).collect();
        assert!((1.8..=2.2).contains(&stats::mean(&top)));
    }

    #[test]
    fn agreement_at_time_zero_and_small_run() {
        let spec = EnsembleSpec::new(BetaClass::RealSymmetric, 8, EntryLaw::Gaussian, PotentialSpec::Quantile { measure: MeasureSpec::two_point(0.5) });
        let r = flow_agreement(&spec, 0.0, 400, &DbmOptions::default()).unwrap();
        assert!(r.max_abs_z() <= 4.0, "{r:?}");
        let r = flow_agreement(&spec, 0.3, 400, &DbmOptions::default()).unwrap();
        assert!(r.max_abs_z() <= 4.0, "{r:?}");
        assert_eq!(r.rows.len(), 3);
    }

    #[test]
    fn flow_rigidity_small() {
        assert_eq!(quad_deviation(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(quad_deviation(&[1.0], &[]).is_err());
        let spec = EnsembleSpec::new(BetaClass::RealSymmetric, 100, EntryLaw::Gaussian, PotentialSpec::Quantile { measure: MeasureSpec::two_point(0.5) });
        let pts = flow_rigidity_scan(&spec, &[0.0, 0.5], 4).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| p.mean_quad_dev < 1e-2));
    }

    proptest! {
        #[test]
        fn drift_parity(mut x in proptest::collection::vec(-3.0f64..3.0, 2..12)) {
            x.sort_by(f64::total_cmp);
            x.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let d = dbm_drift(&x);
            let y: Vec<f64> = x.iter().rev().map(|v| -v).collect();
            let dy = dbm_drift(&y);
            for (a, b) in d.iter().rev().zip(&dy) {
                prop_assert!((a + b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn ordering_preserved(seed in 0u64..500) {
            let x0 = ParticleConfiguration::new(vec![-1.0, -0.95, -0.2, 0.0, 0.01, 0.6], 0.0, BetaClass::RealSymmetric).unwrap();
            let tr = dbm_integrate(&x0, 0.02, &DbmOptions { record_every: Some(0.005), ..DbmOptions::default() }, seed).unwrap();
            for f in &tr.frames {
                prop_assert!(f.x.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
