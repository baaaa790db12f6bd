//! Spectra of sampled matrices, empirical Stieltjes transforms, Green
//! function diagonals, and the local-law and rigidity harnesses.

use crate::ensemble::{interpolating_matrix_with, EnsembleSpec, MatrixData, MatrixSample};
use crate::error::{LabError, Result};
use crate::freeconv::{solve_mfc, theta_at, FreeConvolutionLaw};
use crate::measure::{ComplexPoint, SpectralMeasure};
use crate::{eigen, seed, stats};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

/// Number of eigenpairs whose residual is checked per decomposition.
pub const RESIDUAL_PROBES: usize = 5;
/// Residual contract ‖Hy − λy‖ ≤ RESIDUAL_TOL·‖H‖.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSample {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub spec_digest: String,
    pub seed: u64,
    /// Largest probed residual ‖Hy − λy‖ (unit y).
    pub backward_error: f64,
    /// max |λ_i| = ‖H‖₂.
    pub norm: f64,
}

impl SpectrumSample {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let norm = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Self {
            eigenvalues,
            spec_digest: String::new(),
            seed: 0,
            backward_error: 0.0,
            norm,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// 64·N·ulp·‖H‖.
    pub fn backward_error_bound(&self) -> f64 {
        64.0 * self.len() as f64 * f64::EPSILON * self.norm
    }
}

/// Full ascending spectrum with residual spot checks on a few eigenpairs.
pub fn eigenvalues(h: &MatrixSample) -> Result<SpectrumSample> {
    if !h.is_finite() {
        return Err(LabError::NonFinite("matrix has non-finite entries".into()));
    }
    let n = h.n;
    let mut rng = seed::rng(seed::derive_named(h.provenance.seed, "residual-probe"));
    let probe: Vec<usize> = if n == 0 { Vec::new() } else { index::sample(&mut rng, n, RESIDUAL_PROBES.min(n)).into_vec() };
    let (ev, residuals) = match &h.data {
        MatrixData::Real(a) => eigen::symmetric_eigenvalues_probed(a, n, &probe)?,
        MatrixData::Complex(a) => {
            let re: Vec<f64> = a.iter().map(|x| x.re).collect();
            let im: Vec<f64> = a.iter().map(|x| x.im).collect();
            eigen::hermitian_eigenvalues_probed(&re, &im, n, &probe)?
        }
    };
    let mut s = SpectrumSample::from_eigenvalues(ev);
    s.spec_digest = h.provenance.spec_digest.clone();
    s.seed = h.provenance.seed;
    s.backward_error = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    if s.backward_error > RESIDUAL_TOL * s.norm.max(f64::MIN_POSITIVE) {
        let (k, r) = probe.iter().zip(&residuals).fold((0, 0.0f64), |acc, (&k, &r)| if r > acc.1 { (k, r) } else { acc });
        return Err(LabError::NonConvergence {
            re: s.eigenvalues[k],
            im: 0.0,
            iterations: 0,
            residual: r,
        });
    }
    Ok(s)
}

fn check_eta(z: ComplexPoint) -> Result<()> {
    if z.eta > 0.0 && z.eta.is_finite() && z.e.is_finite() {
        Ok(())
    } else {
        Err(LabError::PreconditionViolated(format!("spectral parameter needs eta > 0, got {}", z.eta)))
    }
}

/// m_N(z) = (1/N) Σ 1/(λ_i − z).
pub fn empirical_stieltjes(s: &SpectrumSample, z: ComplexPoint) -> Result<Complex64> {
    check_eta(z)?;
    Ok(stieltjes_of(&s.eigenvalues, z.z()))
}

fn stieltjes_of(ev: &[f64], z: Complex64) -> Complex64 {
    ev.iter().map(|l| 1.0 / (l - z)).sum::<Complex64>() / ev.len() as f64
}

/// Eigenvalues and squared eigenvector moduli |u_ki|², reusable over many z.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    /// weights[k·N + i] = |u_ki|².
    weights: Vec<f64>,
    n: usize,
}

impl EigenSystem {
    pub fn new(h: &MatrixSample) -> Result<Self> {
        if !h.is_finite() {
            return Err(LabError::NonFinite("matrix has non-finite entries".into()));
        }
        let n = h.n;
        let (eigenvalues, weights) = match &h.data {
            MatrixData::Real(a) => {
                let e = SymmetricEigen::new(DMatrix::from_column_slice(n, n, a));
                let w = e.eigenvectors.iter().map(|x| x * x).collect();
                (e.eigenvalues.iter().copied().collect(), w)
            }
            MatrixData::Complex(a) => {
                let e = SymmetricEigen::new(DMatrix::from_column_slice(n, n, a));
                let w = e.eigenvectors.iter().map(|x| x.norm_sqr()).collect();
                (e.eigenvalues.iter().copied().collect(), w)
            }
        };
        Ok(Self { eigenvalues, weights, n })
    }

    /// G_ii(z) = Σ_k |u_ki|²/(λ_k − z).
    pub fn green_diag(&self, z: ComplexPoint) -> Result<Vec<Complex64>> {
        check_eta(z)?;
        let n = self.n;
        let mut g = vec![Complex64::new(0.0, 0.0); n];
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let r = 1.0 / (l - z.z());
            for (gi, w) in g.iter_mut().zip(&self.weights[k * n..(k + 1) * n]) {
                *gi += r * w;
            }
        }
        Ok(g)
    }

    pub fn stieltjes(&self, z: ComplexPoint) -> Result<Complex64> {
        check_eta(z)?;
        Ok(stieltjes_of(&self.eigenvalues, z.z()))
    }
}

/// Diagonal of (H − z)⁻¹ through a full eigendecomposition.
pub fn green_diag(h: &MatrixSample, z: ComplexPoint) -> Result<Vec<Complex64>> {
    EigenSystem::new(h)?.green_diag(z)
}

/// ĝ_i = 1/(θv_i − z − m̂_fc).
pub fn g_hat(theta: f64, v: &[f64], z: ComplexPoint, m_fc: Complex64) -> Vec<Complex64> {
    v.iter().map(|vi| 1.0 / (theta * vi - z.z() - m_fc)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityReport {
    /// max_i N^{2/3} α̂_i^{1/3} |λ_i − γ_i| with α̂_i = min(i, N+1−i).
    pub max_scaled_dev: f64,
    /// N·Σ(λ_i − γ_i)².
    pub quad_dev: f64,
    pub scaled_dev: Vec<f64>,
}

impl RigidityReport {
    /// (1/N)·Σ(λ_i − γ_i)².
    pub fn mean_square_dev(&self) -> f64 {
        let n = self.scaled_dev.len() as f64;
        self.quad_dev / (n * n)
    }
}

pub fn rigidity_report(s: &SpectrumSample, gammas: &[f64]) -> Result<RigidityReport> {
    let n = s.len();
    if gammas.len() != n {
        return Err(LabError::DimensionMismatch { expected: n, got: gammas.len() });
    }
    let nf = n as f64;
    let scaled_dev: Vec<f64> = s
        .eigenvalues
        .iter()
        .zip(gammas)
        .enumerate()
        .map(|(i, (l, g))| {
            let alpha = (i + 1).min(n - i) as f64;
            nf.powf(2.0 / 3.0) * alpha.cbrt() * (l - g).abs()
        })
        .collect();
    let quad_dev = nf * s.eigenvalues.iter().zip(gammas).map(|(l, g)| (l - g).powi(2)).sum::<f64>();
    Ok(RigidityReport {
        max_scaled_dev: scaled_dev.iter().fold(0.0f64, |m, x| m.max(*x)),
        quad_dev,
        scaled_dev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalLawPoint {
    #[serde(rename = "E")]
    pub e: f64,
    pub eta: f64,
    #[serde(rename = "N_eta")]
    pub n_eta: f64,
    pub median_dev: f64,
    pub p90_dev: f64,
    pub samples: usize,
    /// Median of |m_N − m̂_fc| without the Nη factor.
    pub median_abs_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalLawReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub theta: f64,
    pub samples: usize,
    /// Smallest admissible η: the desk-scale floor 10/N.
    pub eta_floor: f64,
    pub points: Vec<LocalLawPoint>,
    /// Per grid point, median over the entrywise samples of
    /// max_i |G_ii − ĝ_i| / (√(Im m̂_fc/(Nη)) + 1/(Nη)).
    pub entrywise: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLawOptions {
    /// Samples for which the Green diagonal is also compared (0 disables).
    pub entrywise_samples: usize,
}

impl Default for LocalLawOptions {
    fn default() -> Self {
        Self { entrywise_samples: 0 }
    }
}

/// Desk-scale lower limit of η on D_L.
pub fn eta_floor(n: usize) -> f64 {
    10.0 / n as f64
}

/// m̂_fc at each z for the empirical law of the realized diagonal.
pub fn conditioned_stieltjes(v: &[f64], law: &FreeConvolutionLaw, zs: &[ComplexPoint]) -> Result<Vec<Complex64>> {
    let nu_hat = SpectralMeasure::empirical(v)?;
    zs.iter()
        .map(|&z| Ok(solve_mfc(&nu_hat, law.theta(), z, &law.options().solver)?.m))
        .collect()
}

pub fn local_law_scan(spec: &EnsembleSpec, law: &FreeConvolutionLaw, e_list: &[f64], eta_list: &[f64], samples: usize) -> Result<LocalLawReport> {
    local_law_scan_with(spec, law, e_list, eta_list, samples, LocalLawOptions::default())
}

pub fn local_law_scan_with(
    spec: &EnsembleSpec,
    law: &FreeConvolutionLaw,
    e_list: &[f64],
    eta_list: &[f64],
    samples: usize,
    opts: LocalLawOptions,
) -> Result<LocalLawReport> {
    spec.validate()?;
    let n = spec.n;
    let nf = n as f64;
    let theta = theta_at(spec.t0, spec.t);
    if (theta - law.theta()).abs() > 1e-12 * theta.max(1.0) {
        return Err(LabError::PreconditionViolated(format!(
            "law solved at theta = {} but the ensemble has theta = {theta}",
            law.theta()
        )));
    }
    if samples == 0 {
        return Err(LabError::TooFewSamples { needed: 1, got: 0 });
    }
    let floor = eta_floor(n);
    let e0 = law.e0();
    let mut zs = Vec::new();
    for &eta in eta_list {
        if !(eta >= floor * (1.0 - 1e-12) && eta <= 3.0) {
            return Err(LabError::PreconditionViolated(format!("eta = {eta} outside [{floor}, 3]")));
        }
        for &e in e_list {
            if !(e.abs() <= e0) {
                return Err(LabError::PreconditionViolated(format!("E = {e} outside [-{e0}, {e0}]")));
            }
            zs.push(ComplexPoint::new(e, eta));
        }
    }
    // Deterministic diagonals share one conditioned m̂_fc.
    let shared = if spec.potential.is_random() {
        None
    } else {
        let v = spec.potential_values()?;
        let m = conditioned_stieltjes(&v, law, &zs)?;
        Some((v, m))
    };
    type SampleOut = (Vec<f64>, Option<Vec<f64>>);
    let per_sample: Vec<SampleOut> = (0..samples as u64)
        .into_par_iter()
        .map(|k| -> Result<SampleOut> {
            let sk = spec.for_sample(k);
            let (v, m_hat) = match &shared {
                Some((v, m)) => (v.clone(), m.clone()),
                None => {
                    let v = sk.potential_values()?;
                    let m = conditioned_stieltjes(&v, law, &zs)?;
                    (v, m)
                }
            };
            let h = interpolating_matrix_with(&sk, &v)?;
            let entry = if (k as usize) < opts.entrywise_samples {
                let sys = EigenSystem::new(&h)?;
                let mut out = Vec::with_capacity(zs.len());
                for (z, m) in zs.iter().zip(&m_hat) {
                    let g = sys.green_diag(*z)?;
                    let gh = g_hat(theta, &v, *z, *m);
                    let ne = nf * z.eta;
                    let scale = (m.im / ne).sqrt() + 1.0 / ne;
                    out.push(g.iter().zip(&gh).map(|(a, b)| (a - b).norm()).fold(0.0f64, f64::max) / scale);
                }
                Some(out)
            } else {
                None
            };
            let s = eigenvalues(&h)?;
            let devs = zs.iter().zip(&m_hat).map(|(z, m)| (stieltjes_of(&s.eigenvalues, z.z()) - m).norm()).collect();
            Ok((devs, entry))
        })
        .collect::<Result<_>>()?;
    let points = zs
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let raw: Vec<f64> = per_sample.iter().map(|(d, _)| d[j]).collect();
            let ne = nf * z.eta;
            let scaled: Vec<f64> = raw.iter().map(|d| d * ne).collect();
            LocalLawPoint {
                e: z.e,
                eta: z.eta,
                n_eta: ne,
                median_dev: stats::median(&scaled),
                p90_dev: stats::quantile(&scaled, 0.9),
                samples,
                median_abs_dev: stats::median(&raw),
            }
        })
        .collect();
    let entrywise = (opts.entrywise_samples > 0).then(|| {
        (0..zs.len())
            .map(|j| stats::median(&per_sample.iter().filter_map(|(_, e)| e.as_ref().map(|x| x[j])).collect::<Vec<_>>()))
            .collect()
    });
    Ok(LocalLawReport {
        n,
        theta,
        samples,
        eta_floor: floor,
        points,
        entrywise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_wigner, BetaClass, EntryLaw, PotentialSpec};
    use crate::freeconv::m_semicircle;
    use crate::measure::MeasureSpec;
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> MatrixSample {
        let n = v.len();
        let mut a = vec![0.0; n * n];
        for (i, x) in v.iter().enumerate() {
            a[i * n + i] = *x;
        }
        MatrixSample::from_real(n, a).unwrap()
    }

    #[test]
    fn small_spectra() {
        assert_eq!(eigenvalues(&diag(&[3.0, -1.0, 2.0])).unwrap().eigenvalues, vec![-1.0, 2.0, 3.0]);
        let s = eigenvalues(&MatrixSample::from_real(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15 && (s.eigenvalues[1] - 1.0).abs() < 1e-15);
        let bad = MatrixSample::from_real(1, vec![f64::NAN]).unwrap();
        assert!(matches!(eigenvalues(&bad), Err(LabError::NonFinite(_))));
    }

    #[test]
    fn trace_identities_and_backward_error() {
        for beta in [BetaClass::RealSymmetric, BetaClass::ComplexHermitian] {
            let spec = EnsembleSpec {
                seed: 17,
                ..EnsembleSpec::new(beta, 200, EntryLaw::Gaussian, PotentialSpec::Zero)
            };
            let h = sample_wigner(&spec).unwrap();
            let s = eigenvalues(&h).unwrap();
            let sum: f64 = s.eigenvalues.iter().sum();
            let sq: f64 = s.eigenvalues.iter().map(|x| x * x).sum();
            assert!((sum - h.trace()).abs() <= 1e-9 * s.norm);
            assert!((sq - h.frobenius_sq()).abs() <= 1e-9 * h.frobenius_sq());
            assert!(s.backward_error <= s.backward_error_bound(), "{} > {}", s.backward_error, s.backward_error_bound());
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(s.spec_digest, spec.digest());
        }
    }

    #[test]
    fn stieltjes_examples() {
        let z = ComplexPoint::new(0.0, 1.0);
        let m = empirical_stieltjes(&SpectrumSample::from_eigenvalues(vec![-1.0, 1.0]), z).unwrap();
        assert!((m - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let m = empirical_stieltjes(&SpectrumSample::from_eigenvalues(vec![0.0; 7]), z).unwrap();
        assert!((m - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(empirical_stieltjes(&SpectrumSample::from_eigenvalues(vec![0.0]), ComplexPoint::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn goe_stieltjes_near_semicircle() {
        let spec = EnsembleSpec {
            seed: 3,
            ..EnsembleSpec::new(BetaClass::RealSymmetric, 2000, EntryLaw::Gaussian, PotentialSpec::Zero)
        };
        let s = eigenvalues(&sample_wigner(&spec).unwrap()).unwrap();
        let z = ComplexPoint::new(0.0, 0.5);
        let m = empirical_stieltjes(&s, z).unwrap();
        assert!((m - m_semicircle(z.z())).norm() <= 0.05);
    }

    #[test]
    fn green_diag_identities() {
        let v = [0.3, -1.2, 2.0, 0.0];
        let z = ComplexPoint::new(0.1, 0.4);
        let g = green_diag(&diag(&v), z).unwrap();
        for (gi, vi) in g.iter().zip(v) {
            assert!((gi - 1.0 / (vi - z.z())).norm() < 1e-14);
        }
        for beta in [BetaClass::RealSymmetric, BetaClass::ComplexHermitian] {
            let h = sample_wigner(&EnsembleSpec::new(beta, 60, EntryLaw::Uniform, PotentialSpec::Zero)).unwrap();
            let sys = EigenSystem::new(&h).unwrap();
            let g = sys.green_diag(z).unwrap();
            let avg = g.iter().sum::<Complex64>() / 60.0;
            let m = empirical_stieltjes(&eigenvalues(&h).unwrap(), z).unwrap();
            assert!((avg - m).norm() < 1e-12);
            assert!((avg - sys.stieltjes(z).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn rigidity_basics() {
        let s = SpectrumSample::from_eigenvalues(vec![-1.0, 0.0, 1.0]);
        let r = rigidity_report(&s, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!((r.max_scaled_dev, r.quad_dev), (0.0, 0.0));
        let r = rigidity_report(&s, &[-1.0, 0.1, 1.0]).unwrap();
        // Middle index has α̂ = 2.
        assert!((r.max_scaled_dev - 3f64.powf(2.0 / 3.0) * 2f64.cbrt() * 0.1).abs() < 1e-12);
        assert!((r.quad_dev - 3.0 * 0.01).abs() < 1e-12);
        assert!(rigidity_report(&s, &[0.0]).is_err());
    }

    #[test]
    fn local_law_small_scan() {
        let nu = MeasureSpec::two_point(0.5);
        let spec = EnsembleSpec::new(BetaClass::RealSymmetric, 200, EntryLaw::Gaussian, PotentialSpec::Quantile { measure: nu.clone() });
        let law = FreeConvolutionLaw::solve(&nu.build(None).unwrap(), 1.0).unwrap();
        let rep = local_law_scan_with(&spec, &law, &[0.0], &[2.0, 0.1], 20, LocalLawOptions { entrywise_samples: 3 }).unwrap();
        assert_eq!(rep.points.len(), 2);
        assert!(rep.points[0].median_abs_dev < 0.02, "{:?}", rep.points[0]);
        assert!(rep.points.iter().all(|p| p.p90_dev >= p.median_dev));
        assert!(rep.entrywise.as_ref().unwrap().iter().all(|x| x.is_finite() && *x < 50.0));
        assert!(local_law_scan(&spec, &law, &[0.0], &[0.01], 2).is_err());
        assert!(local_law_scan(&spec, &law, &[100.0], &[1.0], 2).is_err());
        let wrong = FreeConvolutionLaw::solve(&nu.build(None).unwrap(), 0.5).unwrap();
        assert!(local_law_scan(&spec, &wrong, &[0.0], &[1.0], 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn upper_half_plane(seed in 0u64..1000, e in -3.0f64..3.0, eta in 0.001f64..5.0) {
            let spec = EnsembleSpec { seed, ..EnsembleSpec::new(BetaClass::ComplexHermitian, 12, EntryLaw::Laplace, PotentialSpec::Zero) };
            let s = eigenvalues(&sample_wigner(&spec).unwrap()).unwrap();
            prop_assert!(empirical_stieltjes(&s, ComplexPoint::new(e, eta)).unwrap().im > 0.0);
            let sq: f64 = s.eigenvalues.iter().map(|x| x * x).sum();
            let h = sample_wigner(&spec).unwrap();
            prop_assert!((sq - h.frobenius_sq()).abs() <= 1e-9 * h.frobenius_sq());
        }
    }
}
