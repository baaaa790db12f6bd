//! Local eigenvalue statistics: unfolded gaps, windowed pair correlation,
//! the sine-kernel reference, gap-distribution distances and averaged
//! n-particle observables.

use crate::error::{LabError, Result};
use crate::freeconv::FreeConvolutionLaw;
use crate::spectral::SpectrumSample;
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::Path;

/// Default edge exclusion: indices in ⟦αN, (1 − α)N⟧ count as bulk.
pub const BULK_ALPHA: f64 = 1.0 / 6.0;
pub const MIN_CORRELATION_SAMPLES: usize = 100;
/// δ in the admissible window range N^{−1+δ} (or N^{−1/2+δ}) ≤ b ≤ N^{−δ}.
pub const WINDOW_DELTA: f64 = 0.1;

/// ⟦⌈αN⌉, ⌊(1 − α)N⌋⟧, 1-based.
pub fn bulk_indices(n: usize, alpha: f64) -> (usize, usize) {
    let nf = n as f64;
    (((alpha * nf).ceil() as usize).max(1), ((1.0 - alpha) * nf).floor() as usize)
}

/// b = N^{−1/4}.
pub fn default_window(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

/// Whether b lies in [N^{−1+δ}, N^{−δ}], or [N^{−1/2+δ}, N^{−δ}] when the
/// diagonal is random.
pub fn window_admissible(n: usize, b: f64, random_potential: bool, delta: f64) -> bool {
    let nf = n as f64;
    let lower = if random_potential { nf.powf(-0.5 + delta) } else { nf.powf(-1.0 + delta) };
    b >= lower && b <= nf.powf(-delta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStatistics {
    /// Nρ_j(λ_{j+m} − λ_j), in (sample, j, m) order.
    pub gaps: Vec<f64>,
    pub index: Vec<usize>,
    pub offset: Vec<usize>,
    /// J = ⟦j_lo, j_hi⟧, 1-based.
    pub window: (usize, usize),
    pub alpha: f64,
    pub m_offsets: Vec<usize>,
    pub samples: usize,
}

impl GapStatistics {
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Concatenates statistics gathered with identical settings.
    pub fn merge(parts: Vec<GapStatistics>) -> Result<GapStatistics> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or(LabError::TooFewSamples { needed: 1, got: 0 })?;
        for p in it {
            if p.window != out.window || p.m_offsets != out.m_offsets {
                return Err(LabError::PreconditionViolated("merging gap statistics with different windows".into()));
            }
            out.gaps.extend(p.gaps);
            out.index.extend(p.index);
            out.offset.extend(p.offset);
            out.samples += p.samples;
        }
        Ok(out)
    }

    /// CSV (j, gap_normalized), with an m column when several offsets are used.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let with_m = self.m_offsets.len() > 1;
        if with_m {
            w.write_record(["j", "m", "gap_normalized"])?;
        } else {
            w.write_record(["j", "gap_normalized"])?;
        }
        for k in 0..self.gaps.len() {
            if with_m {
                w.write_record([self.index[k].to_string(), self.offset[k].to_string(), self.gaps[k].to_string()])?;
            } else {
                w.write_record([self.index[k].to_string(), self.gaps[k].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Classical locations and densities ρ_j = ρ(γ_j) for one (law, N), reused
/// across samples.
#[derive(Debug, Clone)]
pub struct Unfolder {
    n: usize,
    alpha: f64,
    window: (usize, usize),
    m_offsets: Vec<usize>,
    rho: Vec<f64>,
}

impl Unfolder {
    pub fn new(law: &FreeConvolutionLaw, n: usize, window: (usize, usize), m_offsets: &[usize], alpha: f64) -> Result<Self> {
        let (bulk_lo, bulk_hi) = bulk_indices(n, alpha);
        let (lo, hi) = window;
        if lo > hi || lo < bulk_lo || hi > bulk_hi {
            return Err(LabError::IndexOutOfBulk { lo, hi, bulk_lo, bulk_hi });
        }
        if m_offsets.is_empty() || m_offsets.contains(&0) {
            return Err(LabError::PreconditionViolated("gap offsets must be positive".into()));
        }
        let max_m = *m_offsets.iter().max().unwrap_or(&1);
        if hi + max_m > n {
            return Err(LabError::IndexOutOfBulk { lo, hi: hi + max_m, bulk_lo, bulk_hi });
        }
        let gammas = law.classical_locations(n)?;
        let rho: Vec<f64> = gammas.iter().map(|&g| law.density(g)).collect();
        Ok(Self {
            n,
            alpha,
            window,
            m_offsets: m_offsets.to_vec(),
            rho,
        })
    }

    /// ρ_j for 1-based j.
    pub fn rho(&self, j: usize) -> f64 {
        self.rho[j - 1]
    }

    pub fn apply(&self, eigenvalues: &[f64]) -> Result<GapStatistics> {
        if eigenvalues.len() != self.n {
            return Err(LabError::DimensionMismatch { expected: self.n, got: eigenvalues.len() });
        }
        let (lo, hi) = self.window;
        let cap = (hi - lo + 1) * self.m_offsets.len();
        let mut out = GapStatistics {
            gaps: Vec::with_capacity(cap),
            index: Vec::with_capacity(cap),
            offset: Vec::with_capacity(cap),
            window: self.window,
            alpha: self.alpha,
            m_offsets: self.m_offsets.clone(),
            samples: 1,
        };
        let nf = self.n as f64;
        for j in lo..=hi {
            for &m in &self.m_offsets {
                let g = nf * self.rho(j) * (eigenvalues[j + m - 1] - eigenvalues[j - 1]);
                if !(g > 0.0) {
                    return Err(LabError::PreconditionViolated(format!("non-positive gap at j = {j}, m = {m}")));
                }
                out.gaps.push(g);
                out.index.push(j);
                out.offset.push(m);
            }
        }
        Ok(out)
    }
}

/// Normalized gaps Nρ_j(λ_{j+m} − λ_j) for j ∈ J, with ρ_j the density at the
/// j-th classical location of `law`.
pub fn unfold_gaps(s: &SpectrumSample, law: &FreeConvolutionLaw, window: (usize, usize), m_offsets: &[usize]) -> Result<GapStatistics> {
    Unfolder::new(law, s.eigenvalues.len(), window, m_offsets, BULK_ALPHA)?.apply(&s.eigenvalues)
}

/// Gaps over the full bulk window for many samples that share a law.
pub fn unfold_gap_samples(samples: &[SpectrumSample], law: &FreeConvolutionLaw, m_offsets: &[usize]) -> Result<GapStatistics> {
    let n = samples.first().ok_or(LabError::TooFewSamples { needed: 1, got: 0 })?.eigenvalues.len();
    let max_m = m_offsets.iter().copied().max().unwrap_or(1);
    let (lo, hi) = bulk_indices(n, BULK_ALPHA);
    let u = Unfolder::new(law, n, (lo, hi.saturating_sub(max_m).max(lo)), m_offsets, BULK_ALPHA)?;
    GapStatistics::merge(samples.iter().map(|s| u.apply(&s.eigenvalues)).collect::<Result<Vec<_>>>()?)
}

/// 1 − (sin πr / πr)², with value 0 at r = 0.
pub fn sine_kernel_pair_correlation(r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let x = PI * r;
    let s = x.sin() / x;
    1.0 - s * s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub order: usize,
    #[serde(rename = "E")]
    pub e: f64,
    pub b: f64,
    pub r_grid: Vec<f64>,
    pub bin_width: f64,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub samples: usize,
    /// Mean unfolded length of the energy window.
    pub window_length: f64,
    /// Density of unfolded points in the window (≈ 1).
    pub one_point: f64,
    pub one_point_se: f64,
}

impl CorrelationEstimate {
    /// RMS of estimate − (1 − sinc²) over grid points with r in [r_lo, r_hi].
    pub fn rms_to_sine_kernel(&self, r_lo: f64, r_hi: f64) -> f64 {
        let d: Vec<f64> = self
            .r_grid
            .iter()
            .zip(&self.values)
            .filter(|(r, _)| **r >= r_lo && **r <= r_hi)
            .map(|(r, v)| v - sine_kernel_pair_correlation(*r))
            .collect();
        (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt()
    }

    /// CSV (r, estimate, stderr, sine_kernel_reference).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "estimate", "stderr", "sine_kernel_reference"])?;
        for (k, r) in self.r_grid.iter().enumerate() {
            w.write_record([
                r.to_string(),
                self.values[k].to_string(),
                self.std_err[k].to_string(),
                sine_kernel_pair_correlation(*r).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-sample (pair counts per bin, points, window length) in unfolded units.
#[derive(Debug, Clone)]
struct PairCounts {
    counts: Vec<f64>,
    points: f64,
    length: f64,
}

fn count_pairs(points: &[f64], length: f64, r_grid: &[f64], dr: f64) -> PairCounts {
    let r_max = r_grid.iter().fold(0.0f64, |a, &r| a.max(r)) + 0.5 * dr;
    let mut counts = vec![0.0; r_grid.len()];
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            let s = (q - p).abs();
            if s >= r_max {
                break;
            }
            for (k, &r) in r_grid.iter().enumerate() {
                if (s - r).abs() < 0.5 * dr {
                    counts[k] += 1.0;
                }
            }
        }
    }
    PairCounts {
        counts,
        points: points.len() as f64,
        length,
    }
}

/// Pair correlation of already-unfolded point sets, each observed on a
/// window of the given unfolded length. Pairs with separation in
/// [r − dr/2, r + dr/2) are normalized by the edge-corrected Poisson count
/// (L − r)·dr; the standard error is taken across samples.
pub fn pair_correlation_unfolded(sets: &[(Vec<f64>, f64)], r_grid: &[f64], dr: f64) -> Result<(Vec<f64>, Vec<f64>, f64, f64, f64)> {
    if sets.len() < MIN_CORRELATION_SAMPLES {
        return Err(LabError::TooFewSamples {
            needed: MIN_CORRELATION_SAMPLES,
            got: sets.len(),
        });
    }
    if !(dr > 0.0) || r_grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(LabError::PreconditionViolated("bin width must be positive and r nonnegative".into()));
    }
    let per: Vec<PairCounts> = sets
        .par_iter()
        .map(|(pts, len)| {
            let mut p = pts.clone();
            p.sort_by(f64::total_cmp);
            count_pairs(&p, *len, r_grid, dr)
        })
        .collect();
    let ns = per.len() as f64;
    let mean_len = per.iter().map(|p| p.length).sum::<f64>() / ns;
    let mut values = vec![0.0; r_grid.len()];
    let mut ses = vec![0.0; r_grid.len()];
    for (k, r) in r_grid.iter().enumerate() {
        let norm: f64 = per.iter().map(|p| (p.length - r).max(0.0) * dr).sum();
        let total: f64 = per.iter().map(|p| p.counts[k]).sum();
        values[k] = total / norm;
        // Ratio estimator: spread of the per-sample counts around value·norm_s.
        let resid: Vec<f64> = per
            .iter()
            .map(|p| p.counts[k] - values[k] * (p.length - r).max(0.0) * dr)
            .collect();
        let sd = (resid.iter().map(|x| x * x).sum::<f64>() / (ns - 1.0)).sqrt();
        ses[k] = sd * ns.sqrt() / norm;
    }
    let dens: Vec<f64> = per.iter().map(|p| p.points / p.length).collect();
    let one_point = per.iter().map(|p| p.points).sum::<f64>() / per.iter().map(|p| p.length).sum::<f64>();
    Ok((values, ses, mean_len, one_point, stats::std_err(&dens)))
}

/// Rescaled two-point correlation around E: eigenvalues in [E − b, E + b]
/// are unfolded by x ↦ N·F(x) with F the law's distribution function.
pub fn pair_correlation_estimate(
    samples: &[SpectrumSample],
    law: &FreeConvolutionLaw,
    e: f64,
    b: f64,
    r_grid: &[f64],
    dr: f64,
) -> Result<CorrelationEstimate> {
    if samples.len() < MIN_CORRELATION_SAMPLES {
        return Err(LabError::TooFewSamples {
            needed: MIN_CORRELATION_SAMPLES,
            got: samples.len(),
        });
    }
    let (l_minus, l_plus) = law.support();
    if !(b > 0.0) || e - b <= l_minus || e + b >= l_plus {
        return Err(LabError::PreconditionViolated(format!(
            "window [{}, {}] is not inside the bulk ({l_minus}, {l_plus})",
            e - b,
            e + b
        )));
    }
    let sets: Vec<(Vec<f64>, f64)> = samples
        .iter()
        .map(|s| {
            let nf = s.eigenvalues.len() as f64;
            let (ulo, uhi) = (nf * law.cdf(e - b), nf * law.cdf(e + b));
            let pts = s
                .eigenvalues
                .iter()
                .filter(|&&x| x >= e - b && x <= e + b)
                .map(|&x| nf * law.cdf(x))
                .collect();
            (pts, uhi - ulo)
        })
        .collect();
    let (values, std_err, window_length, one_point, one_point_se) = pair_correlation_unfolded(&sets, r_grid, dr)?;
    Ok(CorrelationEstimate {
        order: 2,
        e,
        b,
        r_grid: r_grid.to_vec(),
        bin_width: dr,
        values,
        std_err,
        samples: samples.len(),
        window_length,
        one_point,
        one_point_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapDistance {
    pub ks: f64,
    pub wasserstein1: f64,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    #[serde(rename = "n_B")]
    pub n_b: usize,
}

/// Two-sample KS statistic and empirical W1 between normalized gap samples.
pub fn gap_distribution_distance(a: &GapStatistics, b: &GapStatistics) -> GapDistance {
    GapDistance {
        ks: stats::ks_two_sample(&a.gaps, &b.gaps),
        wasserstein1: stats::wasserstein1(&a.gaps, &b.gaps),
        n_a: a.len(),
        n_b: b.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassThresholds {
    pub ks_max: Option<f64>,
    pub ks_min: Option<f64>,
    pub passed: bool,
}

/// Comparison report {ks, wasserstein1, n_A, n_B, pass_thresholds}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    #[serde(flatten)]
    pub distance: GapDistance,
    pub pass_thresholds: PassThresholds,
}

impl ComparisonReport {
    pub fn new(distance: GapDistance, ks_max: Option<f64>, ks_min: Option<f64>) -> Self {
        let passed = ks_max.map_or(true, |m| distance.ks <= m) && ks_min.map_or(true, |m| distance.ks >= m);
        Self {
            distance,
            pass_thresholds: PassThresholds { ks_max, ks_min, passed },
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| LabError::Io(e.to_string()))?;
        std::fs::write(path, s)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableEstimate {
    pub mean: f64,
    /// Across-sample standard error.
    pub std_err: f64,
    pub samples: usize,
}

/// Sample average of (1/|J|) Σ_{j∈J} O(Nρ_j(λ_{j+m_1} − λ_j), …), with the
/// term set to 0 when j + max m leaves the bulk.
pub fn observable_average(
    samples: &[SpectrumSample],
    law: &FreeConvolutionLaw,
    window: (usize, usize),
    observable: &(dyn Fn(&[f64]) -> f64 + Sync),
    m_offsets: &[usize],
) -> Result<ObservableEstimate> {
    let n = samples.first().ok_or(LabError::TooFewSamples { needed: 1, got: 0 })?.eigenvalues.len();
    let (bulk_lo, bulk_hi) = bulk_indices(n, BULK_ALPHA);
    let (lo, hi) = window;
    if lo > hi || lo < bulk_lo || hi > bulk_hi {
        return Err(LabError::IndexOutOfBulk { lo, hi, bulk_lo, bulk_hi });
    }
    if m_offsets.is_empty() || m_offsets.contains(&0) {
        return Err(LabError::PreconditionViolated("gap offsets must be positive".into()));
    }
    let max_m = *m_offsets.iter().max().unwrap_or(&1);
    let gammas = law.classical_locations(n)?;
    let rho: Vec<f64> = gammas.iter().map(|&g| law.density(g)).collect();
    let nf = n as f64;
    let per: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            if s.eigenvalues.len() != n {
                return Err(LabError::DimensionMismatch { expected: n, got: s.eigenvalues.len() });
            }
            let ev = &s.eigenvalues;
            let mut args = vec![0.0; m_offsets.len()];
            let mut total = 0.0;
            for j in lo..=hi {
                if j + max_m > bulk_hi {
                    continue;
                }
                for (a, &m) in args.iter_mut().zip(m_offsets) {
                    *a = nf * rho[j - 1] * (ev[j + m - 1] - ev[j - 1]);
                }
                total += observable(&args);
            }
            Ok(total / (hi - lo + 1) as f64)
        })
        .collect::<Result<_>>()?;
    Ok(ObservableEstimate {
        mean: stats::mean(&per),
        std_err: if per.len() > 1 { stats::std_err(&per) } else { 0.0 },
        samples: per.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_wigner, BetaClass, EnsembleSpec, EntryLaw, PotentialSpec};
    use crate::measure::SpectralMeasure;
    use crate::seed;
    use crate::spectral::eigenvalues;
    use proptest::prelude::*;
    use rand::Rng;

    fn semicircle() -> FreeConvolutionLaw {
        FreeConvolutionLaw::solve(&SpectralMeasure::delta0(), 1.0).unwrap()
    }

    fn gaussian_samples(class: BetaClass, n: usize, count: usize, seed: u64) -> Vec<SpectrumSample> {
        let spec = EnsembleSpec {
            seed,
            ..EnsembleSpec::new(class, n, EntryLaw::Gaussian, PotentialSpec::Zero)
        };
        (0..count as u64)
            .into_par_iter()
            .map(|k| eigenvalues(&sample_wigner(&spec.for_sample(k)).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn sine_kernel_values() {
        assert_eq!(sine_kernel_pair_correlation(0.0), 0.0);
        assert!((sine_kernel_pair_correlation(1.0) - 1.0).abs() < 1e-15);
        assert!((sine_kernel_pair_correlation(0.5) - (1.0 - 4.0 / (PI * PI))).abs() < 1e-15);
        assert!((sine_kernel_pair_correlation(0.5) - 0.59472).abs() < 1e-5);
    }

    #[test]
    fn classical_locations_unfold_to_unit_gaps() {
        let law = FreeConvolutionLaw::solve(&SpectralMeasure::two_point(0.5).unwrap(), 1.0).unwrap();
        let dev = |n: usize| {
            let s = SpectrumSample::from_eigenvalues(law.classical_locations(n).unwrap());
            let g = unfold_gaps(&s, &law, bulk_indices(n, BULK_ALPHA), &[1]).unwrap();
            g.gaps.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max)
        };
        let (d1, d2) = (dev(400), dev(800));
        assert!(d1 < 5.0 / 400.0, "{d1}");
        let ratio = d1 / d2;
        assert!((1.6..2.4).contains(&ratio), "{d1} {d2}");
    }

    #[test]
    fn offset_two_doubles_equispaced_gaps() {
        let law = semicircle();
        let n = 300;
        // Points at the classical locations have unit unfolded spacing to O(1/N).
        let s = SpectrumSample::from_eigenvalues(law.classical_locations(n).unwrap());
        let g = unfold_gaps(&s, &law, (100, 200), &[2]).unwrap();
        assert!(g.gaps.iter().all(|x| (x - 2.0).abs() < 0.05));
        assert!(matches!(unfold_gaps(&s, &law, (10, 200), &[1]), Err(LabError::IndexOutOfBulk { .. })));
        assert!(matches!(unfold_gaps(&s, &law, (100, 260), &[1]), Err(LabError::IndexOutOfBulk { .. })));
    }

    #[test]
    fn poisson_points_have_flat_pair_correlation() {
        let mut rng = seed::rng(2);
        let len = 200.0;
        let sets: Vec<(Vec<f64>, f64)> = (0..200)
            .map(|_| ((0..200).map(|_| rng.random_range(0.0..len)).collect(), len))
            .collect();
        let grid: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
        let (values, ses, _, one, one_se) = pair_correlation_unfolded(&sets, &grid, 0.1).unwrap();
        for (v, s) in values.iter().zip(&ses) {
            assert!((v - 1.0).abs() <= 3.0 * s + 1e-3, "{v} ± {s}");
        }
        assert!((one - 1.0).abs() < 1e-12 && one_se < 1e-12);
        assert!(matches!(
            pair_correlation_unfolded(&sets[..50], &grid, 0.1),
            Err(LabError::TooFewSamples { needed: 100, got: 50 })
        ));
    }

    #[test]
    fn pair_correlation_of_gue_follows_sine_kernel() {
        let samples = gaussian_samples(BetaClass::ComplexHermitian, 300, 150, 7);
        let grid: Vec<f64> = (2..=20).map(|k| 0.1 * k as f64).collect();
        let est = pair_correlation_estimate(&samples, &semicircle(), 0.0, 0.3, &grid, 0.1).unwrap();
        assert!(est.rms_to_sine_kernel(0.2, 2.0) < 0.1, "{:?}", est.values);
        assert!((est.one_point - 1.0).abs() <= 3.0 * est.one_point_se + 0.01);
        assert!(pair_correlation_estimate(&samples, &semicircle(), 1.9, 0.2, &grid, 0.1).is_err());
    }

    #[test]
    fn goe_and_gue_gaps_are_distinguishable() {
        let law = semicircle();
        let a = unfold_gap_samples(&gaussian_samples(BetaClass::RealSymmetric, 400, 40, 1), &law, &[1]).unwrap();
        let b = unfold_gap_samples(&gaussian_samples(BetaClass::ComplexHermitian, 400, 40, 2), &law, &[1]).unwrap();
        assert!(a.len() > 1000 && b.len() > 1000);
        let d = gap_distribution_distance(&a, &b);
        assert!(d.ks >= 0.05, "{d:?}");
        let same = gap_distribution_distance(&a, &a);
        assert_eq!((same.ks, same.wasserstein1), (0.0, 0.0));
        let mut shuffled = a.clone();
        shuffled.gaps.reverse();
        let s = gap_distribution_distance(&a, &shuffled);
        assert_eq!((s.ks, s.wasserstein1), (0.0, 0.0));
        // Disjoint halves of one sample are consistent.
        let half = b.len() / 2;
        let ks = stats::ks_two_sample(&b.gaps[..half], &b.gaps[half..]);
        assert!(ks <= 2.0 * stats::ks_critical(0.05, half, b.len() - half), "{ks}");
        let rep = ComparisonReport::new(d, None, Some(0.05));
        assert!(rep.pass_thresholds.passed);
        let v = serde_json::to_value(&rep).unwrap();
        assert!(v.get("n_A").is_some() && v.get("ks").is_some() && v.get("pass_thresholds").is_some());
    }

    #[test]
    fn observable_average_examples() {
        let law = semicircle();
        let samples = gaussian_samples(BetaClass::ComplexHermitian, 200, 20, 4);
        let w = (60, 120);
        let one = observable_average(&samples, &law, w, &|_| 1.0, &[1]).unwrap();
        assert_eq!(one.mean, 1.0);
        let o1 = |g: &[f64]| (-g[0] * g[0]).exp();
        let o2 = |g: &[f64]| 1.0 / (1.0 + g[0] + g[1]);
        let (a, b) = (0.7, -1.3);
        let lhs = observable_average(&samples, &law, w, &|g| a * o1(g) + b * o2(g), &[1, 2]).unwrap().mean;
        let r1 = observable_average(&samples, &law, w, &o1, &[1, 2]).unwrap().mean;
        let r2 = observable_average(&samples, &law, w, &o2, &[1, 2]).unwrap().mean;
        assert!((lhs - (a * r1 + b * r2)).abs() < 1e-12);
    }

    #[test]
    fn gaps_are_shift_invariant() {
        let v: Vec<f64> = (0..100).map(|i| if i < 50 { -0.5 } else { 0.5 }).collect();
        let c = 0.37;
        let vs: Vec<f64> = v.iter().map(|x| x + c).collect();
        let law = FreeConvolutionLaw::solve(&SpectralMeasure::empirical(&v).unwrap(), 1.0).unwrap();
        let law_s = FreeConvolutionLaw::solve(&SpectralMeasure::empirical(&vs).unwrap(), 1.0).unwrap();
        let ev = law.classical_locations(300).unwrap();
        let mut rng = seed::rng(5);
        let ev: Vec<f64> = ev.iter().map(|x| x + 1e-4 * rng.random_range(-1.0..1.0)).collect();
        let evs: Vec<f64> = ev.iter().map(|x| x + c).collect();
        let g = unfold_gaps(&SpectrumSample::from_eigenvalues(ev), &law, (60, 240), &[1, 3]).unwrap();
        let gs = unfold_gaps(&SpectrumSample::from_eigenvalues(evs), &law_s, (60, 240), &[1, 3]).unwrap();
        for (x, y) in g.gaps.iter().zip(&gs.gaps) {
            assert!((x - y).abs() < 1e-6 * x, "{x} {y}");
        }
    }

    #[test]
    fn window_admissibility() {
        assert!(window_admissible(1000, default_window(1000), true, WINDOW_DELTA));
        assert!(window_admissible(1000, 0.01, false, WINDOW_DELTA));
        assert!(!window_admissible(1000, 0.01, true, WINDOW_DELTA));
        assert!(!window_admissible(1000, 0.9, false, WINDOW_DELTA));
    }

    #[test]
    fn gap_csv_export() {
        let law = semicircle();
        let s = SpectrumSample::from_eigenvalues(law.classical_locations(60).unwrap());
        let g = unfold_gaps(&s, &law, (20, 30), &[1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gaps.csv");
        g.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("j,gap_normalized\n20,"));
        assert_eq!(text.lines().count(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pair_correlation_ignores_point_order(seed_v in 0u64..1000) {
            let mut rng = seed::rng(seed_v);
            let sets: Vec<(Vec<f64>, f64)> = (0..100).map(|_| ((0..30).map(|_| rng.random_range(0.0..30.0)).collect(), 30.0)).collect();
            let rev: Vec<(Vec<f64>, f64)> = sets.iter().map(|(p, l)| (p.iter().rev().copied().collect(), *l)).collect();
            let grid = [0.25, 0.75, 1.5];
            let a = pair_correlation_unfolded(&sets, &grid, 0.5).unwrap();
            let b = pair_correlation_unfolded(&rev, &grid, 0.5).unwrap();
            prop_assert_eq!(a.0, b.0);
        }
    }
}
