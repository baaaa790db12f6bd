use super::potential::Potential;
use crate::error::{LabError, Result};
use serde::Serialize;

/// V^y(x) = U(x) + x²/2 − (2/N) Σ_{i∉I} log|x − y_i| on the configuration
/// interval (y_{L−K−1}, y_{L+K+1}), with I = ⟦L−K, L+K⟧ (1-based).
pub struct ExternalPotential<'a> {
    u: &'a dyn Potential,
    n: usize,
    k: usize,
    exterior: Vec<f64>,
    lo: f64,
    hi: f64,
}

/// The exterior points need not be ordered among themselves; only the two
/// interval endpoints y_{L−K−1} < y_{L+K+1} are required.
pub fn conditioned_external_potential<'a>(y: &[f64], l: usize, k: usize, u: &'a dyn Potential) -> Result<ExternalPotential<'a>> {
    let n = y.len();
    if l < k + 2 || l + k + 1 > n {
        return Err(LabError::PreconditionViolated(format!(
            "window [{}, {}] needs exterior neighbours inside 1..={n}",
            l as i64 - k as i64,
            l + k
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("conditioning configuration".into()));
    }
    let lo = y[l - k - 2];
    let hi = y[l + k];
    if !(lo < hi) {
        return Err(LabError::PreconditionViolated(format!("configuration interval ({lo}, {hi}) is empty")));
    }
    let exterior = y
        .iter()
        .enumerate()
        .filter(|(i, _)| *i + 1 < l - k || *i + 1 > l + k)
        .map(|(_, &v)| v)
        .collect();
    Ok(ExternalPotential { u, n, k, exterior, lo, hi })
}

impl ExternalPotential<'_> {
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of interior points, 2K + 1.
    pub fn window_len(&self) -> usize {
        2 * self.k + 1
    }

    pub fn exterior(&self) -> &[f64] {
        &self.exterior
    }

    pub fn potential(&self) -> &dyn Potential {
        self.u
    }

    fn check(&self, x: f64) -> Result<()> {
        if x > self.lo && x < self.hi {
            Ok(())
        } else {
            Err(LabError::OutOfInterval { x, lo: self.lo, hi: self.hi })
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let s: f64 = self.exterior.iter().map(|y| (x - y).abs().ln()).sum();
        Ok(self.u.value(x) + 0.5 * x * x - 2.0 / self.n as f64 * s)
    }

    pub fn prime(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let s: f64 = self.exterior.iter().map(|y| 1.0 / (x - y)).sum();
        Ok(self.u.prime(x) + x - 2.0 / self.n as f64 * s)
    }

    pub fn second(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let s: f64 = self.exterior.iter().map(|y| 1.0 / ((x - y) * (x - y))).sum();
        Ok(self.u.second(x) + 1.0 + 2.0 / self.n as f64 * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityOptions {
    /// Interior evaluation points x = a + (b − a)(j + ½)/G.
    pub grid: usize,
    /// Largest admissible normalized slack for the interval and V′ bounds.
    pub threshold: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        Self { grid: 2000, threshold: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    pub k: usize,
    pub chi: f64,
    pub rho_bar: f64,
    /// K^χ.
    pub k_chi: f64,
    pub interval_len: f64,
    /// ||I| − 𝒦/(Nρ̄)|.
    pub interval_dev: f64,
    /// interval_dev · N / K^χ.
    pub interval_slack: f64,
    /// max_x |V′(x) − 2ρ̄ log(d_l/d_r)| · N d(x) / K^χ.
    pub vprime_slack: f64,
    /// x at which vprime_slack is attained.
    pub vprime_worst_x: f64,
    /// min_x (V″(x) − 1 − inf U″) · d(x).
    pub convexity_c: f64,
    pub threshold: f64,
    pub interval_ok: bool,
    pub vprime_ok: bool,
    pub convexity_ok: bool,
}

impl RegularityReport {
    pub fn passes(&self) -> bool {
        self.interval_ok && self.vprime_ok && self.convexity_ok
    }
}

/// Measures the three K^χ-regularity bounds on an interior grid:
/// the interval length against 𝒦/(Nρ̄), V′ against the logarithmic
/// profile 2ρ̄ log(d_l/d_r) with d_l = (x − a) + ρ̄K^χ/N and
/// d_r = (b − x) + ρ̄K^χ/N, and the V″ lower bound c/d(x).
pub fn regularity_check(vy: &ExternalPotential, chi: f64, rho_bar: f64) -> Result<RegularityReport> {
    regularity_check_with(vy, chi, rho_bar, &RegularityOptions::default())
}

pub fn regularity_check_with(vy: &ExternalPotential, chi: f64, rho_bar: f64, opts: &RegularityOptions) -> Result<RegularityReport> {
    if !(chi > 0.0 && rho_bar > 0.0) || opts.grid == 0 {
        return Err(LabError::PreconditionViolated("chi > 0, rho_bar > 0 and a non-empty grid are required".into()));
    }
    let nf = vy.n() as f64;
    let (a, b) = vy.interval();
    let k_chi = (vy.k() as f64).powf(chi);
    let len = b - a;
    let interval_dev = (len - vy.window_len() as f64 / (nf * rho_bar)).abs();
    let interval_slack = interval_dev * nf / k_chi;
    let reg = rho_bar * k_chi / nf;
    let floor = vy.potential().convexity_floor();
    let mut vprime_slack = 0.0f64;
    let mut worst = a;
    let mut convexity_c = f64::INFINITY;
    for j in 0..opts.grid {
        let x = a + len * (j as f64 + 0.5) / opts.grid as f64;
        let d = (x - a).min(b - x);
        let reference = 2.0 * rho_bar * (((x - a) + reg) / ((b - x) + reg)).ln();
        let slack = (vy.prime(x)? - reference).abs() * nf * d / k_chi;
        if !(slack <= vprime_slack) {
            vprime_slack = slack;
            worst = x;
        }
        convexity_c = convexity_c.min((vy.second(x)? - 1.0 - floor) * d);
    }
    Ok(RegularityReport {
        k: vy.k(),
        chi,
        rho_bar,
        k_chi,
        interval_len: len,
        interval_dev,
        interval_slack,
        vprime_slack,
        vprime_worst_x: worst,
        convexity_c,
        threshold: opts.threshold,
        interval_ok: interval_slack <= opts.threshold,
        vprime_ok: vprime_slack <= opts.threshold,
        convexity_ok: convexity_c > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::gibbs::semicircle_locations;
    use super::super::potential::{build_potential, ZeroPotential};
    use super::*;
    use crate::measure::SpectralMeasure;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn rho_sc(x: f64) -> f64 {
        (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
    }

    #[test]
    fn direct_formula_far_from_exterior() {
        let y: Vec<f64> = (0..9).map(|i| -8.0 + 2.0 * i as f64).collect();
        let v = conditioned_external_potential(&y, 5, 1, &ZeroPotential).unwrap();
        assert_eq!(v.interval(), (-4.0, 4.0));
        assert_eq!(v.exterior().len(), 6);
        let x = 0.3;
        let oracle = x * x / 2.0 - 2.0 / 9.0 * [-8.0, -6.0, -4.0, 4.0, 6.0, 8.0].iter().map(|y: &f64| (x - y).abs().ln()).sum::<f64>();
        assert!((v.value(x).unwrap() - oracle).abs() < 1e-14);
        let h = 1e-5;
        let fd = (v.value(x + h).unwrap() - v.value(x - h).unwrap()) / (2.0 * h);
        assert!((fd - v.prime(x).unwrap()).abs() < 1e-8);
        let fd2 = (v.prime(x + h).unwrap() - v.prime(x - h).unwrap()) / (2.0 * h);
        assert!((fd2 - v.second(x).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn outside_interval_is_rejected() {
        let y: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let v = conditioned_external_potential(&y, 5, 1, &ZeroPotential).unwrap();
        assert!(matches!(v.value(2.0), Err(LabError::OutOfInterval { .. })));
        assert!(matches!(v.prime(6.5), Err(LabError::OutOfInterval { .. })));
        assert!(v.second(4.0).is_ok());
        assert!(conditioned_external_potential(&y, 2, 1, &ZeroPotential).is_err());
        assert!(conditioned_external_potential(&y, 8, 1, &ZeroPotential).is_err());
    }

    #[test]
    fn classical_semicircle_configuration_is_regular() {
        let n = 1000;
        let y = semicircle_locations(n);
        let (l, k) = (n / 2, 31);
        let v = conditioned_external_potential(&y, l, k, &ZeroPotential).unwrap();
        let (a, b) = v.interval();
        let rep = regularity_check(&v, 0.3, rho_sc(0.5 * (a + b))).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn equispaced_interval_deviation_is_one_spacing() {
        let n = 2000;
        let rho = 0.3;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) / (n as f64 * rho)).collect();
        let v = conditioned_external_potential(&y, n / 2, 15, &ZeroPotential).unwrap();
        let rep = regularity_check(&v, 0.5, rho).unwrap();
        // 2K + 2 spacings against 𝒦 = 2K + 1.
        assert!((rep.interval_dev - 1.0 / (n as f64 * rho)).abs() < 1e-12);
        assert!(rep.interval_ok);
    }

    #[test]
    fn jittered_configuration_passes_interval_bound() {
        let n = 1000;
        let k = 31;
        let mut rng = seed::rng(4);
        let mut y = semicircle_locations(n);
        let amp = (n as f64).powf(-0.7);
        for v in y.iter_mut() {
            *v += amp * rng.random_range(-1.0..1.0);
        }
        y.sort_by(f64::total_cmp);
        let chi = 0.3 * (n as f64).ln() / (k as f64).ln();
        let v = conditioned_external_potential(&y, n / 2, k, &ZeroPotential).unwrap();
        let (a, b) = v.interval();
        let rep = regularity_check(&v, chi, rho_sc(0.5 * (a + b))).unwrap();
        assert!(rep.interval_ok, "{rep:?}");
    }

    #[test]
    fn displaced_exterior_point_breaks_vprime_bound() {
        let n = 1000;
        let k = 31;
        let mut y = semicircle_locations(n);
        let l = n / 2;
        let (a, b) = (y[l - k - 2], y[l + k]);
        let rho = rho_sc(0.5 * (a + b));
        y[0] = b - 0.3 / (n as f64 * rho);
        let v = conditioned_external_potential(&y, l, k, &ZeroPotential).unwrap();
        let rep = regularity_check(&v, 0.3, rho).unwrap();
        assert!(!rep.vprime_ok, "{rep:?}");
        assert!(rep.vprime_worst_x > 0.5 * (a + b));
    }

    #[test]
    fn deformed_reference_configuration_is_regular() {
        let nu = SpectralMeasure::two_point(0.5).unwrap();
        let u = build_potential(&nu, 0.0, 0.0).unwrap();
        let n = 1000;
        let y = u.law().classical_locations(n).unwrap();
        let l = n / 2 + 100;
        let k = 31;
        let v = conditioned_external_potential(&y, l, k, &u).unwrap();
        let (a, b) = v.interval();
        let rep = regularity_check(&v, 0.3, u.law().density(0.5 * (a + b))).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn second_derivative_dominates_convexity_floor(
            ys in proptest::collection::vec(-5.0f64..5.0, 12),
            frac in 0.01f64..0.99,
        ) {
            let mut y = ys.clone();
            y.sort_by(f64::total_cmp);
            prop_assume!(y.windows(2).all(|w| w[1] - w[0] > 1e-6));
            let v = conditioned_external_potential(&y, 6, 2, &ZeroPotential).unwrap();
            let (a, b) = v.interval();
            let x = a + frac * (b - a);
            prop_assert!(v.second(x).unwrap() >= 1.0 + ZeroPotential.convexity_floor());
        }
    }
}
