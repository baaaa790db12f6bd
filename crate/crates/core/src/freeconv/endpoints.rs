use crate::error::{LabError, Result};
use crate::measure::{MeasureKind, SpectralMeasure};
use serde::{Deserialize, Serialize};

/// Real roots ζ± of H(ζ) = 1 and the support edges L± = F(ζ±).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    #[serde(rename = "L_minus")]
    pub l_minus: f64,
    #[serde(rename = "L_plus")]
    pub l_plus: f64,
}

impl Endpoints {
    /// Distance 𝔤 of ζ± from θ·I_ν.
    pub fn gap(&self, nu: &SpectralMeasure, theta: f64) -> f64 {
        let (lo, hi) = nu.support();
        (theta * lo - self.zeta_minus).min(self.zeta_plus - theta * hi)
    }
}

struct Sums<'a> {
    points: &'a [f64],
    masses: &'a [f64],
    theta: f64,
}

impl Sums<'_> {
    /// H(ζ) = ∫dν/(θv − ζ)².
    fn h(&self, zeta: f64) -> f64 {
        self.points
            .iter()
            .zip(self.masses)
            .map(|(&v, &w)| {
                let d = self.theta * v - zeta;
                w / (d * d)
            })
            .sum()
    }

    fn dh(&self, zeta: f64) -> f64 {
        self.points
            .iter()
            .zip(self.masses)
            .map(|(&v, &w)| {
                let d = self.theta * v - zeta;
                2.0 * w / (d * d * d)
            })
            .sum()
    }

    /// F(ζ) = ζ − ∫dν/(θv − ζ).
    fn f(&self, zeta: f64) -> f64 {
        zeta - self
            .points
            .iter()
            .zip(self.masses)
            .map(|(&v, &w)| w / (self.theta * v - zeta))
            .sum::<f64>()
    }
}

/// Root of H − 1 on one side of θ·I_ν. `dir` = +1 searches above θ·hi.
fn edge_root(s: &Sums, anchor: f64, dir: f64) -> Result<f64> {
    let side = if dir > 0.0 { "upper" } else { "lower" };
    let mut inner = anchor + dir * 1e-6;
    if s.h(inner) < 1.0 {
        return Err(LabError::NoBracketing { side });
    }
    let mut d = 1e-6;
    let mut outer = inner;
    for _ in 0..200 {
        d *= 2.0;
        outer = anchor + dir * d;
        if s.h(outer) < 1.0 {
            break;
        }
        inner = outer;
    }
    if s.h(outer) >= 1.0 {
        return Err(LabError::NoBracketing { side });
    }
    while (outer - inner).abs() > 1e-13 * (1.0 + anchor.abs()) {
        let mid = 0.5 * (inner + outer);
        if s.h(mid) >= 1.0 {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    let mut zeta = 0.5 * (inner + outer);
    let polished = zeta - (s.h(zeta) - 1.0) / s.dh(zeta);
    if polished.is_finite() && (s.h(polished) - 1.0).abs() < (s.h(zeta) - 1.0).abs() && (polished - anchor) * dir > 0.0 {
        zeta = polished;
    }
    Ok(zeta)
}

/// Minimizes H on each gap between consecutive atoms; a minimum below one
/// means extra real roots of H = 1, i.e. the support splits.
fn detect_split(s: &Sums) -> Result<()> {
    for k in 0..s.points.len().saturating_sub(1) {
        let (a, b) = (s.theta * s.points[k], s.theta * s.points[k + 1]);
        let g = b - a;
        if g <= 0.0 {
            continue;
        }
        // min of wa/x² + wb/(g−x)² is (wa^{1/3} + wb^{1/3})³/g².
        let bound = (s.masses[k].cbrt() + s.masses[k + 1].cbrt()).powi(3) / (g * g);
        if bound > 1.0 {
            continue;
        }
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (a + 1e-12 * g, b - 1e-12 * g);
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let (mut fc, mut fd) = (s.h(c), s.h(d));
        for _ in 0..200 {
            if fc.min(fd) < 1.0 {
                return Err(LabError::SplitSupport);
            }
            if hi - lo < 1e-14 * (1.0 + a.abs() + b.abs()) {
                break;
            }
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = s.h(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = s.h(d);
            }
        }
    }
    Ok(())
}

/// ζ± with H(ζ±) = 1 outside θ·I_ν and L± = F(ζ±).
pub fn find_endpoints(nu: &SpectralMeasure, theta: f64) -> Result<Endpoints> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(LabError::PreconditionViolated(format!("theta = {theta} must be finite and nonnegative")));
    }
    let (points, masses) = nu.discrete();
    let s = Sums { points, masses, theta };
    if !matches!(nu.kind(), MeasureKind::Density(_)) && theta > 0.0 {
        detect_split(&s)?;
    }
    let (lo, hi) = nu.support();
    let zeta_plus = edge_root(&s, theta * hi, 1.0)?;
    let zeta_minus = edge_root(&s, theta * lo, -1.0)?;
    Ok(Endpoints {
        zeta_minus,
        zeta_plus,
        l_minus: s.f(zeta_minus),
        l_plus: s.f(zeta_plus),
    })
}

/// H(ζ) for diagnostics and tests.
pub fn h_function(nu: &SpectralMeasure, theta: f64, zeta: f64) -> f64 {
    let (points, masses) = nu.discrete();
    Sums { points, masses, theta }.h(zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn semicircle_endpoints() {
        for theta in [0.0, 1.0] {
            let e = find_endpoints(&SpectralMeasure::delta0(), theta).unwrap();
            assert!((e.zeta_plus - 1.0).abs() < 1e-12 && (e.zeta_minus + 1.0).abs() < 1e-12);
            assert!((e.l_plus - 2.0).abs() < 1e-12 && (e.l_minus + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_endpoints_match_bisection_oracle() {
        let a = 0.5;
        let nu = SpectralMeasure::two_point(a).unwrap();
        let e = find_endpoints(&nu, 1.0).unwrap();
        // Independent oracle: plain bisection of H − 1 on (a, 10].
        let h = |z: f64| 0.5 / ((a - z) * (a - z)) + 0.5 / ((a + z) * (a + z));
        let (mut l, mut r) = (a + 1e-9, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            if h(m) > 1.0 {
                l = m
            } else {
                r = m
            }
        }
        let z = 0.5 * (l + r);
        let lp = z + 0.5 / (z - a) + 0.5 / (z + a);
        assert!((e.zeta_plus - z).abs() < 1e-12);
        assert!((e.l_plus - lp).abs() < 1e-11);
        assert!(e.l_plus >= 2.0 && (e.l_minus + e.l_plus).abs() < 1e-11);
        assert!((h_function(&nu, 1.0, e.zeta_plus) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_half_is_a_semicircle_convolution() {
        // (2/π)√(1−v²) has variance 1/4, so ρ_fc is a semicircle of variance 1 + θ²/4.
        let nu = SpectralMeasure::jacobi(0.5, 0.5).unwrap();
        for theta in [0.5, 1.0] {
            let e = find_endpoints(&nu, theta).unwrap();
            let l = 2.0 * (1.0f64 + theta * theta / 4.0).sqrt();
            assert!((e.l_plus - l).abs() < 1e-9, "{} vs {l}", e.l_plus);
            assert!((e.l_minus + l).abs() < 1e-9);
        }
    }

    #[test]
    fn split_support_is_reported() {
        let nu = SpectralMeasure::two_point(2.0).unwrap();
        assert_eq!(find_endpoints(&nu, 1.0), Err(LabError::SplitSupport));
        // Small coupling shrinks the atoms back into one interval.
        assert!(find_endpoints(&nu, 0.25).is_ok());
    }

    #[test]
    fn no_bracketing_when_h_is_small_at_the_edge() {
        // Jacobi(3, 3): H at θ·hi is θ⁻²∫(1+v)³(1−v)dv/Z = 1.75/θ², below one for θ = 1.5.
        let nu = SpectralMeasure::jacobi(3.0, 3.0).unwrap();
        assert!((h_function(&nu, 1.5, 1.5 + 1e-9) - 1.75 / 2.25).abs() < 1e-6);
        assert!(matches!(find_endpoints(&nu, 1.5), Err(LabError::NoBracketing { .. })));
    }

    proptest! {
        #[test]
        fn roots_lie_outside_and_solve_h(a in 0.0f64..0.85, theta in 0.0f64..1.1) {
            let nu = SpectralMeasure::two_point(a).unwrap();
            let e = find_endpoints(&nu, theta).unwrap();
            prop_assert!(e.zeta_plus > theta * a && e.zeta_minus < -theta * a);
            prop_assert!((h_function(&nu, theta, e.zeta_plus) - 1.0).abs() < 1e-12);
            prop_assert!(e.l_minus <= -2.0 + 1e-12 && e.l_plus >= 2.0 - 1e-12);
            prop_assert!(e.gap(&nu, theta) > 0.0);
        }
    }
}
