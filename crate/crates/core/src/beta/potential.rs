use crate::error::{LabError, Result};
use crate::freeconv::{law_at_time, FreeConvolutionLaw};
use crate::measure::{ComplexPoint, SpectralMeasure};
use crate::quad::{chebyshev_integral, clenshaw};
use num_complex::Complex64;
use serde::Serialize;
use std::path::Path;

/// A one-body potential U with its first two derivatives.
pub trait Potential: Sync {
    fn value(&self, x: f64) -> f64;
    fn prime(&self, x: f64) -> f64;
    fn second(&self, x: f64) -> f64;
    /// inf U″ (−2C_U).
    fn convexity_floor(&self) -> f64;
}

/// U ≡ 0: the Gaussian ensembles.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _: f64) -> f64 {
        0.0
    }
    fn prime(&self, _: f64) -> f64 {
        0.0
    }
    fn second(&self, _: f64) -> f64 {
        0.0
    }
    fn convexity_floor(&self) -> f64 {
        0.0
    }
}

/// U + c.
pub struct ShiftedPotential<'a> {
    pub inner: &'a dyn Potential,
    pub shift: f64,
}

impl Potential for ShiftedPotential<'_> {
    fn value(&self, x: f64) -> f64 {
        self.inner.value(x) + self.shift
    }
    fn prime(&self, x: f64) -> f64 {
        self.inner.prime(x)
    }
    fn second(&self, x: f64) -> f64 {
        self.inner.second(x)
    }
    fn convexity_floor(&self) -> f64 {
        self.inner.convexity_floor()
    }
}

/// Continuation of U′ beyond one edge L: a cubic in s = x − L on
/// |s| ≤ w matching U′, U″, U‴ at the edge with zero curvature at s = ±w,
/// then a linear ramp of slope κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeExtension {
    pub edge: f64,
    /// s at the cubic/ramp junction (±w).
    pub s_end: f64,
    pub coef: [f64; 4],
    pub kappa: f64,
    /// U at the edge.
    pub u_edge: f64,
}

impl EdgeExtension {
    fn new(edge: f64, s_end: f64, a0: f64, a1: f64, a2: f64, u_edge: f64) -> Self {
        let a3 = -a2 / (3.0 * s_end);
        Self {
            edge,
            s_end,
            coef: [a0, a1, a2, a3],
            kappa: a1 + a2 * s_end,
            u_edge,
        }
    }

    fn in_cubic(&self, s: f64) -> bool {
        s.abs() <= self.s_end.abs()
    }

    fn cubic(&self, s: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coef;
        a0 + s * (a1 + s * (a2 + s * a3))
    }

    fn cubic_integral(&self, s: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coef;
        s * (a0 + s * (a1 / 2.0 + s * (a2 / 3.0 + s * a3 / 4.0)))
    }

    fn prime(&self, x: f64) -> f64 {
        let s = x - self.edge;
        if self.in_cubic(s) {
            self.cubic(s)
        } else {
            self.cubic(self.s_end) + self.kappa * (s - self.s_end)
        }
    }

    fn second(&self, x: f64) -> f64 {
        let s = x - self.edge;
        if self.in_cubic(s) {
            let [_, a1, a2, a3] = self.coef;
            a1 + s * (2.0 * a2 + 3.0 * a3 * s)
        } else {
            self.kappa
        }
    }

    fn value(&self, x: f64) -> f64 {
        let s = x - self.edge;
        if self.in_cubic(s) {
            self.u_edge + self.cubic_integral(s)
        } else {
            let r = s - self.s_end;
            self.u_edge + self.cubic_integral(self.s_end) + self.cubic(self.s_end) * r + 0.5 * self.kappa * r * r
        }
    }
}

const WIDTHS: [f64; 5] = [1.0, 0.5, 2.0, 0.25, 4.0];
/// Outermost distance from each edge at which the majorization is checked.
const CHECK_REACH: f64 = 50.0;
const CHECK_POINTS: usize = 48;
const FLOOR_MARGIN: f64 = 6.0;
const FLOOR_POINTS: usize = 4001;

/// The potential whose equilibrium density is ρ_fc(t):
/// U′(x) = −x − 2 Re m_fc(x) on the support, extended outside.
#[derive(Debug, Clone)]
pub struct PotentialModel {
    t: f64,
    law: FreeConvolutionLaw,
    mid: f64,
    half: f64,
    re_int: Vec<f64>,
    re_int_mid: f64,
    lower: EdgeExtension,
    upper: EdgeExtension,
    convexity_floor: f64,
    majorization_margin: f64,
}

/// U′ for the law at time t, with U(mid-support) = 0.
pub fn build_potential(nu: &SpectralMeasure, t0: f64, t: f64) -> Result<PotentialModel> {
    PotentialModel::from_law(law_at_time(nu, t0, t)?, t)
}

impl PotentialModel {
    pub fn from_law(law: FreeConvolutionLaw, t: f64) -> Result<Self> {
        let (mid, half) = law.mid_half();
        let re_int = chebyshev_integral(law.re_m_coefficients());
        let re_int_mid = clenshaw(&re_int, 0.0);
        let placeholder = EdgeExtension::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let mut model = Self {
            t,
            law,
            mid,
            half,
            re_int,
            re_int_mid,
            lower: placeholder,
            upper: placeholder,
            convexity_floor: 0.0,
            majorization_margin: 0.0,
        };
        let (a, b) = model.law.support();
        let mut margins = [0.0; 2];
        for (k, (edge, sign)) in [(a, -1.0), (b, 1.0)].into_iter().enumerate() {
            let re = clenshaw(model.law.re_m_coefficients(), sign);
            let (d1, d2) = model.law.re_m_derivatives(edge);
            let a0 = -edge - 2.0 * re;
            let a1 = -1.0 - 2.0 * d1;
            let a2 = -d2;
            let u_edge = model.support_value(edge);
            let mut chosen = None;
            let mut last_err = String::new();
            for w in WIDTHS {
                let ext = EdgeExtension::new(edge, sign * w, a0, a1, a2, u_edge);
                if ext.kappa <= -1.0 {
                    last_err = format!("far-field slope {} gives no confinement", ext.kappa);
                    continue;
                }
                match majorization_margin(&model.law, &ext, sign) {
                    Ok(m) if m > 0.0 => {
                        chosen = Some((ext, m));
                        break;
                    }
                    Ok(m) => last_err = format!("|U'+x| - 2|Re m| reaches {m:e} at width {w}"),
                    Err(e) => return Err(e),
                }
            }
            let (ext, m) = chosen.ok_or_else(|| LabError::ExtensionInvalid(last_err.clone()))?;
            margins[k] = m;
            if sign < 0.0 {
                model.lower = ext;
            } else {
                model.upper = ext;
            }
        }
        model.majorization_margin = margins[0].min(margins[1]);
        let lo = a - FLOOR_MARGIN;
        let hi = b + FLOOR_MARGIN;
        let mut floor = model.lower.kappa.min(model.upper.kappa);
        for i in 0..FLOOR_POINTS {
            let x = lo + (hi - lo) * i as f64 / (FLOOR_POINTS - 1) as f64;
            floor = floor.min(model.second(x));
        }
        for x in [a, b] {
            floor = floor.min(model.second(x));
        }
        model.convexity_floor = floor;
        Ok(model)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn law(&self) -> &FreeConvolutionLaw {
        &self.law
    }

    pub fn support(&self) -> (f64, f64) {
        self.law.support()
    }

    pub fn extensions(&self) -> (&EdgeExtension, &EdgeExtension) {
        (&self.lower, &self.upper)
    }

    /// C_U ≥ 0 with inf U″ ≥ −2C_U on the evaluation window.
    pub fn c_u(&self) -> f64 {
        (-0.5 * self.convexity_floor).max(0.0)
    }

    /// Smallest measured |U′+x| − 2|Re m| over the exterior check grid.
    pub fn majorization_margin(&self) -> f64 {
        self.majorization_margin
    }

    fn u_of(&self, x: f64) -> f64 {
        ((x - self.mid) / self.half).clamp(-1.0, 1.0)
    }

    fn support_value(&self, x: f64) -> f64 {
        let i = clenshaw(&self.re_int, self.u_of(x)) - self.re_int_mid;
        -0.5 * (x * x - self.mid * self.mid) - 2.0 * self.half * i
    }

    fn region(&self, x: f64) -> Region {
        let (a, b) = self.support();
        if x < a {
            Region::Lower
        } else if x > b {
            Region::Upper
        } else {
            Region::Support
        }
    }

    /// Rows (x, U′, U″, region) on an even grid.
    pub fn write_csv(&self, path: &Path, lo: f64, hi: f64, points: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "Uprime", "Usecond", "region"])?;
        let points = points.max(2);
        for i in 0..points {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let region = if self.region(x) == Region::Support { "support" } else { "extension" };
            w.write_record([x.to_string(), self.prime(x).to_string(), self.second(x).to_string(), region.into()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Lower,
    Support,
    Upper,
}

impl Potential for PotentialModel {
    fn value(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::Support => self.support_value(x),
            Region::Lower => self.lower.value(x),
            Region::Upper => self.upper.value(x),
        }
    }

    fn prime(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::Support => -x - 2.0 * clenshaw(self.law.re_m_coefficients(), self.u_of(x)),
            Region::Lower => self.lower.prime(x),
            Region::Upper => self.upper.prime(x),
        }
    }

    fn second(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::Support => -1.0 - 2.0 * self.law.re_m_derivatives(x).0,
            Region::Lower => self.lower.second(x),
            Region::Upper => self.upper.second(x),
        }
    }

    fn convexity_floor(&self) -> f64 {
        self.convexity_floor
    }
}

/// min over a geometric grid of distances δ outside the edge of
/// |U′(x) + x| − 2|Re m(x)|.
fn majorization_margin(law: &FreeConvolutionLaw, ext: &EdgeExtension, sign: f64) -> Result<f64> {
    let (lo, hi) = (1e-3f64, CHECK_REACH);
    let ratio = (hi / lo).ln() / (CHECK_POINTS - 1) as f64;
    let mut margin = f64::INFINITY;
    for k in 0..CHECK_POINTS {
        let delta = lo * (ratio * k as f64).exp();
        let x = ext.edge + sign * delta;
        let lhs = (ext.prime(x) + x).abs();
        let rhs = 2.0 * law.re_m(x)?.abs();
        margin = margin.min(lhs - rhs);
    }
    Ok(margin)
}

/// max |U′_a(x) − U′_b(x)| over `xs`.
pub fn max_prime_gap(a: &dyn Potential, b: &dyn Potential, xs: &[f64]) -> f64 {
    xs.iter().map(|&x| (a.prime(x) - b.prime(x)).abs()).fold(0.0, f64::max)
}

pub const LOOP_EQUATION_NODES: usize = 96;

/// |m(z)² + ∫ (x + U′(x)) ρ(x)/(x − z) dx| with both integrals taken by
/// the law's quadrature; m(z) = ∫ ρ(x)/(x − z) dx.
pub fn loop_equation_residual(u: &PotentialModel, z: ComplexPoint) -> Result<f64> {
    loop_equation_residual_with(u, z, LOOP_EQUATION_NODES)
}

pub fn loop_equation_residual_with(u: &PotentialModel, z: ComplexPoint, nodes: usize) -> Result<f64> {
    Ok(loop_equation_terms(u, z, nodes)?.0)
}

/// (|m² + R|, m, R).
pub fn loop_equation_terms(u: &PotentialModel, z: ComplexPoint, nodes: usize) -> Result<(f64, Complex64, Complex64)> {
    if !(z.eta >= 0.3) {
        return Err(LabError::PreconditionViolated(format!("loop equation needs Im z >= 0.3, got {}", z.eta)));
    }
    if nodes < 2 {
        return Err(LabError::PreconditionViolated("loop equation needs at least two nodes".into()));
    }
    let zc = z.z();
    let (xs, ws) = u.law().quadrature(nodes);
    let mut m = Complex64::new(0.0, 0.0);
    let mut r = Complex64::new(0.0, 0.0);
    for (&x, &w) in xs.iter().zip(&ws) {
        let k = w / (x - zc);
        m += k;
        r += k * (x + u.prime(x));
    }
    Ok(((m * m + r).norm(), m, r))
}
