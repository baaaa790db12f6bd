use super::endpoints::{find_endpoints, Endpoints};
use super::solver::{iterate_from, solve_with_map, FixedPointMap, SolverOptions, StieltjesSolution};
use crate::error::{LabError, Result};
use crate::measure::{ComplexPoint, SpectralMeasure};
use crate::quad::{chebyshev_derivative, clenshaw, cosine_coefficients};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LawOptions {
    /// Chebyshev-extrema nodes on [L−, L+].
    pub grid_size: usize,
    pub solver: SolverOptions,
    /// Edge-fit window for the square-root exponent, in distance from the edge.
    pub edge_window: (f64, f64),
}

impl Default for LawOptions {
    fn default() -> Self {
        Self {
            grid_size: 2048,
            solver: SolverOptions::default(),
            edge_window: (1e-4, 1e-2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// The solved deformed semicircle law at coupling θ.
///
/// On the support the law keeps two cosine series over the node angle φ,
/// with E(φ) = mid − (W/2)cos φ: one for Re m(E + i0) (so U′ and its
/// derivatives come from Clenshaw sums) and one for f(φ) = ρ(E(φ))·dE/dφ,
/// whose termwise integral is the distribution function.
#[derive(Debug, Clone)]
pub struct FreeConvolutionLaw {
    nu: SpectralMeasure,
    theta: f64,
    endpoints: Endpoints,
    opts: LawOptions,
    energies: Vec<f64>,
    density: Vec<f64>,
    re_m: Vec<f64>,
    re_coef: Vec<f64>,
    re_d1: Vec<f64>,
    re_d2: Vec<f64>,
    f_coef: Vec<f64>,
    mass: f64,
}

/// Drops trailing coefficients below the noise floor so that derivative
/// recurrences do not amplify rounding.
fn chop(mut c: Vec<f64>, rel: f64) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let keep = c.iter().rposition(|x| x.abs() > rel * scale).map_or(1, |k| k + 1);
    c.truncate(keep.max(1));
    c
}

impl FreeConvolutionLaw {
    pub fn solve(nu: &SpectralMeasure, theta: f64) -> Result<Self> {
        Self::solve_with(nu, theta, LawOptions::default())
    }

    pub fn solve_with(nu: &SpectralMeasure, theta: f64, opts: LawOptions) -> Result<Self> {
        if opts.grid_size < 16 {
            return Err(LabError::PreconditionViolated("law grid needs at least 16 nodes".into()));
        }
        let endpoints = find_endpoints(nu, theta)?;
        let map = FixedPointMap::new(nu, theta);
        let m_nodes = opts.grid_size;
        let (lm, lp) = (endpoints.l_minus, endpoints.l_plus);
        let mid = 0.5 * (lm + lp);
        let half = 0.5 * (lp - lm);
        let phis: Vec<f64> = (0..m_nodes).map(|k| PI * k as f64 / (m_nodes - 1) as f64).collect();
        let energies: Vec<f64> = phis.iter().map(|p| mid - half * p.cos()).collect();
        let mut ms = vec![Complex64::new(0.0, 0.0); m_nodes];
        ms[0] = Complex64::new(endpoints.zeta_minus - lm, 0.0);
        ms[m_nodes - 1] = Complex64::new(endpoints.zeta_plus - lp, 0.0);
        let mut prev: Option<Complex64> = None;
        for k in 1..m_nodes - 1 {
            let e = energies[k];
            let warm = prev.and_then(|m0| {
                iterate_from(&map, Complex64::new(e, 0.0), m0, &opts.solver)
                    .ok()
                    .filter(|s| s.m.im > 0.0)
            });
            let sol = match warm {
                Some(s) => s,
                None => solve_with_map(&map, ComplexPoint::new(e, 0.0), &opts.solver)?,
            };
            ms[k] = sol.m;
            prev = Some(sol.m);
        }
        let density: Vec<f64> = ms.iter().map(|m| m.im.max(0.0) / PI).collect();
        let re_m: Vec<f64> = ms.iter().map(|m| m.re).collect();
        // Series in u = −cos φ = cos(π − φ): reverse to sample at ψ = π − φ.
        let rev: Vec<f64> = re_m.iter().rev().copied().collect();
        let re_coef = chop(cosine_coefficients(&rev), 1e-15);
        let re_d1 = chop(chebyshev_derivative(&re_coef), 1e-13);
        let re_d2 = chebyshev_derivative(&re_d1);
        let f: Vec<f64> = density.iter().zip(&phis).map(|(r, p)| r * half * p.sin()).collect();
        let f_coef = chop(cosine_coefficients(&f), 1e-16);
        let mass = f_coef[0] * PI;
        Ok(Self {
            nu: nu.clone(),
            theta,
            endpoints,
            opts,
            energies,
            density,
            re_m,
            re_coef,
            re_d1,
            re_d2,
            f_coef,
            mass,
        })
    }

    pub fn nu(&self) -> &SpectralMeasure {
        &self.nu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn endpoints(&self) -> Endpoints {
        self.endpoints
    }

    pub fn support(&self) -> (f64, f64) {
        (self.endpoints.l_minus, self.endpoints.l_plus)
    }

    pub fn options(&self) -> &LawOptions {
        &self.opts
    }

    pub fn eta_floor(&self) -> f64 {
        self.opts.solver.eta_floor
    }

    /// Energy cutoff E₀ = 1 + max|L±| of the local-law domain.
    pub fn e0(&self) -> f64 {
        1.0 + self.endpoints.l_minus.abs().max(self.endpoints.l_plus.abs())
    }

    /// Grid nodes and ρ values (Chebyshev extrema on the support).
    pub fn density_grid(&self) -> (&[f64], &[f64]) {
        (&self.energies, &self.density)
    }

    /// Re m(E + i0) on the grid nodes.
    pub fn re_m_grid(&self) -> &[f64] {
        &self.re_m
    }

    /// ∫ρ over the support from the spectral series (should be 1).
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    /// (mid, half-width) of the support.
    pub fn mid_half(&self) -> (f64, f64) {
        let (a, b) = self.support();
        (0.5 * (a + b), 0.5 * (b - a))
    }

    fn u_of(&self, e: f64) -> f64 {
        let (mid, half) = self.mid_half();
        ((e - mid) / half).clamp(-1.0, 1.0)
    }

    pub fn map(&self) -> FixedPointMap<'_> {
        FixedPointMap::new(&self.nu, self.theta)
    }

    /// m_fc(z) for η ≥ 0.
    pub fn stieltjes(&self, z: ComplexPoint) -> Result<StieltjesSolution> {
        super::solver::solve_mfc(&self.nu, self.theta, z, &self.opts.solver)
    }

    /// Re m(E + i0): Chebyshev series on the support, direct real solve outside.
    pub fn re_m(&self, e: f64) -> Result<f64> {
        let (a, b) = self.support();
        if (a..=b).contains(&e) {
            Ok(clenshaw(&self.re_coef, self.u_of(e)))
        } else {
            Ok(self.stieltjes(ComplexPoint::new(e, 0.0))?.m.re)
        }
    }

    /// Chebyshev coefficients of Re m on the support in u = (E − mid)/half.
    pub fn re_m_coefficients(&self) -> &[f64] {
        &self.re_coef
    }

    /// (d/dE, d²/dE²) of Re m on the support.
    pub fn re_m_derivatives(&self, e: f64) -> (f64, f64) {
        let (_, half) = self.mid_half();
        let u = self.u_of(e);
        (clenshaw(&self.re_d1, u) / half, clenshaw(&self.re_d2, u) / (half * half))
    }

    /// ρ from the spectral series; cheap, for use in the bulk.
    pub fn density(&self, e: f64) -> f64 {
        let (a, b) = self.support();
        if e <= a || e >= b {
            return 0.0;
        }
        let (_, half) = self.mid_half();
        let phi = (-self.u_of(e)).acos();
        let s = phi.sin();
        if s < 1e-8 {
            return 0.0;
        }
        (clenshaw_cos(&self.f_coef, phi) / (half * s)).max(0.0)
    }

    fn cdf_phi(&self, phi: f64) -> f64 {
        // a₀φ + Σ a_j sin(jφ)/j with the sine recurrence.
        let c = phi.cos();
        let mut s_prev = 0.0;
        let mut s = phi.sin();
        let mut total = self.f_coef[0] * phi;
        for (j, a) in self.f_coef.iter().enumerate().skip(1) {
            total += a * s / j as f64;
            let next = 2.0 * c * s - s_prev;
            s_prev = s;
            s = next;
        }
        total / self.mass
    }

    /// Distribution function of ρ_fc.
    pub fn cdf(&self, e: f64) -> f64 {
        let (a, b) = self.support();
        if e <= a {
            return 0.0;
        }
        if e >= b {
            return 1.0;
        }
        self.cdf_phi((-self.u_of(e)).acos()).clamp(0.0, 1.0)
    }

    /// E with CDF(E) = u, by safeguarded Newton in the node angle.
    pub fn quantile(&self, u: f64) -> f64 {
        let (mid, half) = self.mid_half();
        if u <= 0.0 {
            return self.endpoints.l_minus;
        }
        if u >= 1.0 {
            return self.endpoints.l_plus;
        }
        let (mut lo, mut hi) = (0.0, PI);
        let mut phi = PI * u;
        for _ in 0..100 {
            let g = self.cdf_phi(phi) - u;
            if g.abs() < 1e-14 {
                break;
            }
            if g < 0.0 {
                lo = phi;
            } else {
                hi = phi;
            }
            let d = clenshaw_cos(&self.f_coef, phi) / self.mass;
            let next = phi - g / d;
            phi = if d > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        mid - half * phi.cos()
    }

    /// γ_i with ∫_{−∞}^{γ_i} ρ = (i − ½)/N.
    pub fn classical_locations(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(LabError::PreconditionViolated("N must be at least 1".into()));
        }
        Ok((1..=n).map(|i| self.quantile((i as f64 - 0.5) / n as f64)).collect())
    }

    /// ρ(E) = (2 Im m(E + iη_f) − Im m(E + 2iη_f))/π, and 0 off the support.
    pub fn density_at(&self, e: f64) -> Result<f64> {
        let (a, b) = self.support();
        let band = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if e < a - band || e > b + band {
            return Ok(0.0);
        }
        let eta = self.eta_floor();
        let m1 = self.stieltjes(ComplexPoint::new(e, eta))?.m;
        let map = self.map();
        let m2 = iterate_from(&map, Complex64::new(e, 2.0 * eta), m1, &self.opts.solver)?.m;
        Ok(((2.0 * m1.im - m2.im) / PI).max(0.0))
    }

    /// Log-log least-squares slope of ρ(L± ∓ κ) over the edge window.
    pub fn edge_exponent(&self, side: Side) -> Result<f64> {
        let (k0, k1) = self.opts.edge_window;
        let (a, b) = self.support();
        if !(k0 > 0.0 && k1 > k0) || k1 >= 0.5 * (b - a) {
            return Err(LabError::InsufficientResolution(format!(
                "edge window [{k0}, {k1}] does not fit in support of width {}",
                b - a
            )));
        }
        let npts = 21;
        let mut xs = Vec::with_capacity(npts);
        let mut ys = Vec::with_capacity(npts);
        for i in 0..npts {
            let kappa = k0 * (k1 / k0).powf(i as f64 / (npts - 1) as f64);
            let e = match side {
                Side::Lower => a + kappa,
                Side::Upper => b - kappa,
            };
            let rho = self.density_at(e)?;
            if !(rho > 0.0) {
                return Err(LabError::InsufficientResolution(format!("density vanishes at distance {kappa} from the edge")));
            }
            xs.push(kappa.ln());
            ys.push(rho.ln());
        }
        Ok(crate::stats::linear_fit(&xs, &ys).0)
    }

    /// Nodes and weights with Σ w_k g(E_k) ≈ ∫ g ρ_fc dE: Gauss–Legendre
    /// in the node angle against the smooth integrand ρ·dE/dφ.
    pub fn quadrature(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let (mid, half) = self.mid_half();
        let (phis, w) = crate::quad::gauss_legendre_on(n, 0.0, PI);
        let nodes = phis.iter().map(|p| mid - half * p.cos()).collect();
        let weights = phis.iter().zip(&w).map(|(p, wk)| wk * clenshaw_cos(&self.f_coef, *p) / self.mass).collect();
        (nodes, weights)
    }

    /// Measured (min, max) of |θx − z − m_fc(z)| over x ∈ supp ν and the given z.
    pub fn stability_constants(&self, zs: &[ComplexPoint]) -> Result<(f64, f64)> {
        let map = self.map();
        let mut out = (f64::INFINITY, 0.0f64);
        for z in zs {
            let m = self.stieltjes(*z)?.m;
            let (lo, hi) = map.stability_range(z.z(), m);
            out = (out.0.min(lo), out.1.max(hi));
        }
        Ok(out)
    }
}

/// Σ a_j cos(jφ).
fn clenshaw_cos(a: &[f64], phi: f64) -> f64 {
    clenshaw(a, phi.cos())
}
