use crate::error::{LabError, Result};
use crate::measure::{ComplexPoint, SpectralMeasure};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Residual tolerance |m − ∫dν/(θv − z − m)|.
    pub tol: f64,
    /// Damping of the plain fixed-point iteration.
    pub omega: f64,
    /// Residual below which Newton takes over.
    pub newton_switch: f64,
    pub max_iter: usize,
    pub eta_start: f64,
    pub eta_ratio: f64,
    /// Smallest η reached by continuation before the η = 0 polish.
    pub eta_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            omega: 0.5,
            newton_switch: 1e-4,
            max_iter: 20_000,
            eta_start: 2.0,
            eta_ratio: 0.7,
            eta_floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSolution {
    pub m: Complex64,
    pub iterations: usize,
    pub residual: f64,
    pub branch_ok: bool,
}

/// The map m ↦ ∫dν(v)/(θv − z − m) for a fixed measure and coupling.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointMap<'a> {
    points: &'a [f64],
    masses: &'a [f64],
    theta: f64,
}

impl<'a> FixedPointMap<'a> {
    pub fn new(nu: &'a SpectralMeasure, theta: f64) -> Self {
        let (points, masses) = nu.discrete();
        Self { points, masses, theta }
    }

    /// Returns (f(m), f′(m)).
    #[inline]
    pub fn eval(&self, z: Complex64, m: Complex64) -> (Complex64, Complex64) {
        let s = z + m;
        let mut f = Complex64::new(0.0, 0.0);
        let mut df = Complex64::new(0.0, 0.0);
        for (&v, &w) in self.points.iter().zip(self.masses) {
            let g = 1.0 / (self.theta * v - s);
            let wg = w * g;
            f += wg;
            df += wg * g;
        }
        (f, df)
    }

    /// ∫dν/|θv − z − m|², the left side of the sum rule.
    pub fn abs2_integral(&self, z: Complex64, m: Complex64) -> f64 {
        let s = z + m;
        self.points
            .iter()
            .zip(self.masses)
            .map(|(&v, &w)| w / (self.theta * v - s).norm_sqr())
            .sum()
    }

    pub fn residual(&self, z: Complex64, m: Complex64) -> f64 {
        (m - self.eval(z, m).0).norm()
    }

    /// (min, max) of |θx − z − m| over x in the support points.
    pub fn stability_range(&self, z: Complex64, m: Complex64) -> (f64, f64) {
        let s = z + m;
        self.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            let d = (self.theta * v - s).norm();
            (lo.min(d), hi.max(d))
        })
    }
}

/// Semicircle Stieltjes transform (−z + √(z² − 4))/2 on the Im ≥ 0 branch.
pub fn m_semicircle(z: Complex64) -> Complex64 {
    let mut r = (z * z - 4.0).sqrt();
    // Choose the root making m ~ −1/z at infinity, i.e. r ~ z.
    if (r.conj() * z).re < 0.0 {
        r = -r;
    }
    let m = 0.5 * (-z + r);
    if m.im < 0.0 && z.im >= 0.0 {
        0.5 * (-z - r)
    } else {
        m
    }
}

fn non_convergence(z: Complex64, iterations: usize, residual: f64) -> LabError {
    LabError::NonConvergence {
        re: z.re,
        im: z.im,
        iterations,
        residual,
    }
}

/// Damped iteration switching to Newton, started from `m0`.
pub fn iterate_from(map: &FixedPointMap, z: Complex64, m0: Complex64, opts: &SolverOptions) -> Result<StieltjesSolution> {
    let mut m = m0;
    let mut it = 0usize;
    let mut newton_failures = 0usize;
    let mut last_res = f64::INFINITY;
    loop {
        let (f, df) = map.eval(z, m);
        let r = m - f;
        let res = r.norm();
        if !res.is_finite() {
            return Err(non_convergence(z, it, res));
        }
        if res <= opts.tol {
            // One extra Newton step buys the last digits for finite differences.
            let step = r / (1.0 - df);
            let mp = m - step;
            let rp = map.residual(z, mp);
            let (m, res) = if rp <= res && (mp.im >= 0.0 || z.im == 0.0) { (mp, rp) } else { (m, res) };
            let branch_ok = m.im >= -opts.tol;
            if !branch_ok {
                return Err(LabError::BranchViolation { re: z.re, im: z.im, im_m: m.im });
            }
            return Ok(StieltjesSolution {
                m,
                iterations: it,
                residual: res,
                branch_ok,
            });
        }
        if it >= opts.max_iter {
            return Err(non_convergence(z, it, res));
        }
        it += 1;
        let use_newton = res < opts.newton_switch && newton_failures < 8;
        if use_newton {
            if res > last_res {
                newton_failures += 1;
            }
            let step = r / (1.0 - df);
            let mn = m - step;
            if step.norm().is_finite() && (mn.im >= 0.0 || z.im == 0.0) {
                m = mn;
            } else {
                newton_failures += 1;
                m = (1.0 - opts.omega) * m + opts.omega * f;
            }
        } else {
            m = (1.0 - opts.omega) * m + opts.omega * f;
        }
        last_res = res;
    }
}

fn validate(theta: f64, z: ComplexPoint) -> Result<()> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(LabError::PreconditionViolated(format!("theta = {theta} must be finite and nonnegative")));
    }
    if !z.e.is_finite() || !z.eta.is_finite() {
        return Err(LabError::NonFinite(format!("z = {} + {}i", z.e, z.eta)));
    }
    if z.eta < 0.0 {
        return Err(LabError::PreconditionViolated(format!("eta = {} must be nonnegative", z.eta)));
    }
    Ok(())
}

/// Solves the fixed point by geometric η-continuation from `eta_start`;
/// η = 0 yields the boundary value (Newton polish from `eta_floor`, with a
/// two-point Richardson fallback).
pub fn solve_with_map(map: &FixedPointMap, z: ComplexPoint, opts: &SolverOptions) -> Result<StieltjesSolution> {
    let zc = |eta: f64| Complex64::new(z.e, eta);
    if z.eta >= opts.eta_start {
        return iterate_from(map, z.z(), m_semicircle(z.z()), opts);
    }
    let target = z.eta.max(opts.eta_floor);
    let mut eta = opts.eta_start;
    let mut total = 0usize;
    let mut sol = iterate_from(map, zc(eta), m_semicircle(zc(eta)), opts)?;
    let mut prev = sol;
    loop {
        let next = eta * opts.eta_ratio;
        if next <= target {
            break;
        }
        eta = next;
        prev = sol;
        sol = iterate_from(map, zc(eta), sol.m, opts)?;
        total += sol.iterations;
    }
    // Linear extrapolation in η from the last two steps improves the start.
    let guess = if eta > target {
        let slope = (sol.m - prev.m) / (eta - eta / opts.eta_ratio).min(-f64::MIN_POSITIVE);
        let g = sol.m + slope * (target - eta);
        if g.im > 0.0 { g } else { sol.m }
    } else {
        sol.m
    };
    let at_target = iterate_from(map, zc(target), guess, opts).or_else(|_| iterate_from(map, zc(target), sol.m, opts))?;
    total += at_target.iterations;
    if z.eta > 0.0 {
        return Ok(StieltjesSolution {
            iterations: total,
            ..at_target
        });
    }
    boundary_value(map, z.e, at_target, opts).map(|s| StieltjesSolution {
        iterations: total + s.iterations,
        ..s
    })
}

fn boundary_value(map: &FixedPointMap, e: f64, at_floor: StieltjesSolution, opts: &SolverOptions) -> Result<StieltjesSolution> {
    let z0 = Complex64::new(e, 0.0);
    let mut m = at_floor.m;
    for it in 0..60 {
        let (f, df) = map.eval(z0, m);
        let r = m - f;
        let res = r.norm();
        if res <= opts.tol {
            let step = r / (1.0 - df);
            let mp = m - step;
            let rp = map.residual(z0, mp);
            let m = if rp <= res { mp } else { m };
            if m.im >= -1e-10 {
                let m = Complex64::new(m.re, m.im.max(0.0));
                return Ok(StieltjesSolution {
                    m,
                    iterations: it,
                    residual: map.residual(z0, m),
                    branch_ok: true,
                });
            }
            break;
        }
        let step = r / (1.0 - df);
        if !step.norm().is_finite() {
            break;
        }
        m -= step;
    }
    // Richardson: m(0) ≈ 2m(η_f) − m(2η_f).
    let eta = opts.eta_floor;
    let twice = iterate_from(map, Complex64::new(e, 2.0 * eta), at_floor.m, opts)?;
    let mr = 2.0 * at_floor.m - twice.m;
    let m = Complex64::new(mr.re, mr.im.max(0.0));
    Ok(StieltjesSolution {
        m,
        iterations: at_floor.iterations + twice.iterations,
        residual: map.residual(z0, m),
        branch_ok: true,
    })
}

/// m_fc(z) at coupling θ: the Im ≥ 0 solution of m = ∫dν(v)/(θv − z − m).
pub fn solve_mfc(nu: &SpectralMeasure, theta: f64, z: ComplexPoint, opts: &SolverOptions) -> Result<StieltjesSolution> {
    validate(theta, z)?;
    let map = FixedPointMap::new(nu, theta);
    solve_with_map(&map, z, opts)
}
