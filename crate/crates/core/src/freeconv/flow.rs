use super::law::{FreeConvolutionLaw, LawOptions};
use super::solver::{solve_mfc, SolverOptions};
use crate::error::{LabError, Result};
use crate::measure::{ComplexPoint, SpectralMeasure};
use num_complex::Complex64;

/// Default ϖ; Θ_ϖ = [0, 1 + ϖ/10].
pub const DEFAULT_VARPI: f64 = 0.1;

/// θ(t) = e^{−(t−t0)/2}.
pub fn theta_at(t0: f64, t: f64) -> f64 {
    (-(t - t0) / 2.0).exp()
}

fn checked_theta(t0: f64, t: f64, varpi: f64) -> Result<f64> {
    if !(t >= 0.0) || !t0.is_finite() || !t.is_finite() {
        return Err(LabError::PreconditionViolated(format!("time t = {t} must be finite and nonnegative")));
    }
    let max = 1.0 + varpi / 10.0;
    let start = theta_at(t0, 0.0);
    if start > max {
        return Err(LabError::ThetaOutOfRange { theta: start, max });
    }
    let theta = theta_at(t0, t);
    if !(0.0..=max).contains(&theta) {
        return Err(LabError::ThetaOutOfRange { theta, max });
    }
    Ok(theta)
}

/// The law at coupling θ(t).
pub fn law_at_time(nu: &SpectralMeasure, t0: f64, t: f64) -> Result<FreeConvolutionLaw> {
    law_at_time_with(nu, t0, t, DEFAULT_VARPI, LawOptions::default())
}

pub fn law_at_time_with(nu: &SpectralMeasure, t0: f64, t: f64, varpi: f64, opts: LawOptions) -> Result<FreeConvolutionLaw> {
    let theta = checked_theta(t0, t, varpi)?;
    FreeConvolutionLaw::solve_with(nu, theta, opts)
}

/// |∂_t m − ½∂_z[m(m + z)]| by central differences in t and (real) z.
pub fn burger_residual(nu: &SpectralMeasure, t0: f64, t: f64, z: ComplexPoint, h: f64) -> Result<f64> {
    if z.eta < 0.05 {
        return Err(LabError::PreconditionViolated(format!("eta = {} must be at least 0.05", z.eta)));
    }
    if !(h > 0.0 && h <= 1e-3) {
        return Err(LabError::PreconditionViolated(format!("step h = {h} must lie in (0, 1e-3]")));
    }
    if t < h {
        return Err(LabError::PreconditionViolated(format!("time t = {t} must exceed the stencil width {h}")));
    }
    let opts = SolverOptions {
        tol: 1e-14,
        ..SolverOptions::default()
    };
    let m = |tt: f64, e: f64| -> Result<Complex64> {
        let theta = checked_theta(t0, tt, DEFAULT_VARPI)?;
        Ok(solve_mfc(nu, theta, ComplexPoint::new(e, z.eta), &opts)?.m)
    };
    let dt = (m(t + h, z.e)? - m(t - h, z.e)?) / (2.0 * h);
    let g = |e: f64| -> Result<Complex64> {
        let mm = m(t, e)?;
        Ok(mm * (mm + Complex64::new(e, z.eta)))
    };
    let dz = (g(z.e + h)? - g(z.e - h)?) / (2.0 * h);
    Ok((dt - 0.5 * dz).norm())
}
