use super::potential::{build_potential, Potential, PotentialModel};
use crate::error::{LabError, Result};
use crate::freeconv::law_at_time;
use crate::measure::SpectralMeasure;
use serde::Serialize;

/// Largest RK4 step; longer grid intervals are subdivided.
pub const EOM_MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EomTrajectory {
    pub times: Vec<f64>,
    /// locations[k] are the N classical locations at times[k].
    pub locations: Vec<Vec<f64>>,
    pub steps: usize,
}

/// Integrates ∂_t γ_i = ½ U′(t, γ_i) by RK4 from the classical locations
/// at t_grid[0], recording the positions at every grid time.
pub fn eom_propagate(nu: &SpectralMeasure, t0: f64, t_grid: &[f64], n: usize) -> Result<EomTrajectory> {
    eom_propagate_with(nu, t0, t_grid, n, EOM_MAX_STEP)
}

pub fn eom_propagate_with(nu: &SpectralMeasure, t0: f64, t_grid: &[f64], n: usize, max_step: f64) -> Result<EomTrajectory> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::PreconditionViolated("time grid must be non-empty and increasing".into()));
    }
    if !(max_step > 0.0) {
        return Err(LabError::PreconditionViolated("RK4 step must be positive".into()));
    }
    let mut gamma = law_at_time(nu, t0, t_grid[0])?.classical_locations(n)?;
    let mut locations = vec![gamma.clone()];
    let mut current = build_potential(nu, t0, t_grid[0])?;
    let mut steps = 0;
    for w in t_grid.windows(2) {
        let sub = ((w[1] - w[0]) / max_step).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / sub as f64;
        for j in 0..sub {
            let t = w[0] + h * j as f64;
            let half = build_potential(nu, t0, t + 0.5 * h)?;
            let next = build_potential(nu, t0, t + h)?;
            gamma = rk4_step(&gamma, h, &current, &half, &next);
            if gamma.windows(2).any(|p| !(p[0] < p[1])) || gamma.iter().any(|g| !g.is_finite()) {
                return Err(LabError::OrderViolation { t: t + h });
            }
            current = next;
            steps += 1;
        }
        locations.push(gamma.clone());
    }
    Ok(EomTrajectory {
        times: t_grid.to_vec(),
        locations,
        steps,
    })
}

fn velocity(u: &PotentialModel, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&g| 0.5 * u.prime(g)).collect()
}

fn rk4_step(g: &[f64], h: f64, u0: &PotentialModel, uh: &PotentialModel, u1: &PotentialModel) -> Vec<f64> {
    let shift = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> { base.iter().zip(k).map(|(x, d)| x + c * d).collect() };
    let k1 = velocity(u0, g);
    let k2 = velocity(uh, &shift(g, &k1, 0.5 * h));
    let k3 = velocity(uh, &shift(g, &k2, 0.5 * h));
    let k4 = velocity(u1, &shift(g, &k3, h));
    (0..g.len())
        .map(|i| g[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_locations_are_stationary() {
        let tr = eom_propagate(&SpectralMeasure::delta0(), 0.0, &[0.0, 0.3], 9).unwrap();
        for (a, b) in tr.locations[0].iter().zip(&tr.locations[1]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_middle_index_stays_at_zero() {
        let nu = SpectralMeasure::two_point(0.5).unwrap();
        let tr = eom_propagate(&nu, 0.0, &[0.0, 0.1, 0.2], 7).unwrap();
        for loc in &tr.locations {
            assert!(loc[3].abs() < 1e-10);
        }
    }

    #[test]
    fn eom_tracks_quantiles_over_short_time() {
        let nu = SpectralMeasure::two_point(0.5).unwrap();
        let tr = eom_propagate(&nu, 0.0, &[0.0, 0.2], 20).unwrap();
        let oracle = law_at_time(&nu, 0.0, 0.2).unwrap().classical_locations(20).unwrap();
        let dev = tr.locations[1].iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-5, "{dev}");
    }

    #[test]
    fn rejects_bad_grids() {
        let nu = SpectralMeasure::delta0();
        assert!(eom_propagate(&nu, 0.0, &[0.2, 0.1], 4).is_err());
        assert!(eom_propagate(&nu, 0.0, &[], 4).is_err());
    }

    #[test]
    fn oversized_steps_report_crossing() {
        let nu = SpectralMeasure::two_point(0.5).unwrap();
        let r = eom_propagate_with(&nu, 0.0, &[0.0, 40.0], 50, 40.0);
        assert!(matches!(r, Err(LabError::OrderViolation { .. })), "{r:?}");
    }
}
