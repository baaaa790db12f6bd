//! The potential measure ν and its empirical counterpart.

use crate::error::{LabError, Result};
use crate::quad::gauss_legendre_on;
use crate::seed;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;

const CENTER_TOL: f64 = 1e-10;
const MASS_TOL: f64 = 1e-12;
const JACOBI_NODES: usize = 512;

/// Spectral parameter z = E + iη.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    #[serde(rename = "E")]
    pub e: f64,
    pub eta: f64,
}

impl ComplexPoint {
    pub fn new(e: f64, eta: f64) -> Self {
        Self { e, eta }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.e, self.eta)
    }
}

/// How the measure was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Atoms { locations: Vec<f64>, weights: Vec<f64> },
    Density(DensityGrid),
    Empirical { sample: Vec<f64> },
}

/// A tabulated density: nodes, nonnegative values and quadrature weights
/// with Σ values·weights = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub qweights: Vec<f64>,
    pub shape: DensityShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityShape {
    /// (1+v)^a (1−v)^b on [−1, 1], sampled in φ with v = −cos φ.
    Jacobi { a: f64, b: f64, norm: f64 },
    Tabulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    kind: MeasureKind,
    lo: f64,
    hi: f64,
    // Discrete representation used by every Stieltjes-type sum.
    points: Vec<f64>,
    masses: Vec<f64>,
}

/// Result of the Assumption-style infimum test on ∫dν/(v−x)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCondition {
    pub min_value: f64,
    pub argmin: Option<f64>,
}

impl SupportCondition {
    pub fn passes(&self, varpi: f64) -> bool {
        self.min_value >= 1.0 + varpi
    }

    /// Measured margin min_value − 1.
    pub fn margin(&self) -> f64 {
        self.min_value - 1.0
    }
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LabError::NonFinite(what.to_string()))
    }
}

impl SpectralMeasure {
    /// Finite atomic measure. Equal locations are merged; weights must be
    /// positive and sum to one, and the first moment must vanish.
    pub fn atoms(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(LabError::InvalidMeasure("no atoms".into()));
        }
        let mut p: Vec<(f64, f64)> = pairs.to_vec();
        check_finite(&p.iter().flat_map(|&(x, w)| [x, w]).collect::<Vec<_>>(), "atoms")?;
        if p.iter().any(|&(_, w)| w <= 0.0) {
            return Err(LabError::InvalidMeasure("atom weights must be positive".into()));
        }
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = p.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(LabError::InvalidMeasure(format!("atom weights sum to {total}")));
        }
        let mean: f64 = p.iter().map(|&(x, w)| x * w).sum();
        if mean.abs() > CENTER_TOL {
            return Err(LabError::InvalidMeasure(format!("measure is not centered (mean {mean:e})")));
        }
        let (points, masses) = merge_sorted(p.iter().copied());
        Ok(Self {
            lo: points[0],
            hi: *points.last().unwrap(),
            kind: MeasureKind::Atoms {
                locations: points.clone(),
                weights: masses.clone(),
            },
            points,
            masses,
        })
    }

    pub fn delta0() -> Self {
        Self::atoms(&[(0.0, 1.0)]).expect("δ₀ is valid")
    }

    /// ½(δ_{−a} + δ_a).
    pub fn two_point(a: f64) -> Result<Self> {
        if a == 0.0 {
            return Ok(Self::delta0());
        }
        Self::atoms(&[(-a.abs(), 0.5), (a.abs(), 0.5)])
    }

    /// Jacobi measure Z⁻¹(1+v)^a(1−v)^b on [−1, 1]. Centering forces a = b.
    pub fn jacobi(a: f64, b: f64) -> Result<Self> {
        Self::jacobi_with_nodes(a, b, JACOBI_NODES)
    }

    pub fn jacobi_with_nodes(a: f64, b: f64, nodes: usize) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
            return Err(LabError::InvalidMeasure(format!("Jacobi exponents ({a}, {b}) must exceed -1")));
        }
        if (a - b).abs() > 1e-14 {
            return Err(LabError::InvalidMeasure(format!(
                "Jacobi measure with a = {a} != b = {b} is not centered"
            )));
        }
        let (phi, w) = gauss_legendre_on(nodes, 0.0, PI);
        let g: Vec<f64> = phi.iter().map(|&p| jacobi_phi_integrand(a, b, p)).collect();
        let norm: f64 = g.iter().zip(&w).map(|(g, w)| g * w).sum();
        let v: Vec<f64> = phi.iter().map(|p| -p.cos()).collect();
        let masses: Vec<f64> = g.iter().zip(&w).map(|(g, w)| g * w / norm).collect();
        let values: Vec<f64> = v
            .iter()
            .map(|&v| (1.0 + v).powf(a) * (1.0 - v).powf(b) / norm)
            .collect();
        let qweights: Vec<f64> = phi.iter().zip(&w).map(|(p, w)| p.sin() * w).collect();
        Ok(Self {
            kind: MeasureKind::Density(DensityGrid {
                nodes: v.clone(),
                values,
                qweights,
                shape: DensityShape::Jacobi { a, b, norm },
            }),
            lo: -1.0,
            hi: 1.0,
            points: v,
            masses,
        })
    }

    /// Uniform density on [−1, 1].
    pub fn uniform() -> Self {
        Self::jacobi(0.0, 0.0).expect("uniform is valid")
    }

    /// User-tabulated density with its own quadrature weights.
    pub fn density_grid(nodes: Vec<f64>, values: Vec<f64>, qweights: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 || values.len() != n || qweights.len() != n {
            return Err(LabError::InvalidMeasure("density grid arrays must be nonempty and equal length".into()));
        }
        check_finite(&nodes, "density nodes")?;
        check_finite(&values, "density values")?;
        check_finite(&qweights, "density weights")?;
        if values.iter().any(|&v| v < 0.0) || qweights.iter().any(|&w| w < 0.0) {
            return Err(LabError::InvalidMeasure("density values and weights must be nonnegative".into()));
        }
        if nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(LabError::InvalidMeasure("density nodes must be strictly increasing".into()));
        }
        let masses: Vec<f64> = values.iter().zip(&qweights).map(|(v, w)| v * w).collect();
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(LabError::InvalidMeasure(format!("density integrates to {total}")));
        }
        let mean: f64 = nodes.iter().zip(&masses).map(|(x, m)| x * m).sum();
        if mean.abs() > CENTER_TOL {
            return Err(LabError::InvalidMeasure(format!("density is not centered (mean {mean:e})")));
        }
        let lo = nodes[0];
        let hi = nodes[n - 1];
        Ok(Self {
            kind: MeasureKind::Density(DensityGrid {
                nodes: nodes.clone(),
                values,
                qweights,
                shape: DensityShape::Tabulated,
            }),
            lo,
            hi,
            points: nodes,
            masses,
        })
    }

    /// Empirical measure (1/N)Σδ_{v_i} of a realized potential. Not required
    /// to be centered: a random sample has mean O(N^{-1/2}).
    pub fn empirical(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(LabError::InvalidMeasure("empty sample".into()));
        }
        check_finite(sample, "empirical sample")?;
        let mut s = sample.to_vec();
        s.sort_by(f64::total_cmp);
        let w = 1.0 / s.len() as f64;
        let (points, masses) = merge_sorted(s.iter().map(|&x| (x, w)));
        Ok(Self {
            lo: s[0],
            hi: s[s.len() - 1],
            kind: MeasureKind::Empirical { sample: s },
            points,
            masses,
        })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// Smallest closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Discrete (point, mass) representation: exact for atoms and samples,
    /// the quadrature rule for densities.
    pub fn discrete(&self) -> (&[f64], &[f64]) {
        (&self.points, &self.masses)
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.points.iter().zip(&self.masses).map(|(x, m)| m * x.powi(k)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.points.len();
        (0..n).all(|i| {
            let j = n - 1 - i;
            (self.points[i] + self.points[j]).abs() <= 1e-13 * (1.0 + self.points[i].abs())
                && (self.masses[i] - self.masses[j]).abs() <= 1e-13
        })
    }

    /// m_ν(z) = ∫dν(v)/(v − z).
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.points
            .iter()
            .zip(&self.masses)
            .map(|(&v, &m)| m / (v - z))
            .sum()
    }

    /// Stieltjes transform at a spectral parameter with η > 0.
    pub fn stieltjes_at(&self, z: ComplexPoint) -> Result<Complex64> {
        if !(z.eta > 0.0) {
            return Err(LabError::PreconditionViolated(format!("eta = {} must be positive", z.eta)));
        }
        Ok(self.stieltjes(z.z()))
    }

    /// Cumulative distribution function F(x) = ν((−∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        match &self.kind {
            MeasureKind::Density(DensityGrid {
                shape: DensityShape::Jacobi { a, b, norm },
                ..
            }) => {
                let phi = (-x).clamp(-1.0, 1.0).acos();
                jacobi_partial(*a, *b, phi) / norm
            }
            _ => {
                let k = self.points.partition_point(|&p| p <= x);
                self.masses[..k].iter().sum::<f64>().min(1.0)
            }
        }
    }

    /// Left-continuous quantile Q(u) = inf{x : F(x) ≥ u}, u ∈ (0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            MeasureKind::Density(DensityGrid {
                shape: DensityShape::Jacobi { a, b, norm },
                ..
            }) => {
                let target = u * norm;
                let (mut lo, mut hi) = (0.0f64, PI);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if jacobi_partial(*a, *b, mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                -(0.5 * (lo + hi)).cos()
            }
            MeasureKind::Empirical { sample } => {
                let n = sample.len();
                let k = ((u * n as f64).ceil() as usize).clamp(1, n);
                sample[k - 1]
            }
            _ => {
                let mut cum = 0.0;
                for (p, m) in self.points.iter().zip(&self.masses) {
                    cum += m;
                    if cum >= u - 1e-14 {
                        return *p;
                    }
                }
                self.hi
            }
        }
    }

    /// Stable hex digest of the discrete representation.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let tag: &[u8] = match &self.kind {
            MeasureKind::Atoms { .. } => b"atoms",
            MeasureKind::Density(_) => b"density",
            MeasureKind::Empirical { .. } => b"empirical",
        };
        h.update(tag);
        for (p, m) in self.points.iter().zip(&self.masses) {
            h.update(p.to_le_bytes());
            h.update(m.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Grid minimization of H₀(x) = ∫dν(v)/(v−x)² over I_ν, followed by a
    /// golden-section refinement around the best finite grid point.
    pub fn check_support_condition(&self, grid_size: usize) -> Result<SupportCondition> {
        if grid_size < 64 {
            return Err(LabError::PreconditionViolated(format!("grid_size {grid_size} < 64")));
        }
        match &self.kind {
            MeasureKind::Density(g) => Ok(self.density_support_condition(g)),
            _ => Ok(self.atomic_support_condition(grid_size)),
        }
    }

    fn h0(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.masses)
            .map(|(&v, &m)| m / ((v - x) * (v - x)))
            .sum()
    }

    fn atomic_support_condition(&self, grid_size: usize) -> SupportCondition {
        let infinite = SupportCondition {
            min_value: f64::INFINITY,
            argmin: None,
        };
        if self.hi <= self.lo {
            return infinite;
        }
        let h = (self.hi - self.lo) / (grid_size - 1) as f64;
        let near_atom = |x: f64| {
            let k = self.points.partition_point(|&p| p < x);
            (k < self.points.len() && self.points[k] - x < h) || (k > 0 && x - self.points[k - 1] < h)
        };
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..grid_size {
            let x = self.lo + h * k as f64;
            if near_atom(x) {
                continue;
            }
            let v = self.h0(x);
            if v < best.0 {
                best = (v, k);
            }
        }
        if !best.0.is_finite() {
            return infinite;
        }
        let xk = self.lo + h * best.1 as f64;
        let (x, v) = golden_min(|x| self.h0(x), (xk - h).max(self.lo), (xk + h).min(self.hi), 1e-12);
        let (x, v) = if v < best.0 { (x, v) } else { (xk, best.0) };
        SupportCondition {
            min_value: v,
            argmin: Some(x),
        }
    }

    fn density_support_condition(&self, g: &DensityGrid) -> SupportCondition {
        // Interior points carry positive density, so H₀ diverges there; only
        // the endpoints can give a finite value.
        let edge = |x: f64, exponent: Option<f64>| -> f64 {
            if exponent.is_some_and(|e| e <= 1.0) {
                return f64::INFINITY;
            }
            match g.shape {
                DensityShape::Jacobi { a, b, norm } => {
                    // ∫ (1+v)^a(1−v)^b/(v−x)² dv in φ, split to keep nodes dense near the edge.
                    let f = |phi: f64| {
                        let v = -phi.cos();
                        jacobi_phi_integrand(a, b, phi) / ((v - x) * (v - x))
                    };
                    let mut total = 0.0;
                    let cuts = [0.0, 1e-3, 1e-2, 0.1, 0.5, PI / 2.0, PI - 0.5, PI - 0.1, PI - 1e-2, PI - 1e-3, PI];
                    for w in cuts.windows(2) {
                        let (xs, ws) = gauss_legendre_on(64, w[0], w[1]);
                        total += xs.iter().zip(&ws).map(|(p, w)| w * f(*p)).sum::<f64>();
                    }
                    total / norm
                }
                DensityShape::Tabulated => self
                    .points
                    .iter()
                    .zip(&self.masses)
                    .filter(|(v, _)| **v != x)
                    .map(|(&v, &m)| m / ((v - x) * (v - x)))
                    .sum(),
            }
        };
        let (ea, eb) = match g.shape {
            DensityShape::Jacobi { a, b, .. } => (Some(a), Some(b)),
            DensityShape::Tabulated => (None, None),
        };
        let lo_v = edge(self.lo, ea);
        let hi_v = edge(self.hi, eb);
        let (v, x) = if lo_v <= hi_v { (lo_v, self.lo) } else { (hi_v, self.hi) };
        SupportCondition {
            min_value: v,
            argmin: v.is_finite().then_some(x),
        }
    }

    /// Sorted iid draws from ν.
    pub fn sample_iid(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        let mut out: Vec<f64> = match &self.kind {
            MeasureKind::Empirical { sample } => (0..n).map(|_| sample[rng.random_range(0..sample.len())]).collect(),
            MeasureKind::Density(DensityGrid {
                shape: DensityShape::Jacobi { .. },
                ..
            }) => (0..n).map(|_| self.quantile(rng.random::<f64>())).collect(),
            _ => {
                let cum: Vec<f64> = self
                    .masses
                    .iter()
                    .scan(0.0, |s, m| {
                        *s += m;
                        Some(*s)
                    })
                    .collect();
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
                        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                        self.points[k]
                    })
                    .collect()
            }
        };
        out.sort_by(f64::total_cmp);
        out
    }

    /// v_i = Q((i − ½)/N).
    pub fn quantile_potential(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.quantile((i as f64 - 0.5) / n as f64)).collect()
    }

    /// sup over z = E + i, E ∈ [lo − 2, hi + 2], of |m_self(z) − m_other(z)|.
    pub fn stieltjes_distance(&self, other: &SpectralMeasure, grid: usize) -> f64 {
        let lo = self.lo.min(other.lo) - 2.0;
        let hi = self.hi.max(other.hi) + 2.0;
        (0..grid.max(2))
            .map(|k| {
                let e = lo + (hi - lo) * k as f64 / (grid.max(2) - 1) as f64;
                let z = Complex64::new(e, 1.0);
                (self.stieltjes(z) - other.stieltjes(z)).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Quantile potential v_i = Q((i − ½)/N).
pub fn deterministic_quantile_potential(nu: &SpectralMeasure, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(LabError::PreconditionViolated("N must be at least 1".into()));
    }
    Ok(nu.quantile_potential(n))
}

/// N iid draws from ν, sorted.
pub fn sample_iid_potential(nu: &SpectralMeasure, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(LabError::PreconditionViolated("N must be at least 1".into()));
    }
    Ok(nu.sample_iid(n, seed))
}

fn merge_sorted(it: impl Iterator<Item = (f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<f64> = Vec::new();
    let mut ms: Vec<f64> = Vec::new();
    for (x, w) in it {
        if pts.last() == Some(&x) {
            *ms.last_mut().unwrap() += w;
        } else {
            pts.push(x);
            ms.push(w);
        }
    }
    (pts, ms)
}

/// (1+v)^a(1−v)^b dv/dφ with v = −cos φ, in half-angle form for accuracy at the ends.
fn jacobi_phi_integrand(a: f64, b: f64, phi: f64) -> f64 {
    let s = (0.5 * phi).sin();
    let c = (0.5 * phi).cos();
    2f64.powf(a + b + 1.0) * s.powf(2.0 * a + 1.0) * c.powf(2.0 * b + 1.0)
}

fn jacobi_partial(a: f64, b: f64, phi: f64) -> f64 {
    if phi <= 0.0 {
        return 0.0;
    }
    let (x, w) = gauss_legendre_on(64, 0.0, phi);
    x.iter().zip(&w).map(|(p, w)| w * jacobi_phi_integrand(a, b, *p)).sum()
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// On-disk measure description, shared by every command that takes a ν.
///
/// ```json
/// {"kind": "atoms", "atoms": [[-0.5, 0.5], [0.5, 0.5]]}
/// {"kind": "jacobi", "density_params": {"a": 0.5, "b": 0.5}}
/// {"kind": "density", "density": {"nodes": [...], "values": [...], "weights": [...]}}
/// {"kind": "empirical", "sample_path": "v.csv"}
/// ```
/// An optional `"support": [lo, hi]` is checked against the constructed measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub kind: MeasureSpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_params: Option<JacobiParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<TabulatedDensity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpecKind {
    Atoms,
    Jacobi,
    Density,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MeasureSpec {
    pub fn two_point(a: f64) -> Self {
        Self::from_atoms(vec![(-a, 0.5), (a, 0.5)])
    }

    pub fn delta0() -> Self {
        Self::from_atoms(vec![(0.0, 1.0)])
    }

    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Self {
        Self {
            kind: MeasureSpecKind::Atoms,
            atoms: Some(atoms),
            density_params: None,
            density: None,
            sample_path: None,
            sample: None,
            support: None,
        }
    }

    pub fn jacobi(a: f64, b: f64) -> Self {
        Self {
            kind: MeasureSpecKind::Jacobi,
            atoms: None,
            density_params: Some(JacobiParams { a, b, nodes: None }),
            density: None,
            sample_path: None,
            sample: None,
            support: None,
        }
    }

    /// Builds the measure; relative `sample_path`s resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<SpectralMeasure> {
        let missing = |f: &str| LabError::InvalidMeasure(format!("measure kind {:?} requires `{f}`", self.kind));
        let nu = match self.kind {
            MeasureSpecKind::Atoms => SpectralMeasure::atoms(self.atoms.as_ref().ok_or_else(|| missing("atoms"))?)?,
            MeasureSpecKind::Jacobi => {
                let p = self.density_params.as_ref().ok_or_else(|| missing("density_params"))?;
                SpectralMeasure::jacobi_with_nodes(p.a, p.b, p.nodes.unwrap_or(JACOBI_NODES))?
            }
            MeasureSpecKind::Density => {
                let d = self.density.as_ref().ok_or_else(|| missing("density"))?;
                SpectralMeasure::density_grid(d.nodes.clone(), d.values.clone(), d.weights.clone())?
            }
            MeasureSpecKind::Empirical => {
                if let Some(s) = &self.sample {
                    SpectralMeasure::empirical(s)?
                } else {
                    let p = self.sample_path.as_ref().ok_or_else(|| missing("sample_path"))?;
                    let path = match base {
                        Some(b) if Path::new(p).is_relative() => b.join(p),
                        _ => Path::new(p).to_path_buf(),
                    };
                    SpectralMeasure::empirical(&read_sample(&path)?)?
                }
            }
        };
        if let Some((lo, hi)) = self.support {
            let (a, b) = nu.support();
            if a < lo - 1e-12 || b > hi + 1e-12 {
                return Err(LabError::InvalidMeasure(format!(
                    "declared support [{lo}, {hi}] does not contain [{a}, {b}]"
                )));
            }
        }
        Ok(nu)
    }
}

/// One number per line (or first CSV column); `#` comments and a non-numeric header are skipped.
fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if k == 0 => continue,
            Err(_) => return Err(LabError::InvalidMeasure(format!("{}:{}: not a number", path.display(), k + 1))),
        }
    }
    Ok(out)
}
