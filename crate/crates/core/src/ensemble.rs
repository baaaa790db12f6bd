//! Wigner matrices, deformed and time-interpolated ensembles, and the
//! moment-matched entry laws.

use crate::error::{LabError, Result};
use crate::measure::MeasureSpec;
use crate::seed::{self, LabRng};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Desk-scale size cap.
pub const MAX_N: usize = 4096;
/// Default upper bound C₁ on target fourth moments.
pub const DEFAULT_C1: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaClass {
    /// β = 1.
    RealSymmetric,
    /// β = 2.
    ComplexHermitian,
}

impl BetaClass {
    pub fn beta(self) -> f64 {
        match self {
            BetaClass::RealSymmetric => 1.0,
            BetaClass::ComplexHermitian => 2.0,
        }
    }

    pub fn from_beta(beta: u32) -> Result<Self> {
        match beta {
            1 => Ok(BetaClass::RealSymmetric),
            2 => Ok(BetaClass::ComplexHermitian),
            b => Err(LabError::PreconditionViolated(format!("beta = {b} must be 1 or 2"))),
        }
    }
}

/// A standardized (mean 0, variance 1) law for the scaled entries √N·w_ij.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum EntryLaw {
    Gaussian,
    Rademacher,
    /// Uniform on [−√3, √3].
    Uniform,
    /// Laplace with scale 1/√2.
    Laplace,
    Matched { m3: f64, m4: f64, gamma: f64 },
}

impl EntryLaw {
    pub fn sampler(&self) -> Result<EntrySampler> {
        Ok(match *self {
            EntryLaw::Gaussian => EntrySampler::Gaussian,
            EntryLaw::Rademacher => EntrySampler::Rademacher,
            EntryLaw::Uniform => EntrySampler::Uniform,
            EntryLaw::Laplace => EntrySampler::Laplace,
            EntryLaw::Matched { m3, m4, gamma } => EntrySampler::Matched(matched_entry_law(m3, m4, gamma)?),
        })
    }
}

/// Resolved entry law, ready to draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntrySampler {
    Gaussian,
    Rademacher,
    Uniform,
    Laplace,
    Matched(MatchedLaw),
}

impl EntrySampler {
    #[inline]
    pub fn draw(&self, rng: &mut LabRng) -> f64 {
        match self {
            EntrySampler::Gaussian => StandardNormal.sample(rng),
            EntrySampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntrySampler::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
            EntrySampler::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s * e * std::f64::consts::FRAC_1_SQRT_2
            }
            EntrySampler::Matched(m) => m.draw(rng),
        }
    }
}

/// ζ′ = √(1−γ)·ζ_γ + √γ·G with ζ_γ on the three atoms {−b, 0, c}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedLaw {
    pub gamma: f64,
    pub atoms: [(f64, f64); 3],
    pub target: (f64, f64),
}

/// E G^k for standard Gaussian G.
fn gaussian_moment(k: u32) -> f64 {
    match k {
        0 => 1.0,
        k if k % 2 == 1 => 0.0,
        k => (1..k).step_by(2).map(f64::from).product(),
    }
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

impl MatchedLaw {
    pub fn draw(&self, rng: &mut LabRng) -> f64 {
        let u: f64 = rng.random();
        let (mut x, mut cum) = (self.atoms[2].0, 0.0);
        for &(a, p) in &self.atoms {
            cum += p;
            if u < cum {
                x = a;
                break;
            }
        }
        let g: f64 = StandardNormal.sample(rng);
        (1.0 - self.gamma).sqrt() * x + self.gamma.sqrt() * g
    }

    /// Raw moments m1..m4 of ζ′, exact by binomial expansion.
    pub fn moments(&self) -> [f64; 4] {
        let a = (1.0 - self.gamma).sqrt();
        let s = self.gamma.sqrt();
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            let k = k as u32 + 1;
            *o = (0..=k)
                .map(|j| {
                    let xj: f64 = self.atoms.iter().map(|&(x, p)| p * x.powi(j as i32)).sum();
                    binom(k, j) * a.powi(j as i32) * s.powi((k - j) as i32) * xj * gaussian_moment(k - j)
                })
                .sum();
        }
        out
    }

    /// |m4(ζ′) − target| / γ, the reported matching constant.
    pub fn m4_constant(&self) -> f64 {
        (self.moments()[3] - self.target.1).abs() / self.gamma
    }
}

/// Gaussian-divisible law with moments (0, 1, m3, m4).
pub fn matched_entry_law(m3: f64, m4: f64, gamma: f64) -> Result<MatchedLaw> {
    matched_entry_law_with(m3, m4, gamma, DEFAULT_C1)
}

pub fn matched_entry_law_with(m3: f64, m4: f64, gamma: f64, c1: f64) -> Result<MatchedLaw> {
    if !(m3.is_finite() && m4.is_finite() && gamma.is_finite()) {
        return Err(LabError::NonFinite("matched law targets".into()));
    }
    if m4 < 2.0 {
        return Err(LabError::PreconditionViolated(format!(
            "m4 = {m4} violates m4 − m2² − 1 ≥ 0; no Gaussian-divisible match exists"
        )));
    }
    if m4 > c1 {
        return Err(LabError::PreconditionViolated(format!("m4 = {m4} exceeds C1 = {c1}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LabError::PreconditionViolated(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    let g1 = 1.0 - gamma;
    let m3g = m3 / g1.powf(1.5);
    let m4g = (m4 - 6.0 * gamma * g1 - 3.0 * gamma * gamma) / (g1 * g1);
    let bc = m4g - m3g * m3g;
    if bc < 1.0 {
        return Err(LabError::PreconditionViolated(format!(
            "gamma = {gamma} too large for (m3, m4) = ({m3}, {m4}): the three-atom system is infeasible"
        )));
    }
    let b = 0.5 * (-m3g + (m3g * m3g + 4.0 * bc).sqrt());
    let c = b + m3g;
    let p = 1.0 / (b * (b + c));
    let r = 1.0 / (c * (b + c));
    let q = 1.0 - 1.0 / bc;
    Ok(MatchedLaw {
        gamma,
        atoms: [(-b, p), (0.0, q), (c, r)],
        target: (m3, m4),
    })
}

/// Largest γ on a fine grid for which the three-atom system stays feasible.
pub fn gamma_max(m3: f64, m4: f64) -> f64 {
    let mut best = 0.0;
    for k in 1..1000 {
        let g = k as f64 / 1000.0;
        if matched_entry_law(m3, m4, g).is_ok() {
            best = g;
        } else if best > 0.0 {
            break;
        }
    }
    best
}

/// Monte Carlo P(|ζ| > x) at x ∈ {3, 5, 8} for a standardized entry law.
pub fn tail_probabilities(law: &EntryLaw, draws: usize, seed: u64) -> Result<[(f64, f64); 3]> {
    let s = law.sampler()?;
    let mut rng = seed::rng(seed);
    let xs = [3.0, 5.0, 8.0];
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let v = s.draw(&mut rng).abs();
        for (c, x) in counts.iter_mut().zip(xs) {
            if v > x {
                *c += 1;
            }
        }
    }
    Ok([0, 1, 2].map(|k| (xs[k], counts[k] as f64 / draws as f64)))
}

/// How the diagonal V is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum PotentialSpec {
    /// V = 0.
    Zero,
    Deterministic { values: Vec<f64> },
    /// v_i = Q_ν((i − ½)/N).
    Quantile { measure: MeasureSpec },
    /// iid draws from ν. Without a fixed seed every sample draws a fresh V.
    Iid {
        measure: MeasureSpec,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl PotentialSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, PotentialSpec::Iid { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub beta_class: BetaClass,
    #[serde(rename = "N")]
    pub n: usize,
    pub entry_law: EntryLaw,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(beta_class: BetaClass, n: usize, entry_law: EntryLaw, potential: PotentialSpec) -> Self {
        Self {
            beta_class,
            n,
            entry_law,
            potential,
            t0: 0.0,
            t: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_N {
            return Err(LabError::PreconditionViolated(format!("N = {} must lie in [1, {MAX_N}]", self.n)));
        }
        if !(self.t >= 0.0 && self.t0 >= 0.0) || !self.t.is_finite() || !self.t0.is_finite() {
            return Err(LabError::PreconditionViolated("times t, t0 must be finite and nonnegative".into()));
        }
        if let PotentialSpec::Deterministic { values } = &self.potential {
            if values.len() != self.n {
                return Err(LabError::DimensionMismatch {
                    expected: self.n,
                    got: values.len(),
                });
            }
        }
        self.entry_law.sampler()?;
        Ok(())
    }

    /// Stable hex digest of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let v = serde_json::to_value(self).expect("spec serializes");
        hex::encode(Sha256::digest(crate::canonical_json(&v).as_bytes()))
    }

    /// Copy for sample `index` of a farm: the seed becomes hash(seed, index).
    pub fn for_sample(&self, index: u64) -> Self {
        Self {
            seed: seed::derive(self.seed, index),
            ..self.clone()
        }
    }

    /// The realized diagonal v (sorted for quantile and iid potentials).
    pub fn potential_values(&self) -> Result<Vec<f64>> {
        Ok(match &self.potential {
            PotentialSpec::Zero => vec![0.0; self.n],
            PotentialSpec::Deterministic { values } => values.clone(),
            PotentialSpec::Quantile { measure } => measure.build(None)?.quantile_potential(self.n),
            PotentialSpec::Iid { measure, seed: s } => {
                let sd = s.unwrap_or_else(|| seed::derive_named(self.seed, "potential"));
                measure.build(None)?.sample_iid(self.n, sd)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub spec_digest: String,
    pub seed: u64,
    pub t: f64,
}

/// Dense Hermitian storage, full matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Real(Vec<f64>),
    /// Interleaved (re, im) pairs.
    Complex(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub n: usize,
    pub data: MatrixData,
    pub provenance: Provenance,
}

impl MatrixSample {
    pub fn zeros(beta: BetaClass, n: usize) -> Self {
        let data = match beta {
            BetaClass::RealSymmetric => MatrixData::Real(vec![0.0; n * n]),
            BetaClass::ComplexHermitian => MatrixData::Complex(vec![Complex64::new(0.0, 0.0); n * n]),
        };
        Self {
            n,
            data,
            provenance: Provenance {
                spec_digest: String::new(),
                seed: 0,
                t: 0.0,
            },
        }
    }

    pub fn from_real(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(LabError::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let mut m = Self::zeros(BetaClass::RealSymmetric, 0);
        m.n = n;
        m.data = MatrixData::Real(a);
        Ok(m)
    }

    pub fn from_complex(n: usize, a: Vec<Complex64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(LabError::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let mut m = Self::zeros(BetaClass::ComplexHermitian, 0);
        m.n = n;
        m.data = MatrixData::Complex(a);
        Ok(m)
    }

    pub fn beta_class(&self) -> BetaClass {
        match self.data {
            MatrixData::Real(_) => BetaClass::RealSymmetric,
            MatrixData::Complex(_) => BetaClass::ComplexHermitian,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match &self.data {
            MatrixData::Real(a) => Complex64::new(a[j * self.n + i], 0.0),
            MatrixData::Complex(a) => a[j * self.n + i],
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i).re
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i)).sum()
    }

    /// ‖H‖_F².
    pub fn frobenius_sq(&self) -> f64 {
        match &self.data {
            MatrixData::Real(a) => a.iter().map(|x| x * x).sum(),
            MatrixData::Complex(a) => a.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.n;
        (0..n).all(|j| (j..n).all(|i| self.get(i, j) == self.get(j, i).conj()))
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            MatrixData::Real(a) => a.iter().all(|x| x.is_finite()),
            MatrixData::Complex(a) => a.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
        }
    }

    /// H ← a·H.
    pub fn scale(&mut self, a: f64) {
        match &mut self.data {
            MatrixData::Real(x) => x.iter_mut().for_each(|v| *v *= a),
            MatrixData::Complex(x) => x.iter_mut().for_each(|v| *v *= a),
        }
    }

    /// H ← H + a·G (same class and size).
    pub fn add_scaled(&mut self, a: f64, g: &MatrixSample) -> Result<()> {
        if g.n != self.n {
            return Err(LabError::DimensionMismatch { expected: self.n, got: g.n });
        }
        match (&mut self.data, &g.data) {
            (MatrixData::Real(x), MatrixData::Real(y)) => x.iter_mut().zip(y).for_each(|(u, v)| *u += a * v),
            (MatrixData::Complex(x), MatrixData::Complex(y)) => x.iter_mut().zip(y).for_each(|(u, v)| *u += a * v),
            _ => return Err(LabError::PreconditionViolated("symmetry classes differ".into())),
        }
        Ok(())
    }

    /// H_ii ← H_ii + d_i.
    pub fn add_diagonal(&mut self, d: &[f64]) -> Result<()> {
        if d.len() != self.n {
            return Err(LabError::DimensionMismatch { expected: self.n, got: d.len() });
        }
        let n = self.n;
        match &mut self.data {
            MatrixData::Real(x) => d.iter().enumerate().for_each(|(i, v)| x[i * n + i] += v),
            MatrixData::Complex(x) => d.iter().enumerate().for_each(|(i, v)| x[i * n + i] += v),
        }
        Ok(())
    }
}

fn fill_wigner(beta: BetaClass, n: usize, law: &EntrySampler, rng: &mut LabRng) -> MatrixSample {
    let sn = (n as f64).sqrt().recip();
    let mut m = MatrixSample::zeros(beta, n);
    match &mut m.data {
        MatrixData::Real(a) => {
            for j in 0..n {
                a[j * n + j] = std::f64::consts::SQRT_2 * sn * law.draw(rng);
                for i in j + 1..n {
                    let x = sn * law.draw(rng);
                    a[j * n + i] = x;
                    a[i * n + j] = x;
                }
            }
        }
        MatrixData::Complex(a) => {
            let s2 = sn * std::f64::consts::FRAC_1_SQRT_2;
            for j in 0..n {
                a[j * n + j] = Complex64::new(sn * law.draw(rng), 0.0);
                for i in j + 1..n {
                    let x = Complex64::new(s2 * law.draw(rng), s2 * law.draw(rng));
                    a[j * n + i] = x;
                    a[i * n + j] = x.conj();
                }
            }
        }
    }
    m
}

/// W with entry variances 1/N off the diagonal and 2/N (β=1) or 1/N (β=2) on it.
pub fn sample_wigner(spec: &EnsembleSpec) -> Result<MatrixSample> {
    spec.validate()?;
    let law = spec.entry_law.sampler()?;
    let mut rng = seed::rng(seed::derive_named(spec.seed, "wigner"));
    let mut w = fill_wigner(spec.beta_class, spec.n, &law, &mut rng);
    w.provenance = Provenance {
        spec_digest: spec.digest(),
        seed: spec.seed,
        t: spec.t,
    };
    Ok(w)
}

/// Independent GOE/GUE matrix from the "gaussian" stream of the ensemble seed.
pub fn sample_gaussian_component(spec: &EnsembleSpec) -> Result<MatrixSample> {
    spec.validate()?;
    let mut rng = seed::rng(seed::derive_named(spec.seed, "gaussian"));
    Ok(fill_wigner(spec.beta_class, spec.n, &EntrySampler::Gaussian, &mut rng))
}

/// H^θ = θV + W.
pub fn assemble_deformed(theta: f64, v: &[f64], w: &MatrixSample) -> Result<MatrixSample> {
    let mut h = w.clone();
    let d: Vec<f64> = v.iter().map(|x| theta * x).collect();
    h.add_diagonal(&d)?;
    Ok(h)
}

/// e^{−(t−t0)/2}V + e^{−t/2}W + √(1−e^{−t})W′.
pub fn interpolating_matrix(spec: &EnsembleSpec) -> Result<MatrixSample> {
    let v = spec.potential_values()?;
    interpolating_matrix_with(spec, &v)
}

/// Same, with an already realized diagonal.
pub fn interpolating_matrix_with(spec: &EnsembleSpec, v: &[f64]) -> Result<MatrixSample> {
    let mut h = sample_wigner(spec)?;
    let t = spec.t;
    h.scale((-t / 2.0).exp());
    if t > 0.0 {
        let g = sample_gaussian_component(spec)?;
        h.add_scaled((1.0 - (-t).exp()).sqrt(), &g)?;
    }
    let theta = (-(t - spec.t0) / 2.0).exp();
    let h = assemble_deformed(theta, v, &h)?;
    Ok(h)
}
