//! File formats: law and classical-location tables, local-law and rigidity
//! tables, the binary matrix dump, and pretty JSON.

use crate::ensemble::{BetaClass, MatrixData, MatrixSample};
use crate::error::{LabError, Result};
use crate::freeconv::FreeConvolutionLaw;
use crate::spectral::{LocalLawReport, RigidityReport};
use num_complex::Complex64;
use serde::Serialize;
use std::io::{Read, Write};
use std::path::Path;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| LabError::Io(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawHeader {
    pub theta: f64,
    #[serde(rename = "L_minus")]
    pub l_minus: f64,
    #[serde(rename = "L_plus")]
    pub l_plus: f64,
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub eta_floor: f64,
    pub nu_digest: String,
}

impl LawHeader {
    pub fn of(law: &FreeConvolutionLaw) -> Self {
        let ep = law.endpoints();
        Self {
            theta: law.theta(),
            l_minus: ep.l_minus,
            l_plus: ep.l_plus,
            zeta_minus: ep.zeta_minus,
            zeta_plus: ep.zeta_plus,
            eta_floor: law.eta_floor(),
            nu_digest: law.nu().digest(),
        }
    }
}

/// CSV (E, rho) on the law's own node grid, plus `<stem>.json` with the header.
pub fn write_law(path: &Path, law: &FreeConvolutionLaw) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["E", "rho"])?;
    let (es, rho) = law.density_grid();
    for (e, r) in es.iter().zip(rho) {
        w.write_record([e.to_string(), r.to_string()])?;
    }
    w.flush()?;
    write_json(&path.with_extension("json"), &LawHeader::of(law))
}

/// CSV (i, gamma_i), 1-based.
pub fn write_classical_locations(path: &Path, gammas: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "gamma_i"])?;
    for (i, g) in gammas.iter().enumerate() {
        w.write_record([(i + 1).to_string(), g.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV (E, eta, N_eta, median_dev, p90_dev, samples).
pub fn write_local_law(path: &Path, report: &LocalLawReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["E", "eta", "N_eta", "median_dev", "p90_dev", "samples"])?;
    for p in &report.points {
        w.write_record([
            p.e.to_string(),
            p.eta.to_string(),
            p.n_eta.to_string(),
            p.median_dev.to_string(),
            p.p90_dev.to_string(),
            p.samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV (i, lambda, gamma, scaled_dev).
pub fn write_rigidity(path: &Path, lambda: &[f64], gamma: &[f64], report: &RigidityReport) -> Result<()> {
    if lambda.len() != gamma.len() || lambda.len() != report.scaled_dev.len() {
        return Err(LabError::DimensionMismatch { expected: lambda.len(), got: gamma.len() });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "lambda", "gamma", "scaled_dev"])?;
    for i in 0..lambda.len() {
        w.write_record([
            (i + 1).to_string(),
            lambda[i].to_string(),
            gamma[i].to_string(),
            report.scaled_dev[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Little-endian dump: u64 N, u64 β (1 or 2), then the column-major
/// entries as f64 (interleaved re, im for β = 2).
pub fn write_matrix_dump(path: &Path, h: &MatrixSample) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * h.n * h.n);
    buf.extend_from_slice(&(h.n as u64).to_le_bytes());
    buf.extend_from_slice(&(h.beta_class().beta() as u64).to_le_bytes());
    match &h.data {
        MatrixData::Real(a) => a.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        MatrixData::Complex(a) => a.iter().for_each(|v| {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }),
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix_dump(path: &Path) -> Result<MatrixSample> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let word = |k: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * k..8 * k + 8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| LabError::Io("truncated matrix dump".into()))
    };
    let n = u64::from_le_bytes(word(0)?) as usize;
    let beta = u64::from_le_bytes(word(1)?);
    let class = BetaClass::from_beta(beta as u32)?;
    let per = if class == BetaClass::RealSymmetric { 1 } else { 2 };
    let expected = 16 + 8 * per * n * n;
    if bytes.len() != expected {
        return Err(LabError::DimensionMismatch { expected, got: bytes.len() });
    }
    let vals: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    match class {
        BetaClass::RealSymmetric => MatrixSample::from_real(n, vals),
        BetaClass::ComplexHermitian => MatrixSample::from_complex(n, vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_wigner, EnsembleSpec, EntryLaw, PotentialSpec};
    use crate::measure::SpectralMeasure;

    #[test]
    fn matrix_dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        for class in [BetaClass::RealSymmetric, BetaClass::ComplexHermitian] {
            let spec = EnsembleSpec { seed: 3, ..EnsembleSpec::new(class, 7, EntryLaw::Gaussian, PotentialSpec::Zero) };
            let h = sample_wigner(&spec).unwrap();
            let p = dir.path().join("m.bin");
            write_matrix_dump(&p, &h).unwrap();
            let len = std::fs::metadata(&p).unwrap().len() as usize;
            assert_eq!(len, 16 + 8 * 49 * class.beta() as usize);
            let back = read_matrix_dump(&p).unwrap();
            assert_eq!(back.data, h.data);
        }
    }

    #[test]
    fn law_export_has_header() {
        let law = FreeConvolutionLaw::solve(&SpectralMeasure::delta0(), 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("law.csv");
        write_law(&p, &law).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("E,rho\n"));
        let head: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.with_extension("json")).unwrap()).unwrap();
        assert!((head["L_plus"].as_f64().unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(head["theta"], 1.0);
        let q = dir.path().join("gamma.csv");
        write_classical_locations(&q, &law.classical_locations(5).unwrap()).unwrap();
        let text = std::fs::read_to_string(&q).unwrap();
        assert!(text.starts_with("i,gamma_i\n1,"));
        assert_eq!(text.lines().count(), 6);
    }
}
