//! Numerical laboratory for deformed Wigner matrices: the free convolution
//! of the semicircle with a potential law, matrix and Dyson Brownian motion
//! samplers, a reference β-ensemble, and local eigenvalue statistics.

pub mod beta;
pub mod dbm;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod export;
pub mod freeconv;
pub mod localstats;
pub mod measure;
pub mod quad;
pub mod seed;
pub mod spectral;
pub mod stats;

pub use error::{LabError, Result};
pub use freeconv::{FreeConvolutionLaw, SolverOptions, StieltjesSolution};
pub use measure::{ComplexPoint, MeasureSpec, SpectralMeasure};

/// Canonical JSON text: object keys sorted, no whitespace.
pub fn canonical_json(v: &serde_json::Value) -> String {
    // serde_json's default map is a BTreeMap, so keys serialize sorted.
    serde_json::to_string(v).expect("a Value always serializes")
}
