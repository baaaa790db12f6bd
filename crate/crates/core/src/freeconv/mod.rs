//! Free convolution of the semicircle with ν: the m_fc fixed point, edges,
//! the density and classical locations, and the time-dependent family.

mod endpoints;
mod flow;
mod law;
mod solver;

pub use endpoints::{find_endpoints, h_function, Endpoints};
pub use flow::{burger_residual, law_at_time, law_at_time_with, theta_at, DEFAULT_VARPI};
pub use law::{FreeConvolutionLaw, LawOptions, Side};
pub use solver::{iterate_from, m_semicircle, solve_mfc, FixedPointMap, SolverOptions, StieltjesSolution};
