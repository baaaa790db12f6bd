//! Reference β-ensembles: the time-dependent potential whose equilibrium
//! density is ρ_fc(t), the equations of motion of its classical locations,
//! the Gibbs density and a Metropolis sampler, the first-order loop
//! equation, and conditioned external potentials with their regularity
//! diagnostics.

mod eom;
mod external;
mod gibbs;
mod potential;

pub use eom::{eom_propagate, eom_propagate_with, EomTrajectory, EOM_MAX_STEP};
pub use external::{
    conditioned_external_potential, regularity_check, regularity_check_with, ExternalPotential, RegularityOptions, RegularityReport,
};
pub use gibbs::{
    beta_log_density, mcmc_chains, mcmc_sample, semicircle_locations, BetaEnsembleState, McmcChain, McmcDiagnostics, McmcOptions,
    MCMC_MAX_N,
};
pub use potential::{
    build_potential, loop_equation_residual, loop_equation_residual_with, loop_equation_terms, max_prime_gap, EdgeExtension, Potential,
    PotentialModel, ShiftedPotential, ZeroPotential, LOOP_EQUATION_NODES,
};
