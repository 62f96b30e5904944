//! Phenotype-structured population dynamics at three levels of description:
//! an agent-based model, a scaled integro-differential equation and its
//! non-local Fokker–Planck limit, plus moment and convergence analysis.

pub mod abm;
pub mod analysis;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod ide;
pub mod io;
pub mod model;
pub mod pde;
pub mod run;

pub use abm::{abm_init, abm_run, AbmRun, AgentPopulation, Compartment};
pub use analysis::{
    epsilon_sweep, fit_log_log, l2_distance, logistic_oracle, moment_ode_residual, moments,
    ConvergenceReport, EnsembleSeries, MomentSeries, Moments,
};
pub use config::{AdvectionScheme, GuardValues, ModelKind, Profile, SimConfig};
pub use diagnostics::Diagnostics;
pub use error::{Result, SimError};
pub use grid::{DistributionState, PhenotypeGrid};
pub use ide::{ide_run, ide_step, IdeSolver, KernelOperator};
pub use model::{
    Gaussian, InitialDatum, KernelFamily, Mollifier, MutationKernel, NetProliferationRate,
    RateProfile,
};
pub use pde::{pde_run, pde_step, PdeSolver};
pub use run::GridRun;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
