//! Seeded synthetic experiments and the replicate-sweep harness.
//!
//! Replicate `r` uses seed `base_seed + r`; every random draw within it comes from
//! the stream for its purpose (see [`crate::rng::Stream`]).

mod config;
mod generate;
mod harness;

pub use config::{DesignModel, EffectPrior, ErrorModel, ResponseKind, SimConfig, SCHEMA_VERSION, VARIANCE_SLACK};
pub use generate::{
    block_cholesky, block_corr_matrix, draw_effects, draw_errors, gen_design, gen_effects, gen_fixed_design,
    gen_replicate, gen_response, load_user_design, Effects, Replicate, POISSON_ETA_LIMIT,
};
pub use harness::{run_comparison, run_replicate, SimOutput};
