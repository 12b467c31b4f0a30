pub mod bayes;
pub mod cli;
pub mod dispatch;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod linear;
pub mod matio;
pub mod mixed;
pub mod optim;
pub mod report;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{DesignMatrix, GramEigen, SvdFactors};
pub use linear::{EstimateReport, Method, VarianceComponents};
