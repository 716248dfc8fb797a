pub mod cli;
pub mod detector;
pub mod evaluation;
pub mod filters;
pub mod imaging;
pub mod stochastic;
#[cfg(feature = "service")]
pub mod service;
