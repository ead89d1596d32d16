pub mod arrangements;
pub mod exact_calculus;
pub mod fixed;
pub mod phase;
pub mod phase_sums;
pub mod sieves;
pub mod summation;
pub mod symbolic_blocks;
pub mod weights;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
