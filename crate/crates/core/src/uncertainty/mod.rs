pub mod ensemble;
pub mod gamma;
pub mod rng;
pub mod stats;
