pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
mod par;
pub mod rng;
pub mod solvers;
pub mod theory;
