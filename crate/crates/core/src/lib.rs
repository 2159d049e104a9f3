//! Stochastic heavy-ball momentum, two saddle-bearing test objectives and
//! diagnostics for checking how momentum helps escape saddle points.

pub mod diagnostics;
pub mod linalg;
pub mod optim;
pub mod planner;
pub mod problems;
pub mod rng;
pub mod vector;

pub use vector::ParamVector;
