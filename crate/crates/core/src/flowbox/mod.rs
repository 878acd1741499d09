//! Symplectic flowbox charts and the perturbations built on them.

mod chart;
mod exchange;
mod measure;
mod realize;
mod schedule;

pub use chart::*;
pub use exchange::*;
pub use measure::*;
pub use realize::*;
pub use schedule::*;
