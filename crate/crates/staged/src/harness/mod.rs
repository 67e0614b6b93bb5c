//! Differential analysis of the disciplines: an extrusion oracle, the
//! check comparison, the bundled corpus with its golden grid, and a
//! random generator of well-typed programs.

mod analysis;
mod corpus;
mod generate;

pub use analysis::*;
pub use corpus::*;
pub use generate::*;
