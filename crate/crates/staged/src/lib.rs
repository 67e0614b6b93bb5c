//! A two-stage effect-handler calculus and its compilation pipeline.
//!
//! Source programs mix compile-time code (which may quote and splice
//! run-time code) with algebraic effects at both stages. The pipeline is:
//!
//! 1. [`surface`] parses `.sl` files and prints terms.
//! 2. [`source_typeck`] checks the two-level, mode-indexed type system;
//!    [`classifier_typeck`] optionally checks the refined
//!    environment-classifier variant that rules out scope extrusion
//!    statically.
//! 3. [`elaborator`] translates a checked program into the core calculus,
//!    inserting one of four dynamic scope-extrusion disciplines.
//! 4. [`core_machine`] type checks and runs core terms on an abstract
//!    machine whose result is the generated code.
//! 5. [`harness`] compares the disciplines, generates random programs, and
//!    checks the relations the disciplines should satisfy.

pub mod classifier_typeck;
pub mod core_machine;
pub mod elaborator;
pub mod harness;
pub mod kernel_syntax;
pub mod source_typeck;
pub mod surface;
mod unify;
