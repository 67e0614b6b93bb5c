//! Shared abstract syntax for both calculi and the structural utilities
//! every other module relies on.

pub mod core;
pub mod ops;
pub mod row;
pub mod source;

pub use self::core::*;
pub use ops::{freevars, handler_dom, meta_free_nf, meta_free_term, subst, subst_nf};
pub use row::EffectRow;
pub use source::*;
