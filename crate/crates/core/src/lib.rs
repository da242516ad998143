//! Safety checking of array programs by backward reachability, with
//! acceleration of local loop transitions and monotonic abstraction of the
//! quantified formulas acceleration produces.

pub mod abstraction;
pub mod accel;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod logic;
pub mod oracle;
pub mod smt;
pub mod spec_format;
pub mod system;

pub use engine::{backward_search, Options, Verdict};
pub use logic::{Formula, SentenceClass, Term};
pub use system::{Program, Transition, TransitionKind};
