//! A small Smalltalk-flavoured object language with sub-method, partial
//! behavioral reflection through metalinks.
//!
//! ```
//! use metalink::Interpreter;
//!
//! let mut interp = Interpreter::new();
//! let run = interp.run_program("Transcript log: 3 + 4").unwrap();
//! assert_eq!(run.output, "7\n");
//! ```

pub mod analysis;
pub mod bench;
pub mod ast;
pub mod lexer;
pub mod listings;
pub mod metalink;
pub mod mirror;
pub mod parser;
pub mod reify;
pub mod runtime;
pub mod symbol;
pub mod tools;
pub mod value;

pub use crate::ast::{Kind, Node, NodeId, NodeQuery};
pub use crate::metalink::{Condition, Control, LinkError, Scope};
pub use crate::reify::{Phase, ReificationKind, ReifyError};
pub use crate::runtime::{Interpreter, Outcome, RunResult};
pub use crate::symbol::Sym;
pub use crate::tools::{BreakpointSite, ToolError, WatchOptions};
pub use crate::value::{ClassId, LinkId, Value};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/language.md")]
    mod language {}
    #[doc = include_str!("../../../book/src/metalinks.md")]
    mod metalinks {}
    #[doc = include_str!("../../../book/src/reifications.md")]
    mod reifications {}
    #[doc = include_str!("../../../book/src/scoping.md")]
    mod scoping {}
    #[doc = include_str!("../../../book/src/reflective-methods.md")]
    mod reflective_methods {}
    #[doc = include_str!("../../../book/src/tools.md")]
    mod tools {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
