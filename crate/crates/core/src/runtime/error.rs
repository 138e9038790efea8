use std::fmt;

use thiserror::Error;

use crate::ast::SourceSpan;
use crate::metalink::LinkError;
use crate::parser::SyntaxError;
use crate::reify::ReifyError;
use crate::symbol::Sym;
use crate::value::Value;

/// One line of a stack trace: `Class>>selector (file:start-end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceLine {
    pub label: String,
    pub span: Option<SourceSpan>,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.span {
            Some(span) => write!(f, "{} ({})", self.label, span),
            None => f.write_str(&self.label),
        }
    }
}

pub fn format_trace(trace: &[TraceLine]) -> String {
    trace.iter().map(|l| format!("{l}\n")).collect()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ErrorKind {
    #[error("{receiver} does not understand #{selector}")]
    DoesNotUnderstand { receiver: String, selector: Sym },
    #[error("undefined variable '{0}'")]
    UndefinedVariable(Sym),
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("division by zero")]
    ZeroDivide,
    #[error("#{selector} expected {expected} argument")]
    WrongArgumentType { selector: Sym, expected: &'static str },
    #[error("wrong number of arguments: expected {expected}, got {got}")]
    WrongArgumentCount { expected: usize, got: usize },
    #[error("index {index} out of bounds for size {size}")]
    IndexOutOfBounds { index: i64, size: usize },
    #[error("block cannot return: its home method has already returned")]
    BlockCannotReturn,
    #[error("stack depth limit of {0} activations exceeded")]
    StackOverflow(usize),
    #[error("cannot instantiate {0}")]
    NotInstantiable(Sym),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Reify(#[from] ReifyError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind}")]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub span: Option<SourceSpan>,
    /// Innermost activation first.
    pub trace: Vec<TraceLine>,
}

/// The kernel signal raised by `Halt now`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaltSignal {
    pub message: String,
    pub trace: Vec<TraceLine>,
}

impl fmt::Display for HaltSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\n{}", self.message, format_trace(&self.trace))
    }
}

/// Non-local exits out of an evaluation.
#[derive(Clone, Debug)]
pub enum Unwind {
    /// `^value` travelling to the activation with serial `home`.
    Return { home: u64, value: Value },
    Halt(HaltSignal),
    Error(RuntimeError),
}

impl Unwind {
    pub fn as_error(&self) -> Option<&RuntimeError> {
        match self {
            Unwind::Error(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("runtime error: {error}")]
    Runtime { error: Box<RuntimeError>, output: String },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LookupError {
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("{class} has no method #{selector}")]
    UnknownSelector { class: String, selector: String },
    #[error("{class}>>#{selector} is a primitive and has no syntax tree")]
    Primitive { class: String, selector: String },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RecompileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("source defines #{found}, expected #{expected}")]
    SelectorMismatch { expected: Sym, found: Sym },
    #[error(transparent)]
    Lookup(#[from] LookupError),
}
