use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("variable `{0}` is not free in the formula")]
    UnknownVariable(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SystemError {
    #[error("formula mentions primed symbol `{0}`")]
    PrimedSymbol(String),
    #[error("undeclared {kind} `{name}`")]
    Undeclared { kind: &'static str, name: String },
    #[error("duplicate transition name `{0}`")]
    DuplicateTransition(String),
    #[error("initial and error location coincide (`{0}`)")]
    InitIsError(String),
    #[error("transition `{0}`: {1}")]
    Malformed(String, String),
}

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("cannot start solver `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver protocol: {0}")]
    Protocol(String),
    #[error("formula still contains a quantifier after preprocessing")]
    ResidualQuantifier,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Error)]
pub enum AccelError {
    #[error("shape does not describe transition `{0}`")]
    ShapeMismatch(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("formula has an existential under a universal")]
    NotSigma02,
    #[error("no instantiation terms for the universal variables")]
    EmptySet,
    #[error("instantiation needs {needed} instances, cap is {cap}")]
    Cap { needed: usize, cap: usize },
}
