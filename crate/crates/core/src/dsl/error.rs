use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("integer literal out of range")]
    IntegerOverflow,
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("loop body has no statements")]
    EmptyBody,
    #[error("duplicate statement label `{0}`")]
    DuplicateLabel(String),
    #[error("loop stride must be +1")]
    NonUnitStride,
    #[error("index expression must have the form {index}, {index}+c or {index}-c")]
    BadIndex { index: String },
    #[error("subscript offset {0} exceeds the supported magnitude")]
    OffsetOutOfRange(i64),
    #[error("loop index `{found}` does not match `{expected}`")]
    IndexMismatch { expected: String, found: String },
    #[error("lower bound {lower} is not below upper bound {upper}")]
    EmptyRange { lower: i64, upper: i64 },
    #[error("array name `{0}` must start with a lowercase letter")]
    BadArrayName(String),
    #[error("scalar `{0}` is not supported; use an array element")]
    Scalar(String),
    #[error("`send` must follow a statement")]
    DanglingSend,
    #[error("`wait` must precede a statement")]
    DanglingWait,
}

/// Syntax or validation failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(line: usize, column: usize, kind: ParseErrorKind) -> Self {
        ParseError { line, column, kind }
    }
}
