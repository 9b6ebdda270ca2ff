use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record could not be decoded. `field` names the offending field, or
    /// `"<record>"` when the line is not an object at all.
    #[error("parse error{}: field `{field}`: {message}", line_suffix(*.line))]
    Parse {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("alignment error: source has {src} paragraphs, target has {tgt}")]
    Alignment { src: usize, tgt: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid vote: {0}")]
    InvalidVote(String),

    #[error("serialization error: {0}")]
    Serialize(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(n) => format!(" on line {n}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach a 1-based line number to a parse error.
    pub fn at_line(self, n: usize) -> Self {
        match self {
            Error::Parse { field, message, .. } => Error::Parse {
                line: Some(n),
                field,
                message,
            },
            Error::Validation(msg) => Error::Validation(format!("line {n}: {msg}")),
            other => other,
        }
    }

    /// Process exit code: 1 configuration, 2 data, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
