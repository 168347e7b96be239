use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("grid point (p_core = {p_core}, p_peripheral = {p_peripheral}) failed: {source}")]
    GridPoint {
        p_core: f64,
        p_peripheral: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

/// A single rejected configuration field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Every problem found while parsing or validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub fields: Vec<FieldError>,
}

impl ConfigError {
    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            fields: vec![FieldError {
                field: field.into(),
                message: message.into(),
            }],
        }
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.fields.iter().any(|f| f.field == field)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error")?;
        for (i, field) in self.fields.iter().enumerate() {
            let sep = if i == 0 { ": " } else { "; " };
            write!(f, "{sep}{}: {}", field.field, field.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}
