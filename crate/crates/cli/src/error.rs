//! Machine-readable failures and their exit codes.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Validation,
    Computation,
}

/// Printed to stderr as one JSON object.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<&'static str>,
    pub message: String,
}

impl CliError {
    pub fn validation(field: &str, message: &str) -> Self {
        Self {
            kind: Kind::Validation,
            field: Some(field.to_string()),
            module: None,
            message: message.to_string(),
        }
    }

    #[cfg(test)]
    pub fn field(&self) -> Option<&str> {
        self.field.as_deref()
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 2,
            Kind::Computation => 1,
        }
    }

    pub fn io(path: &str, err: std::io::Error) -> Self {
        Self {
            kind: Kind::Computation,
            field: Some("out".into()),
            module: None,
            message: format!("{path}: {err}"),
        }
    }
}

/// Library errors: bad parameters are validation failures, everything else is
/// a computation failure tagged with its module.
impl From<qbridge::Error> for CliError {
    fn from(err: qbridge::Error) -> Self {
        match &err {
            qbridge::Error::InvalidParameter { name, .. } => Self {
                kind: Kind::Validation,
                field: Some((*name).to_string()),
                module: Some(err.module()),
                message: err.to_string(),
            },
            _ => Self {
                kind: Kind::Computation,
                field: None,
                module: Some(err.module()),
                message: err.to_string(),
            },
        }
    }
}
