use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tqc_core::Error),
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: String, source: std::io::Error },
    #[error("usage: {0}")]
    Usage(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("output error at {path}: {source}")]
    Output { path: String, source: std::io::Error },
    #[error("plot error: {0}")]
    Plot(String),
}

impl CliError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::InvalidValue { key: key.into(), reason: reason.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::ReadConfig { .. } => "config_read",
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "config_parse",
            CliError::MissingKey(_) => "missing_key",
            CliError::InvalidValue { .. } => "invalid_value",
            CliError::Output { .. } => "output",
            CliError::Plot(_) => "plot",
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.module(),
            _ => "cli",
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            code: &'a str,
            module: &'a str,
            message: String,
        }
        let r = Report { code: self.code(), module: self.module(), message: self.to_string() };
        serde_json::to_string(&r).expect("error report serializes")
    }
}

pub type CliResult<T> = Result<T, CliError>;
