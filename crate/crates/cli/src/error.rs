use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input data; exit code 2.
    #[error("{0}")]
    Validation(String),

    /// The numerics broke down; exit code 3.
    #[error("{0}")]
    Numerical(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<dmdt_core::Error> for CliError {
    fn from(e: dmdt_core::Error) -> Self {
        match e {
            dmdt_core::Error::Io(io) => CliError::Io(io),
            e if e.is_validation() => CliError::Validation(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let v: CliError = dmdt_core::Error::InvalidConfig("x".into()).into();
        assert_eq!(v.exit_code(), 2);
        let n: CliError = dmdt_core::Error::Numerical("x".into()).into();
        assert_eq!(n.exit_code(), 3);
        let p: CliError = dmdt_core::Error::Periodic(2).into();
        assert_eq!(p.exit_code(), 3);
    }
}
