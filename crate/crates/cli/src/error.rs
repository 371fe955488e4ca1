use std::fmt;
use std::process::ExitCode;

/// Failure categories, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(kzk_core::Error),
    Io(std::io::Error),
}

pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const CFL: u8 = 3;
    pub const INSTABILITY: u8 = 4;
    pub const IO: u8 = 5;
    pub const BUDGET: u8 = 6;
}

impl CliError {
    pub fn code(&self) -> u8 {
        use kzk_core::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io(_) => exit::IO,
            CliError::Core(e) => match e {
                E::InvalidConfig { .. } | E::InvalidArgument(_) | E::EmptyRegion(_) => exit::CONFIG,
                E::Cfl(_) => exit::CFL,
                E::Instability { .. } | E::NonFinite(_) => exit::INSTABILITY,
                E::BudgetExceeded { .. } => exit::BUDGET,
                E::Io(_) | E::Format(_) => exit::IO,
                E::ShapeMismatch(_) | E::ZeroNorm => exit::INTERNAL,
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self.code() {
            exit::CONFIG => "configuration",
            exit::CFL => "cfl",
            exit::INSTABILITY => "instability",
            exit::IO => "io",
            exit::BUDGET => "budget",
            _ => "internal",
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<kzk_core::Error> for CliError {
    fn from(e: kzk_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
