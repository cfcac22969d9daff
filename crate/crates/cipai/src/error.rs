use std::fmt;
use std::process::ExitCode;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad flags, config keys or values.
    Usage = 1,
    /// Unreadable, malformed or inconsistent input files, and non-compliant
    /// poems under `validate`.
    Data = 2,
    /// Non-finite values or a failed gradient check.
    Numerical = 3,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// A failure reported on stderr as `module: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ExitKind,
    pub module: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, module: &'static str, message: impl fmt::Display) -> Self {
        Self {
            kind,
            module,
            message: message.to_string(),
        }
    }

    pub fn usage(module: &'static str, message: impl fmt::Display) -> Self {
        Self::new(ExitKind::Usage, module, message)
    }

    pub fn data(module: &'static str, message: impl fmt::Display) -> Self {
        Self::new(ExitKind::Data, module, message)
    }

    pub fn numerical(module: &'static str, message: impl fmt::Display) -> Self {
        Self::new(ExitKind::Numerical, module, message)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.message)
    }
}

impl std::error::Error for CliError {}
