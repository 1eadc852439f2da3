use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CommandKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] moncon::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("certification failed: {0}")]
    Certification(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Certification(_) => 2,
            CliError::Core(moncon::Error::BlowUp { .. } | moncon::Error::DomainViolation { .. }) => 3,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "certification_failed",
            3 => "integration_failed",
            _ => "validation_failed",
        }
    }
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    command: String,
    exit_code: u8,
    kind: &'a str,
    message: String,
}

pub fn write_error_json(dir: &Path, command: CommandKind, e: &CliError) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let body = ErrorJson { command: format!("{command:?}").to_lowercase(), exit_code: e.exit_code(), kind: e.kind(), message: e.to_string() };
    let text = serde_json::to_string_pretty(&body).map_err(io::Error::other)?;
    fs::write(dir.join("error.json"), text + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(moncon::Error::Spec("x".into())).exit_code(), 1);
        assert_eq!(CliError::Certification("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(moncon::Error::BlowUp { time: 1.0 }).exit_code(), 3);
    }

    #[test]
    fn error_json_is_machine_readable() {
        let dir = std::env::temp_dir().join(format!("moncon-err-{}", std::process::id()));
        write_error_json(&dir, CommandKind::Simulate, &CliError::Certification("no weights".into())).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("error.json")).unwrap()).unwrap();
        assert_eq!(v["command"], "simulate");
        assert_eq!(v["exit_code"], 2);
        fs::remove_dir_all(dir).unwrap();
    }
}
