use std::fmt;

use alob::analytics::AnalyticsError;
use alob::dar::DarError;
use alob::io::config::ConfigError;
use alob::io::ingest::IngestError;
use alob::io::tables::TableError;
use alob::sim::SimError;

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn from_csv(e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::Io(e.to_string())
    } else {
        CliError::Invalid(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(e) => e.into(),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Io(e) => e.into(),
            TableError::Csv(e) => from_csv(e),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(e) => e.into(),
            IngestError::Csv(e) => from_csv(e),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        })*
    };
}

invalid_from!(SimError, DarError, AnalyticsError);
