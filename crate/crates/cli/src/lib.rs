//! Library face of the `corridor` command-line tool.
//!
//! Every subcommand is a plain function over paths (see [`commands`]), so
//! integration tests drive the exact production code paths in-process; the
//! binary in `main.rs` is a thin argument-parsing shell around them.
//!
//! Scene recipes (key-value scene configs) live in [`recipe`], pipeline
//! specs (detector/tracker/fusion/eval selection) in [`pipeline`].

use corridor_core::evaluation::EvalError;
use corridor_core::formats::FormatError;
use corridor_core::geometry::GeometryError;
use corridor_core::simulator::SimError;
use corridor_core::timesync::TimesyncError;
use corridor_core::tracking::TrackingError;
use thiserror::Error;

pub mod commands;
pub mod pipeline;
pub mod recipe;

/// Process exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Invalid configuration or unusable input (missing files, bad ranges).
pub const EXIT_VALIDATION: i32 = 2;
/// Malformed file content (csv/JSON/config syntax or schema).
pub const EXIT_PARSE: i32 = 3;
/// Estimation or fitting failure on well-formed input.
pub const EXIT_NUMERICS: i32 = 4;

/// Top-level command failure, bucketed by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 2: the request itself cannot be honored (config field out of
    /// range, missing input file, infeasible scene).
    #[error("{0}")]
    Validation(String),
    /// Exit 3: an input file exists but does not parse against its schema.
    #[error("{0}")]
    Parse(String),
    /// Exit 4: inputs were well-formed but a numerical step failed
    /// (degenerate fit, no shared objects, singular system).
    #[error("{0}")]
    Numerics(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Numerics(_) => EXIT_NUMERICS,
        }
    }

    /// Annotates an error with the file it arose from.
    pub fn in_file(self, path: &std::path::Path) -> CliError {
        let tag = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Validation(m) => CliError::Validation(tag(m)),
            CliError::Parse(m) => CliError::Parse(tag(m)),
            CliError::Numerics(m) => CliError::Numerics(tag(m)),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            // A file we cannot read at all is an input problem, not a
            // syntax problem.
            FormatError::Io(_) => CliError::Validation(e.to_string()),
            FormatError::Parse { .. } | FormatError::MissingKey(_) => {
                CliError::Parse(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            // Precondition failures the caller could have checked.
            GeometryError::TooFewPoints { .. } | GeometryError::NoAbovePlaneSamples => {
                CliError::Validation(e.to_string())
            }
            // Data-dependent fitting failures.
            GeometryError::DegenerateConfiguration
            | GeometryError::AtInfinity
            | GeometryError::ParallelLines
            | GeometryError::DegenerateX => CliError::Numerics(e.to_string()),
        }
    }
}

impl From<TimesyncError> for CliError {
    fn from(e: TimesyncError) -> Self {
        CliError::Numerics(e.to_string())
    }
}

impl From<TrackingError> for CliError {
    fn from(e: TrackingError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(_) => CliError::Validation(e.to_string()),
            EvalError::ZeroDistance => CliError::Numerics(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Reads a whole file, mapping the failure to a validation error naming
/// the path.
pub(crate) fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Writes a whole file, mapping the failure to a validation error naming
/// the path.
pub(crate) fn write_file(path: &std::path::Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_their_documented_exit_codes() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 2);
        assert_eq!(CliError::Parse(String::new()).exit_code(), 3);
        assert_eq!(CliError::Numerics(String::new()).exit_code(), 4);

        let parse: CliError = FormatError::Parse {
            line: 3,
            message: "bad row".into(),
        }
        .into();
        assert_eq!(parse.exit_code(), 3);
        let sim: CliError = SimError::InfeasibleDensity("too dense".into()).into();
        assert_eq!(sim.exit_code(), 2);
        let fit: CliError = GeometryError::DegenerateConfiguration.into();
        assert_eq!(fit.exit_code(), 4);
        let few: CliError = GeometryError::TooFewPoints { needed: 4, got: 0 }.into();
        assert_eq!(few.exit_code(), 2);
    }
}
