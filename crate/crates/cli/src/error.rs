use std::fmt;

use attngap::encoder::EncoderError;
use attngap::fid::FidError;
use attngap::io::FormatError;
use attngap::metric::MetricError;
use attngap::tensor::TensorError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Io,
    Format,
    Config,
    Degenerate,
    Input,
    Shape,
}

impl ErrorKind {
    pub fn code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Io => 3,
            ErrorKind::Format => 4,
            ErrorKind::Config => 5,
            ErrorKind::Degenerate => 6,
            ErrorKind::Input => 7,
            ErrorKind::Shape => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Io => "io",
            ErrorKind::Format => "format",
            ErrorKind::Config => "config",
            ErrorKind::Degenerate => "degenerate",
            ErrorKind::Input => "input",
            ErrorKind::Shape => "shape",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub msg: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, msg: impl Into<String>) -> Self {
        Self { kind, msg: msg.into() }
    }

    /// One-line diagnostic: `error kind=<name> code=<n> msg="<escaped>"`.
    pub fn diagnostic(&self) -> String {
        format!("error kind={} code={} msg={:?}", self.kind.name(), self.kind.code(), self.msg)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let kind = match &e {
            FormatError::Io { .. } => ErrorKind::Io,
            FormatError::MissingStage { .. } => ErrorKind::Input,
            FormatError::Layout(_) => ErrorKind::Shape,
            FormatError::UnknownReportFormat(_) => ErrorKind::Usage,
            _ => ErrorKind::Format,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let kind = match &e {
            MetricError::ExclusionMismatch(..)
            | MetricError::FingerprintMismatch(..)
            | MetricError::StageMismatch(..)
            | MetricError::InvalidConfig(_)
            | MetricError::TooFewBins(_)
            | MetricError::InvalidStageId(_)
            | MetricError::Tensor(TensorError::BadTemperature(_)) => ErrorKind::Config,
            MetricError::Degenerate(_) => ErrorKind::Degenerate,
            MetricError::EmptySet
            | MetricError::MissingStage { .. }
            | MetricError::DuplicateStage { .. }
            | MetricError::UnknownStage { .. } => ErrorKind::Input,
            MetricError::InvalidHistogram(_) | MetricError::InvalidProfile(_) => ErrorKind::Format,
            MetricError::Tensor(_) => ErrorKind::Shape,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<FidError> for CliError {
    fn from(e: FidError) -> Self {
        let kind = match &e {
            FidError::InsufficientSamples(_) => ErrorKind::Input,
            FidError::Shape(_) => ErrorKind::Shape,
            FidError::NotPsd { .. } => ErrorKind::Degenerate,
            FidError::NonFinite { .. } => ErrorKind::Format,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        let kind = match &e {
            EncoderError::Indivisible { .. } | EncoderError::Tensor(_) => ErrorKind::Shape,
            EncoderError::Config(_) => ErrorKind::Config,
            EncoderError::Image(_) => ErrorKind::Input,
        };
        CliError::new(kind, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let kinds = [
            ErrorKind::Usage,
            ErrorKind::Io,
            ErrorKind::Format,
            ErrorKind::Config,
            ErrorKind::Degenerate,
            ErrorKind::Input,
            ErrorKind::Shape,
        ];
        for (i, a) in kinds.iter().enumerate() {
            assert_ne!(a.code(), 0);
            assert_ne!(a.code(), 1);
            for b in &kinds[i + 1..] {
                assert_ne!(a.code(), b.code());
            }
        }
    }

    #[test]
    fn diagnostic_stays_on_one_line() {
        let e = CliError::new(ErrorKind::Format, "bad \"thing\"\nsecond line");
        let d = e.diagnostic();
        assert!(!d.contains('\n'));
        assert_eq!(d, r#"error kind=format code=4 msg="bad \"thing\"\nsecond line""#);
    }
}
