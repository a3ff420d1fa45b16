//! Label vocabularies shared by the corpus, backends and evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Error classes of the two benchmark suites. `Correct` is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorLabel {
    Correct,
    // MBI
    InvalidParameter,
    ResourceLeak,
    RequestLifecycle,
    EpochLifecycle,
    LocalConcurrency,
    ParameterMatching,
    MessageRace,
    CallOrdering,
    GlobalConcurrency,
    // MPI-CorrBench
    ArgError,
    ArgMismatch,
    MissplacedCall,
    MissingCall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelFamily {
    Mbi,
    CorrBench,
}

impl ErrorLabel {
    pub const ALL: [ErrorLabel; 14] = [
        ErrorLabel::Correct,
        ErrorLabel::InvalidParameter,
        ErrorLabel::ResourceLeak,
        ErrorLabel::RequestLifecycle,
        ErrorLabel::EpochLifecycle,
        ErrorLabel::LocalConcurrency,
        ErrorLabel::ParameterMatching,
        ErrorLabel::MessageRace,
        ErrorLabel::CallOrdering,
        ErrorLabel::GlobalConcurrency,
        ErrorLabel::ArgError,
        ErrorLabel::ArgMismatch,
        ErrorLabel::MissplacedCall,
        ErrorLabel::MissingCall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorLabel::Correct => "Correct",
            ErrorLabel::InvalidParameter => "InvalidParameter",
            ErrorLabel::ResourceLeak => "ResourceLeak",
            ErrorLabel::RequestLifecycle => "RequestLifecycle",
            ErrorLabel::EpochLifecycle => "EpochLifecycle",
            ErrorLabel::LocalConcurrency => "LocalConcurrency",
            ErrorLabel::ParameterMatching => "ParameterMatching",
            ErrorLabel::MessageRace => "MessageRace",
            ErrorLabel::CallOrdering => "CallOrdering",
            ErrorLabel::GlobalConcurrency => "GlobalConcurrency",
            ErrorLabel::ArgError => "ArgError",
            ErrorLabel::ArgMismatch => "ArgMismatch",
            ErrorLabel::MissplacedCall => "MissplacedCall",
            ErrorLabel::MissingCall => "MissingCall",
        }
    }

    /// Families the label can appear in; `Correct` belongs to both.
    pub fn families(self) -> &'static [LabelFamily] {
        match self {
            ErrorLabel::Correct => &[LabelFamily::Mbi, LabelFamily::CorrBench],
            ErrorLabel::ArgError | ErrorLabel::ArgMismatch | ErrorLabel::MissplacedCall | ErrorLabel::MissingCall => {
                &[LabelFamily::CorrBench]
            }
            _ => &[LabelFamily::Mbi],
        }
    }

    pub fn is_correct(self) -> bool {
        self == ErrorLabel::Correct
    }

    pub fn to_binary(self) -> BinaryLabel {
        to_binary(self)
    }
}

impl fmt::Display for ErrorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label '{0}'")]
pub struct UnknownLabel(pub String);

impl FromStr for ErrorLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    Correct,
    Incorrect,
}

impl BinaryLabel {
    pub fn name(self) -> &'static str {
        match self {
            BinaryLabel::Correct => "Correct",
            BinaryLabel::Incorrect => "Incorrect",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn to_binary(label: ErrorLabel) -> BinaryLabel {
    if label.is_correct() {
        BinaryLabel::Correct
    } else {
        BinaryLabel::Incorrect
    }
}

/// Class name as seen by a classifier: an error label in error-type mode,
/// `Correct`/`Incorrect` in binary mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub String);

impl ClassLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<ErrorLabel> for ClassLabel {
    fn from(l: ErrorLabel) -> Self {
        ClassLabel(l.name().to_string())
    }
}

impl From<BinaryLabel> for ClassLabel {
    fn from(l: BinaryLabel) -> Self {
        ClassLabel(l.name().to_string())
    }
}

impl From<&str> for ClassLabel {
    fn from(s: &str) -> Self {
        ClassLabel(s.to_string())
    }
}
