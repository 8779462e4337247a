use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Dense class identifier assigned by a split (seen classes first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Seen,
    Unseen,
}

/// Which class semantics feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variation {
    /// Word vector of the class name only.
    OnlyClassName,
    /// Word vector of the generated description only.
    OnlyChatGpt,
    /// Learned fusion of both.
    Ours,
}

impl Variation {
    pub const ALL: [Variation; 3] = [Variation::OnlyClassName, Variation::OnlyChatGpt, Variation::Ours];

    pub fn as_str(self) -> &'static str {
        match self {
            Variation::OnlyClassName => "only-class-name",
            Variation::OnlyChatGpt => "only-chatgpt",
            Variation::Ours => "ours",
        }
    }

    /// Row label used in printed tables.
    pub fn label(self) -> &'static str {
        match self {
            Variation::OnlyClassName => "Only Class Name",
            Variation::OnlyChatGpt => "Only ChatGPT",
            Variation::Ours => "Ours",
        }
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "only-class-name" | "class-name" | "only class name" => Ok(Variation::OnlyClassName),
            "only-chatgpt" | "chatgpt" | "only chatgpt" => Ok(Variation::OnlyChatGpt),
            "ours" | "fused" => Ok(Variation::Ours),
            other => Err(Error::Contract(format!("unknown variation {other:?}"))),
        }
    }
}

/// Evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Unseen test samples, unseen candidates only.
    Zsl,
    /// Seen and unseen test samples, union of candidates.
    Gzsl,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Zsl => "zsl",
            Mode::Gzsl => "gzsl",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zsl" => Ok(Mode::Zsl),
            "gzsl" => Ok(Mode::Gzsl),
            other => Err(Error::Contract(format!("unknown mode {other:?}"))),
        }
    }
}
