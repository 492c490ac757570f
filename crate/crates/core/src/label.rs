use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary verdict for an item. `Fake` covers fake or misleading news.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Reliable,
}

impl Label {
    /// Sign rule for reputations: strictly negative is fake, zero is reliable.
    pub fn from_reputation(q: f64) -> Self {
        if q < 0.0 {
            Label::Fake
        } else {
            Label::Reliable
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Reliable => "reliable",
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Fake => Label::Reliable,
            Label::Reliable => Label::Fake,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fake" | "f" | "-1" => Ok(Label::Fake),
            "reliable" | "nonfake" | "non-fake" | "r" | "1" | "+1" => Ok(Label::Reliable),
            other => Err(Error::InvalidInput(format!("unknown label {other:?}"))),
        }
    }
}
