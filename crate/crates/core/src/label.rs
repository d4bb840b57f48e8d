use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary content class. Appropriate maps to the SVM's −1 side and
/// Inappropriate to +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Appropriate,
    Inappropriate,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Appropriate, Label::Inappropriate];

    pub fn sign(self) -> f64 {
        match self {
            Label::Appropriate => -1.0,
            Label::Inappropriate => 1.0,
        }
    }

    pub fn from_sign(value: f64) -> Self {
        if value < 0.0 {
            Label::Appropriate
        } else {
            Label::Inappropriate
        }
    }

    pub fn other(self) -> Self {
        match self {
            Label::Appropriate => Label::Inappropriate,
            Label::Inappropriate => Label::Appropriate,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Label::Appropriate => "Appr",
            Label::Inappropriate => "Inap",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Appropriate => f.write_str("appropriate"),
            Label::Inappropriate => f.write_str("inappropriate"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "appropriate" | "appr" | "0" | "-1" => Ok(Label::Appropriate),
            "inappropriate" | "inap" | "1" | "+1" => Ok(Label::Inappropriate),
            other => Err(Error::InvalidParameter(format!("unknown label {other:?}"))),
        }
    }
}

/// Classification outcome attached to a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub label: Label,
    /// Signed decision value; positive leans inappropriate.
    pub score: f64,
}

impl Verdict {
    pub fn from_score(score: f64) -> Self {
        Verdict {
            label: Label::from_sign(score),
            score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_score_is_inappropriate() {
        assert_eq!(Verdict::from_score(0.0).label, Label::Inappropriate);
        assert_eq!(Verdict::from_score(-0.0).label, Label::Inappropriate);
        assert_eq!(Verdict::from_score(-1e-300).label, Label::Appropriate);
    }

    #[test]
    fn parses_labels() {
        assert_eq!("Inappropriate".parse::<Label>().unwrap(), Label::Inappropriate);
        assert_eq!(" appr ".parse::<Label>().unwrap(), Label::Appropriate);
        assert!("maybe".parse::<Label>().is_err());
    }
}
