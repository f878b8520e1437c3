use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label. Label 1 is subjective text, label 2 is objective text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    One,
    Two,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::One, Label::Two];

    /// Zero-based class index used by the network output layer.
    pub fn index(self) -> usize {
        match self {
            Label::One => 0,
            Label::Two => 1,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Label::One),
            1 => Ok(Label::Two),
            other => Err(Error::validation(format!("class index {other} out of range"))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::One => Label::Two,
            Label::Two => Label::One,
        }
    }

    /// Label assigned to a label-2 probability: strictly below the threshold is label 1.
    pub fn from_score(score: f64, threshold: f64) -> Self {
        if score < threshold {
            Label::One
        } else {
            Label::Two
        }
    }

    /// One-hot encoding `[1, 0]` or `[0, 1]`.
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Label::One => [1.0, 0.0],
            Label::Two => [0.0, 1.0],
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Label::One),
            2 => Ok(Label::Two),
            other => Err(Error::validation(format!("label must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::One => 1,
            Label::Two => 2,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}
