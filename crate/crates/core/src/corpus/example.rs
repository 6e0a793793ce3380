use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Negative, Polarity::Neutral, Polarity::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Index(format!("polarity class {i}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Positive => "positive",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            "positive" => Ok(Polarity::Positive),
            other => Err(Error::Format(format!("unknown polarity {other:?}"))),
        }
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

/// One classification instance before encoding: a tokenized sentence, the
/// target's token span and its gold polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<String>,
    pub target: Span,
    pub polarity: Polarity,
}

impl Example {
    pub fn new(tokens: Vec<String>, target: Span, polarity: Polarity) -> Result<Self> {
        if target.is_empty() || target.end > tokens.len() {
            return Err(Error::Contract(format!(
                "target span {}..{} invalid for {} tokens",
                target.start,
                target.end,
                tokens.len()
            )));
        }
        Ok(Example {
            tokens,
            target,
            polarity,
        })
    }

    pub fn target_tokens(&self) -> &[String] {
        &self.tokens[self.target.start..self.target.end]
    }

    pub fn valid_len(&self) -> usize {
        self.tokens.len()
    }
}

/// Per-class example counts of a split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub negative: usize,
    pub neutral: usize,
    pub positive: usize,
}

impl ClassCounts {
    pub fn of(examples: &[Example]) -> Self {
        let mut c = ClassCounts::default();
        for e in examples {
            match e.polarity {
                Polarity::Negative => c.negative += 1,
                Polarity::Neutral => c.neutral += 1,
                Polarity::Positive => c.positive += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.negative + self.neutral + self.positive
    }
}
