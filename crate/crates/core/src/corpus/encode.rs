use serde::{Deserialize, Serialize};

use crate::corpus::example::{Example, Polarity, Span};
use crate::corpus::vocab::{Vocabulary, PAD};
use crate::error::{Error, Result};

/// A fixed-length index sequence ready for the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    /// Exactly `pad_len` ids; positions `>= valid_len` are [`PAD`].
    pub ids: Vec<usize>,
    pub valid_len: usize,
    /// Target span within the window.
    pub target: Span,
    pub polarity: Polarity,
    /// Offset of the window into the original token sequence.
    pub window_start: usize,
}

/// Pads to `pad_len` with [`PAD`], or cuts a `pad_len` window centered on the
/// target when the sentence is longer.
pub fn encode(example: &Example, vocab: &Vocabulary, pad_len: usize) -> Result<EncodedExample> {
    let n = example.tokens.len();
    let span = example.target;
    if span.is_empty() || span.end > n {
        return Err(Error::Contract(format!(
            "target span {}..{} invalid for {n} tokens",
            span.start, span.end
        )));
    }
    if span.len() > pad_len {
        return Err(Error::Unrepresentable(format!(
            "target of {} tokens exceeds padding length {pad_len}",
            span.len()
        )));
    }

    let window_start = if n <= pad_len {
        0
    } else {
        let center = (span.start + span.end) / 2;
        center.saturating_sub(pad_len / 2).min(n - pad_len)
    };
    let valid_len = n.min(pad_len);
    let mut ids: Vec<usize> = example.tokens[window_start..window_start + valid_len]
        .iter()
        .map(|t| vocab.id(t))
        .collect();
    ids.resize(pad_len, PAD);

    let target = Span::new(span.start - window_start, span.end - window_start);
    debug_assert!(target.end <= valid_len);
    Ok(EncodedExample {
        ids,
        valid_len,
        target,
        polarity: example.polarity,
        window_start,
    })
}

pub fn encode_all(examples: &[Example], vocab: &Vocabulary, pad_len: usize) -> Result<Vec<EncodedExample>> {
    examples.iter().map(|e| encode(e, vocab, pad_len)).collect()
}

impl EncodedExample {
    /// Maps ids back to tokens (unknown ids decode to `<unk>`).
    pub fn decode(&self, vocab: &Vocabulary) -> Vec<String> {
        self.ids[..self.valid_len]
            .iter()
            .map(|&i| vocab.token(i).unwrap_or("<unk>").to_string())
            .collect()
    }
}
