//! The network: configuration, parameters, forward pass and single-sentence
//! prediction.

pub mod config;
pub mod forward;
pub mod params;

pub use config::{LceMode, ModelConfig, Pooling};
pub use forward::{
    attention_received, embed, forward, lce_additive, lce_dot, mhsa, ForwardOutput, Mode, MhsaOutput,
    SentenceTrace,
};
pub use params::{MhsaIds, ModelParams, ParamIds};

use crate::corpus::{encode, tokenize, Example, Polarity, Span, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::Tape;

/// Model output for one (sentence, target) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Tokens inside the encoded window.
    pub tokens: Vec<String>,
    pub target: Span,
    pub polarity: Polarity,
    pub polarity_probs: [f64; 3],
    /// Tags from the SRD rule.
    pub gold_tags: Vec<u8>,
    /// Argmax of the tag head, per valid token.
    pub predicted_tags: Vec<u8>,
    /// Global attention received per token (see [`attention_received`]).
    pub attention: Vec<f64>,
}

/// Locates the first occurrence of the target's tokens in the sentence.
pub fn locate_target(tokens: &[String], target: &[String]) -> Option<Span> {
    if target.is_empty() || target.len() > tokens.len() {
        return None;
    }
    tokens
        .windows(target.len())
        .position(|w| w == target)
        .map(|start| Span::new(start, start + target.len()))
}

pub fn predict(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &Vocabulary,
    sentence: &str,
    target: &str,
) -> Result<Prediction> {
    let tokens = tokenize(sentence);
    let span = locate_target(&tokens, &tokenize(target))
        .ok_or_else(|| Error::Lookup(format!("target {target:?} does not occur in {sentence:?}")))?;
    // Polarity is unknown here; the encoder needs a placeholder.
    let example = Example::new(tokens, span, Polarity::Neutral)?;
    let encoded = encode(&example, vocab, config.pad_len)?;

    let mut tape = Tape::new();
    let out = forward(&mut tape, params, config, &[&encoded], Mode::Eval)?;
    let probs = tape.value(out.polarity_probs);
    let polarity = Polarity::from_index(probs.argmax_rows()[0])?;
    let trace = &out.sentences[0];
    let n = trace.valid_len;
    let predicted_tags = tape
        .value(trace.tag_probs)
        .argmax_rows()
        .into_iter()
        .map(|t| t as u8)
        .collect();

    Ok(Prediction {
        tokens: example.tokens[encoded.window_start..encoded.window_start + n].to_vec(),
        target: encoded.target,
        polarity,
        polarity_probs: [probs.get(0, 0), probs.get(0, 1), probs.get(0, 2)],
        gold_tags: trace.tags.tags[..n].to_vec(),
        predicted_tags,
        attention: attention_received(&tape, trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::random_embeddings;

    fn setup() -> (ModelParams, ModelConfig, Vocabulary) {
        let tokens = tokenize("it feels cheap , the keyboard is not very sensitive .");
        let example = Example::new(tokens, Span::new(5, 6), Polarity::Negative).unwrap();
        let vocab = Vocabulary::build([std::slice::from_ref(&example)]);
        let config = ModelConfig {
            d_h: 6,
            heads: 2,
            embed_dim: 4,
            pad_len: 16,
            alpha: 3,
            ..Default::default()
        };
        let params = ModelParams::init(&config, random_embeddings(vocab.len(), 4, 9)).unwrap();
        (params, config, vocab)
    }

    #[test]
    fn predict_keyboard_sentence() {
        let (params, config, vocab) = setup();
        let s = "It feels cheap, the keyboard is not very sensitive.";
        let p = predict(&params, &config, &vocab, s, "keyboard").unwrap();
        assert_eq!(p.tokens.len(), 11);
        assert_eq!(p.target, Span::new(5, 6));
        assert_eq!(p.gold_tags, [0, 0, 1, 1, 1, 1, 1, 1, 1, 0, 0]);
        assert_eq!(p.predicted_tags.len(), 11);
        assert!((p.polarity_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.attention.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p, predict(&params, &config, &vocab, s, "keyboard").unwrap());
    }

    #[test]
    fn missing_target_is_a_lookup_error() {
        let (params, config, vocab) = setup();
        let err = predict(&params, &config, &vocab, "the keyboard is fine", "screen").unwrap_err();
        assert!(matches!(err, Error::Lookup(_)));
    }

    #[test]
    fn locate_first_occurrence() {
        let t = |s: &str| tokenize(s);
        assert_eq!(locate_target(&t("a b c b c"), &t("b c")), Some(Span::new(1, 3)));
        assert_eq!(locate_target(&t("a b"), &t("a b c")), None);
    }
}
