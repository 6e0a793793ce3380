use std::collections::HashMap;

use crate::corpus::example::Example;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ index table. Index 0 is padding, 1 is unknown; the rest follow
/// first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens([PAD_TOKEN, UNK_TOKEN].map(String::from).to_vec())
            .expect("reserved tokens are distinct")
    }
}

impl Vocabulary {
    pub fn build<'a>(splits: impl IntoIterator<Item = &'a [Example]>) -> Self {
        let mut vocab = Vocabulary::default();
        for split in splits {
            for ex in split {
                for tok in &ex.tokens {
                    vocab.insert(tok);
                }
            }
        }
        vocab
    }

    /// Restores a vocabulary from its index-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Option<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return None;
        }
        let index: HashMap<_, _> = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        (index.len() == tokens.len()).then_some(Vocabulary { tokens, index })
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::example::{Polarity, Span};

    fn ex(words: &[&str]) -> Example {
        Example::new(
            words.iter().map(|s| s.to_string()).collect(),
            Span::new(0, 1),
            Polarity::Neutral,
        )
        .unwrap()
    }

    #[test]
    fn first_occurrence_order() {
        let train = [ex(&["b", "a", "b"])];
        let test = [ex(&["c", "a"])];
        let v = Vocabulary::build([&train[..], &test[..]]);
        assert_eq!(v.tokens(), ["<pad>", "<unk>", "b", "a", "c"]);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(Vocabulary::from_tokens(v.tokens().to_vec()), Some(v));
    }

    #[test]
    fn rejects_duplicate_tokens() {
        let toks = ["<pad>", "<unk>", "a", "a"].map(String::from).to_vec();
        assert!(Vocabulary::from_tokens(toks).is_none());
    }
}
