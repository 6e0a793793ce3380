/// A token with its half-open character-offset range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercased word/punctuation split. Runs of alphanumeric characters form
/// one token, every other non-whitespace character stands alone.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text).into_iter().map(|t| t.text).collect()
}

/// Like [`tokenize`], keeping character (not byte) offsets, which is how the
/// SemEval `from`/`to` attributes count.
pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;

    let flush = |word: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token {
                text: std::mem::take(word).to_lowercase(),
                start,
                end,
            });
        }
    };

    let mut n = 0;
    for (i, ch) in text.chars().enumerate() {
        n = i + 1;
        if ch.is_alphanumeric() {
            if word.is_empty() {
                word_start = i;
            }
            word.push(ch);
            continue;
        }
        flush(&mut word, word_start, i, &mut tokens);
        if !ch.is_whitespace() {
            tokens.push(Token {
                text: ch.to_lowercase().collect(),
                start: i,
                end: i + 1,
            });
        }
    }
    flush(&mut word, word_start, n, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            tokenize("The battery is great."),
            ["the", "battery", "is", "great", "."]
        );
    }

    #[test]
    fn case_study_sentence_layout() {
        let toks = tokenize("It feels cheap, the keyboard is not very sensitive.");
        assert_eq!(toks.len(), 11);
        assert_eq!(toks[3], ",");
        assert_eq!(toks[5], "keyboard");
        assert_eq!(toks[10], ".");
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n").is_empty());
    }

    #[test]
    fn offsets_are_in_characters() {
        let toks = tokenize_with_offsets("Café's menu");
        let spans: Vec<_> = toks.iter().map(|t| (t.text.as_str(), t.start, t.end)).collect();
        assert_eq!(spans, [("café", 0, 4), ("'", 4, 5), ("s", 5, 6), ("menu", 7, 11)]);
    }

    #[test]
    fn deterministic() {
        let s = "Windows 7 can get 8 out of 10 viruses. Merry Christmas!";
        assert_eq!(tokenize(s), tokenize(s));
    }
}
