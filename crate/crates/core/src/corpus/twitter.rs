//! Three-line Twitter format: sentence with `$T$`, target string, polarity in {-1, 0, 1}.

use crate::corpus::example::{Example, Polarity, Span};
use crate::corpus::tokenize::tokenize;
use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "$T$";

pub fn parse_twitter(bytes: &[u8]) -> Result<Vec<Example>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Format(format!("twitter file is not UTF-8: {e}")))?;
    let mut lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if !lines.len().is_multiple_of(3) {
        return Err(Error::Format(format!(
            "{} lines is not a multiple of 3; {} dangling line(s) after example {}",
            lines.len(),
            lines.len() % 3,
            lines.len() / 3
        )));
    }

    lines
        .chunks(3)
        .enumerate()
        .map(|(index, group)| {
            let (sentence, target, label) = (group[0], group[1], group[2]);
            let (left, right) = sentence.split_once(PLACEHOLDER).ok_or_else(|| {
                Error::Format(format!("example {index}: sentence has no {PLACEHOLDER} placeholder"))
            })?;
            let polarity = match label.trim() {
                "-1" => Polarity::Negative,
                "0" => Polarity::Neutral,
                "1" => Polarity::Positive,
                other => {
                    return Err(Error::Format(format!("example {index}: polarity {other:?}")))
                }
            };
            let target_tokens = tokenize(target);
            if target_tokens.is_empty() {
                return Err(Error::Format(format!("example {index}: empty target")));
            }
            let mut tokens = tokenize(left);
            let start = tokens.len();
            tokens.extend(target_tokens);
            let end = tokens.len();
            tokens.extend(tokenize(right));
            Example::new(tokens, Span::new(start, end), polarity)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_substitution() {
        let ex = parse_twitter(b"i love $T$ !\napple\n1\n").unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].tokens, ["i", "love", "apple", "!"]);
        assert_eq!(ex[0].target, Span::new(2, 3));
        assert_eq!(ex[0].polarity, Polarity::Positive);
    }

    #[test]
    fn label_mapping() {
        let ex = parse_twitter(b"$T$ is ok\nx\n0\n$T$ sucks\ny z\n-1").unwrap();
        assert_eq!(ex[0].polarity, Polarity::Neutral);
        assert_eq!(ex[1].polarity, Polarity::Negative);
        assert_eq!(ex[1].target, Span::new(0, 2));
    }

    #[test]
    fn missing_placeholder_names_example() {
        let err = parse_twitter(b"$T$ fine\na\n1\nno marker\nb\n0\n").unwrap_err();
        assert!(err.to_string().contains("example 1"), "{err}");
    }

    #[test]
    fn dangling_lines() {
        assert!(matches!(parse_twitter(b"$T$ a\nb\n1\nextra\n"), Err(Error::Format(_))));
    }

    #[test]
    fn bad_label() {
        assert!(parse_twitter(b"$T$ a\nb\n2\n").is_err());
    }
}
