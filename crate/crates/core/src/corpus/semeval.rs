//! SemEval-2014 Task 4 aspect-term XML.

use xml::common::Position;
use xml::reader::{EventReader, XmlEvent};

use crate::corpus::example::{Example, Polarity, Span};
use crate::corpus::tokenize::{tokenize_with_offsets, Token};
use crate::error::{Error, Result};

#[derive(Debug)]
struct AspectTerm {
    term: String,
    polarity: String,
    from: usize,
    to: usize,
    line: u64,
}

/// Parses a SemEval-2014 aspect-term file into one [`Example`] per aspect term.
///
/// Terms labeled `conflict` are skipped. Character offsets are widened to the
/// smallest token range covering them; an offset range that touches no token
/// is an error.
pub fn parse_semeval_xml(bytes: &[u8]) -> Result<Vec<Example>> {
    let mut reader = EventReader::new(bytes);
    let mut examples = Vec::new();

    let mut text: Option<String> = None;
    let mut in_text = false;
    let mut terms: Vec<AspectTerm> = Vec::new();

    loop {
        let line = reader.position().row + 1;
        let event = reader.next().map_err(|e| Error::Parse {
            line: e.position().row + 1,
            message: e.msg().to_string(),
        })?;
        match event {
            XmlEvent::StartElement {
                name, attributes, ..
            } => match name.local_name.as_str() {
                "sentence" => {
                    text = None;
                    terms.clear();
                }
                "text" => {
                    in_text = true;
                    text = Some(String::new());
                }
                "aspectTerm" => {
                    let attr = |key: &str| {
                        attributes
                            .iter()
                            .find(|a| a.name.local_name == key)
                            .map(|a| a.value.clone())
                            .ok_or_else(|| Error::Parse {
                                line,
                                message: format!("aspectTerm without `{key}` attribute"),
                            })
                    };
                    let offset = |key: &str| -> Result<usize> {
                        attr(key)?.trim().parse().map_err(|_| Error::Parse {
                            line,
                            message: format!("aspectTerm `{key}` is not an offset"),
                        })
                    };
                    terms.push(AspectTerm {
                        term: attr("term")?,
                        polarity: attr("polarity")?,
                        from: offset("from")?,
                        to: offset("to")?,
                        line,
                    });
                }
                _ => {}
            },
            XmlEvent::Characters(s) | XmlEvent::CData(s) | XmlEvent::Whitespace(s) if in_text => {
                if let Some(t) = text.as_mut() {
                    t.push_str(&s);
                }
            }
            XmlEvent::EndElement { name } => match name.local_name.as_str() {
                "text" => in_text = false,
                "sentence" => {
                    if !terms.is_empty() {
                        let sentence = text.take().ok_or_else(|| Error::Parse {
                            line,
                            message: "sentence with aspect terms but no text".into(),
                        })?;
                        emit_sentence(&sentence, &terms, &mut examples)?;
                    }
                    terms.clear();
                }
                _ => {}
            },
            XmlEvent::EndDocument => break,
            _ => {}
        }
    }
    Ok(examples)
}

fn emit_sentence(sentence: &str, terms: &[AspectTerm], out: &mut Vec<Example>) -> Result<()> {
    let tokens = tokenize_with_offsets(sentence);
    for term in terms {
        let polarity = match term.polarity.as_str() {
            "conflict" => continue,
            p => p.parse::<Polarity>().map_err(|_| Error::Parse {
                line: term.line,
                message: format!("unknown polarity {p:?}"),
            })?,
        };
        let span = align(&tokens, term.from, term.to).ok_or_else(|| Error::Parse {
            line: term.line,
            message: format!(
                "aspect term {:?} at {}..{} covers no token of {sentence:?}",
                term.term, term.from, term.to
            ),
        })?;
        let covered: String = sentence
            .chars()
            .skip(term.from)
            .take(term.to.saturating_sub(term.from))
            .collect();
        if covered != term.term {
            log::warn!(
                "line {}: offsets {}..{} select {covered:?}, attribute says {:?}",
                term.line,
                term.from,
                term.to,
                term.term
            );
        }
        let words = tokens.iter().map(|t| t.text.clone()).collect();
        out.push(Example::new(words, span, polarity)?);
    }
    Ok(())
}

/// Smallest token range overlapping the character range `[from, to)`.
pub fn align(tokens: &[Token], from: usize, to: usize) -> Option<Span> {
    let mut hit = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < to && t.end > from)
        .map(|(i, _)| i);
    let first = hit.next()?;
    let last = hit.next_back().unwrap_or(first);
    Some(Span::new(first, last + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TERM: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="1">
    <text>The battery is awful.</text>
    <aspectTerms><aspectTerm term="battery" polarity="negative" from="4" to="11"/></aspectTerms>
  </sentence>
</sentences>"#;

    #[test]
    fn single_term_fixture() {
        let ex = parse_semeval_xml(ONE_TERM.as_bytes()).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].target, Span::new(1, 2));
        assert_eq!(ex[0].target_tokens(), ["battery"]);
        assert_eq!(ex[0].polarity, Polarity::Negative);
        assert_eq!(ex[0].tokens, ["the", "battery", "is", "awful", "."]);
    }

    #[test]
    fn multiple_targets_and_conflict() {
        let xml = r#"<sentences><sentence id="7">
<text>The food is surprisingly good, and the decor is nice.</text>
<aspectTerms>
<aspectTerm term="food" polarity="positive" from="4" to="8"/>
<aspectTerm term="decor" polarity="positive" from="39" to="44"/>
<aspectTerm term="food" polarity="conflict" from="4" to="8"/>
</aspectTerms>
<aspectCategories><aspectCategory category="food" polarity="positive"/></aspectCategories>
</sentence>
<sentence id="8"><text>No terms here.</text></sentence>
</sentences>"#;
        let ex = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].target_tokens(), ["food"]);
        assert_eq!(ex[1].target_tokens(), ["decor"]);
    }

    #[test]
    fn entities_are_decoded_before_offsets() {
        let xml = r#"<sentences><sentence id="1">
<text>I &apos;d say the &quot;pad&quot; works.</text>
<aspectTerms><aspectTerm term="pad" polarity="neutral" from="14" to="17"/></aspectTerms>
</sentence></sentences>"#;
        let ex = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(ex[0].target_tokens(), ["pad"]);
        assert_eq!(ex[0].polarity, Polarity::Neutral);
    }

    #[test]
    fn partial_word_offsets_expand_to_token() {
        let xml = r#"<sentences><sentence id="1"><text>Great keyboards!</text>
<aspectTerms><aspectTerm term="keyboard" polarity="positive" from="6" to="14"/></aspectTerms>
</sentence></sentences>"#;
        let ex = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(ex[0].target_tokens(), ["keyboards"]);
    }

    #[test]
    fn malformed_xml_reports_line() {
        let xml = "<sentences>\n<sentence id=\"1\">\n<text>oops</txt>\n</sentences>";
        match parse_semeval_xml(xml.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn offsets_on_whitespace_are_an_error() {
        let xml = r#"<sentences><sentence id="1"><text>a  b</text>
<aspectTerms><aspectTerm term=" " polarity="positive" from="1" to="2"/></aspectTerms>
</sentence></sentences>"#;
        assert!(matches!(
            parse_semeval_xml(xml.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_attribute() {
        let xml = r#"<sentences><sentence id="1"><text>a b</text>
<aspectTerms><aspectTerm term="a" from="0" to="1"/></aspectTerms>
</sentence></sentences>"#;
        assert!(matches!(parse_semeval_xml(xml.as_bytes()), Err(Error::Parse { .. })));
    }
}
