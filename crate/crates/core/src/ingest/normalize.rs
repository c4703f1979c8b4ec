//! Cleanup rules for the supported CHAT subset.
//!
//! Bracketed codes are removed and collected, retracing markers (`[/]`,
//! `[//]`, `[///]`) drop the material they scope over (the preceding word or
//! `<...>` group), fillers (`&uh`, `&=laughs`), omitted words (`0is`),
//! unintelligible markers (`xxx`, `yyy`, `www`), utterance linkers (`+<`) and
//! punctuation-only tokens are dropped. Surviving words are lowercased and
//! stripped of CHAT-internal decoration (`(be)cause` -> `because`,
//! `word@o` -> `word`).

use std::collections::BTreeSet;

/// The exclusion code that marks a disruptive utterance, in canonical form.
pub const EXCLUSION_CODE: &str = "+ exc";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedText {
    pub tokens: Vec<String>,
    /// Bracketed codes seen on the line, whitespace-collapsed, without brackets.
    pub codes: BTreeSet<String>,
}

impl NormalizedText {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn has_exclusion(&self) -> bool {
        self.codes.contains(EXCLUSION_CODE)
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

enum Piece {
    Word(String),
    Group(Vec<String>),
    Code(String),
}

pub fn normalize_text(raw: &str) -> NormalizedText {
    let mut codes = BTreeSet::new();
    let mut kept: Vec<Vec<String>> = Vec::new();

    for piece in split_pieces(raw) {
        match piece {
            Piece::Code(code) => {
                if is_retrace(&code) {
                    kept.pop();
                }
                codes.insert(code);
            }
            Piece::Word(w) => kept.push(clean_token(&w).into_iter().collect()),
            Piece::Group(ws) => kept.push(ws.iter().filter_map(|w| clean_token(w)).collect()),
        }
    }

    NormalizedText {
        tokens: kept.into_iter().flatten().collect(),
        codes,
    }
}

fn is_retrace(code: &str) -> bool {
    matches!(code, "/" | "//" | "///")
}

/// Splits a line into words, `<...>` groups and `[...]` codes. Unbalanced
/// brackets are treated as ordinary characters of the surrounding word.
fn split_pieces(raw: &str) -> Vec<Piece> {
    let chars: Vec<char> = raw.chars().collect();
    let mut pieces = Vec::new();
    let mut i = 0;
    let mut word = String::new();

    let flush = |word: &mut String, pieces: &mut Vec<Piece>| {
        if !word.is_empty() {
            pieces.push(Piece::Word(std::mem::take(word)));
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '[' {
            if let Some(end) = chars[i + 1..].iter().position(|&x| x == ']') {
                flush(&mut word, &mut pieces);
                let inner: String = chars[i + 1..i + 1 + end].iter().collect();
                pieces.push(Piece::Code(collapse_ws(&inner)));
                i += end + 2;
                continue;
            }
        } else if c == '<' {
            if let Some(end) = chars[i + 1..].iter().position(|&x| x == '>') {
                flush(&mut word, &mut pieces);
                let inner: String = chars[i + 1..i + 1 + end].iter().collect();
                pieces.push(Piece::Group(
                    inner.split_whitespace().map(str::to_owned).collect(),
                ));
                i += end + 2;
                continue;
            }
        } else if c == '\u{15}' {
            // media bullet: skip to the closing bullet
            flush(&mut word, &mut pieces);
            match chars[i + 1..].iter().position(|&x| x == '\u{15}') {
                Some(end) => i += end + 2,
                None => i += 1,
            }
            continue;
        } else if c.is_whitespace() {
            flush(&mut word, &mut pieces);
            i += 1;
            continue;
        }
        word.push(c);
        i += 1;
    }
    flush(&mut word, &mut pieces);
    pieces
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn clean_token(raw: &str) -> Option<String> {
    if raw.starts_with('&') || raw.starts_with('+') || raw.starts_with('0') {
        return None;
    }
    let body = raw.split('@').next().unwrap_or_default();
    let mut out: String = body
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || *c == '\'' || *c == '-')
        .collect();
    let trimmed = out.trim_matches(|c| c == '\'' || c == '-');
    if trimmed.len() != out.len() {
        out = trimmed.to_owned();
    }
    if out.is_empty() || out.starts_with('0') {
        return None;
    }
    if matches!(out.as_str(), "xxx" | "yyy" | "www" | "xx" | "yy") {
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        normalize_text(s).tokens
    }

    #[test]
    fn filler_and_retrace() {
        assert_eq!(
            toks("&uh the WATER [/] water is overflowing ."),
            ["the", "water", "is", "overflowing"]
        );
    }

    #[test]
    fn unintelligible_only() {
        assert!(normalize_text("xxx .").is_empty());
    }

    #[test]
    fn exclusion_flag() {
        let n = normalize_text("she's drying dishes [+ exc]");
        assert_eq!(n.tokens, ["she's", "drying", "dishes"]);
        assert!(n.has_exclusion());
        assert!(!normalize_text("she's drying dishes .").has_exclusion());
    }

    #[test]
    fn exclusion_whitespace_variants() {
        assert!(normalize_text("it fell [+  exc] .").has_exclusion());
    }

    #[test]
    fn group_retrace() {
        assert_eq!(
            toks("<the boy is> [//] the girl is reaching ."),
            ["the", "girl", "is", "reaching"]
        );
    }

    #[test]
    fn chat_decorations() {
        assert_eq!(
            toks("(be)cause the kid@c 0is gonna fall +... (.) &=laughs"),
            ["because", "the", "kid", "gonna", "fall"]
        );
    }

    #[test]
    fn replacement_code_is_dropped_but_recorded() {
        let n = normalize_text("the stool [: stool] [* p:w] is tipping");
        assert_eq!(n.tokens, ["the", "stool", "is", "tipping"]);
        assert!(n.codes.contains(": stool"));
        assert!(n.codes.contains("* p:w"));
    }

    #[test]
    fn media_bullet_removed() {
        assert_eq!(toks("the cookie jar . \u{15}1200_3400\u{15}"), ["the", "cookie", "jar"]);
    }

    proptest! {
        #[test]
        fn idempotent(s in "[a-zA-Z'&0@+<>\\[\\]/ .,!?()-]{0,60}") {
            let once = normalize_text(&s);
            let twice = normalize_text(&once.text());
            prop_assert_eq!(once.tokens, twice.tokens);
        }

        #[test]
        fn never_yields_empty_tokens(s in "\\PC{0,80}") {
            for t in normalize_text(&s).tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }
}
