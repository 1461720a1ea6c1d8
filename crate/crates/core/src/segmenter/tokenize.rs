use serde::{Deserialize, Serialize};

/// A word or punctuation token. `start`/`end` are byte offsets into the
/// segment text (half-open).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            text: text.into(),
            start,
            end,
        }
    }
}

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '…' | '–' | '—' | '„' | '“' | '”' | '‚' | '‘' | '’' | '«' | '»' | '¡' | '¿' | '·' | '‹'
                | '›'
        )
}

/// Splits on Unicode whitespace, then peels leading and trailing
/// punctuation off every word, one token per punctuation character.
/// Punctuation inside a word (`H2O`, `1.5`, `e-mail`) stays put.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word_start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (c.is_whitespace(), word_start) {
            (false, None) => word_start = Some(i),
            (true, Some(start)) => {
                push_word(text, start, i, &mut tokens);
                word_start = None;
            }
            _ => {}
        }
    }
    tokens
}

fn push_word(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let word = &text[start..end];
    let mut core_start = start;
    for (i, c) in word.char_indices() {
        if !is_punctuation(c) {
            break;
        }
        out.push(Token::new(c.to_string(), start + i, start + i + c.len_utf8()));
        core_start = start + i + c.len_utf8();
    }
    if core_start == end {
        return;
    }
    let mut trailing = Vec::new();
    let mut core_end = end;
    for (i, c) in text[core_start..end].char_indices().rev() {
        if !is_punctuation(c) {
            break;
        }
        trailing.push(Token::new(c.to_string(), core_start + i, core_start + i + c.len_utf8()));
        core_end = core_start + i;
    }
    out.push(Token::new(&text[core_start..core_end], core_start, core_end));
    out.extend(trailing.into_iter().rev());
}

/// Splits tokens so that none straddles one of `cuts` (byte offsets).
pub fn split_at_boundaries(text: &str, tokens: Vec<Token>, cuts: &[usize]) -> Vec<Token> {
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens {
        let mut inner: Vec<usize> = cuts
            .iter()
            .copied()
            .filter(|&c| c > token.start && c < token.end && text.is_char_boundary(c))
            .collect();
        if inner.is_empty() {
            out.push(token);
            continue;
        }
        inner.sort_unstable();
        inner.dedup();
        let mut from = token.start;
        for cut in inner.into_iter().chain(std::iter::once(token.end)) {
            out.push(Token::new(&text[from..cut], from, cut));
            from = cut;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn punctuation_is_peeled() {
        assert_eq!(texts(&tokenize("Ahoj, světe!")), ["Ahoj", ",", "světe", "!"]);
        assert_eq!(texts(&tokenize("„Kde?“")), ["„", "Kde", "?", "“"]);
        assert_eq!(texts(&tokenize("H2O, 1.5 e-mail...")), ["H2O", ",", "1.5", "e-mail", ".", ".", "."]);
    }

    #[test]
    fn offsets_index_the_original() {
        let tokens = tokenize("a b");
        assert_eq!(tokens, [Token::new("a", 0, 1), Token::new("b", 2, 3)]);
        let text = "Žluté  květy.";
        for t in tokenize(text) {
            assert_eq!(&text[t.start..t.end], t.text);
        }
    }

    #[test]
    fn boundary_splitting() {
        let text = "H2O je voda";
        let tokens = split_at_boundaries(text, tokenize(text), &[1, 2, 4]);
        assert_eq!(texts(&tokens), ["H", "2", "O", "je", "voda"]);
    }
}
