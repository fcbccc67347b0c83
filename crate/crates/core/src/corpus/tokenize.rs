use super::Token;

/// Lowercasing tokenizer: alphanumeric runs are tokens, every other
/// non-whitespace character stands alone. Offsets count characters of the
/// original string.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run: Option<(usize, String)> = None;
    let flush = |run: &mut Option<(usize, String)>, end: usize, tokens: &mut Vec<Token>| {
        if let Some((start, s)) = run.take() {
            tokens.push(Token {
                surface: s.to_lowercase(),
                char_start: start,
                char_end: end,
            });
        }
    };
    let mut count = 0;
    for (i, ch) in text.chars().enumerate() {
        count = i + 1;
        if ch.is_alphanumeric() {
            match &mut run {
                Some((_, s)) => s.push(ch),
                None => run = Some((i, ch.to_string())),
            }
            continue;
        }
        flush(&mut run, i, &mut tokens);
        if !ch.is_whitespace() {
            tokens.push(Token {
                surface: ch.to_lowercase().collect(),
                char_start: i,
                char_end: i + 1,
            });
        }
    }
    flush(&mut run, count, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(
            surfaces("Great food but the service was bad!"),
            ["great", "food", "but", "the", "service", "was", "bad", "!"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(surfaces("well-made"), ["well", "-", "made"]);
    }

    #[test]
    fn offsets_index_characters() {
        let toks = tokenize("Café  au-lait");
        assert_eq!(toks[0].surface, "café");
        assert_eq!((toks[0].char_start, toks[0].char_end), (0, 4));
        assert_eq!((toks[1].char_start, toks[1].char_end), (6, 8));
        assert_eq!(toks[2].surface, "-");
        assert_eq!((toks[3].char_start, toks[3].char_end), (9, 13));
    }

    proptest! {
        #[test]
        fn tokens_are_ordered_and_reproduce_source(text in "\\PC{0,60}") {
            let chars: Vec<char> = text.chars().collect();
            let toks = tokenize(&text);
            let mut prev = 0;
            for t in &toks {
                prop_assert!(t.char_start < t.char_end);
                prop_assert!(t.char_start >= prev);
                prev = t.char_end;
                let src: String = chars[t.char_start..t.char_end].iter().collect();
                prop_assert_eq!(src.to_lowercase(), t.surface.clone());
            }
            // every non-whitespace character is covered by some token
            let covered: usize = toks.iter().map(|t| t.char_end - t.char_start).sum();
            prop_assert_eq!(covered, chars.iter().filter(|c| !c.is_whitespace()).count());
        }
    }
}
