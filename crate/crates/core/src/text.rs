//! Tokenization shared by command recognition and every text metric.

/// Lowercases `text`, drops punctuation and splits on whitespace.
///
/// Punctuation is removed in place rather than turned into a separator, so
/// "that's" becomes `thats` and "follow-up" becomes `followup`. Em and en
/// dashes and slashes separate words.
pub fn normalize(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_whitespace() || is_separator(ch) {
            cleaned.push(' ');
        } else if ch.is_alphanumeric() {
            cleaned.extend(ch.to_lowercase());
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

fn is_separator(ch: char) -> bool {
    matches!(ch, '\u{2014}' | '\u{2013}' | '/' | '\\')
}

/// Normalized form used for string-equality checks between questions.
pub fn normalized_key(text: &str) -> String {
    normalize(text).join(" ")
}

/// Splits text into sentences on `.`, `!` or `?` followed by whitespace or
/// end of input. Runs of terminators ("?!", "...") close a single sentence.
/// Fragments with no word characters are dropped; abbreviations are not
/// special-cased.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((idx, ch)) = iter.next() {
        if !matches!(ch, '.' | '!' | '?') {
            continue;
        }
        let mut end = idx + ch.len_utf8();
        while let Some(&(next_idx, next)) = iter.peek() {
            if matches!(next, '.' | '!' | '?') {
                end = next_idx + next.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        let at_boundary = match iter.peek() {
            None => true,
            Some(&(_, next)) => next.is_whitespace(),
        };
        if at_boundary {
            push_sentence(&mut sentences, &text[start..end]);
            start = end;
        }
    }
    push_sentence(&mut sentences, &text[start..]);
    sentences
}

fn push_sentence<'a>(out: &mut Vec<&'a str>, fragment: &'a str) {
    let trimmed = fragment.trim();
    if trimmed.chars().any(char::is_alphanumeric) {
        out.push(trimmed);
    }
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
