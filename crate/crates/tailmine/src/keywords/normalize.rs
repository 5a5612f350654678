//! Keyword normalization: lowercasing, edge-punctuation trimming, and a
//! rule-based English lemmatizer (plural -s/-es, -ing, -ed, with a small
//! irregular-form table). Deterministic and idempotent by construction;
//! coarse stems are acceptable because keywords are only compared for exact
//! equality when counting frequencies.

/// Irregular forms checked before the suffix rules. Sorted by key.
const EXCEPTIONS: &[(&str, &str)] = &[
    ("children", "child"),
    ("feet", "foot"),
    ("geese", "goose"),
    ("lens", "lens"),
    ("men", "man"),
    ("mice", "mouse"),
    ("oxen", "ox"),
    ("people", "person"),
    ("shoes", "shoe"),
    ("taxis", "taxi"),
    ("teeth", "tooth"),
    ("used", "use"),
    ("uses", "use"),
    ("using", "use"),
    ("women", "woman"),
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|c| is_vowel(c) || c == b'y')
}

/// Consonant-vowel-consonant ending, excluding w/x/y finals; stems like
/// "rac" or "mov" get their silent e restored.
fn ends_cvc(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 3 {
        return false;
    }
    let (c1, v, c2) = (b[b.len() - 3], b[b.len() - 2], b[b.len() - 1]);
    !is_vowel(c1) && is_vowel(v) && !is_vowel(c2) && !matches!(c2, b'w' | b'x' | b'y')
}

fn ends_doubled_consonant(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 2 {
        return false;
    }
    let last = b[b.len() - 1];
    // ll/ss/zz/ff endings are part of the word, not inflection doubling.
    last == b[b.len() - 2] && !is_vowel(last) && !matches!(last, b'l' | b's' | b'z' | b'f')
}

fn strip_participle(word: &str, suffix_len: usize) -> Option<String> {
    let stem = &word[..word.len() - suffix_len];
    if stem.len() < 3 || !has_vowel(stem) {
        return None;
    }
    if ends_doubled_consonant(stem) {
        return Some(stem[..stem.len() - 1].to_string());
    }
    if ends_cvc(stem) {
        return Some(format!("{stem}e"));
    }
    Some(stem.to_string())
}

/// Reduce one lowercase word to its lemma.
pub fn lemmatize(word: &str) -> String {
    if word.len() <= 2 {
        return word.to_string();
    }
    if let Ok(i) = EXCEPTIONS.binary_search_by_key(&word, |(k, _)| k) {
        return EXCEPTIONS[i].1.to_string();
    }

    // Plurals.
    if word.len() >= 5 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.len() >= 4
        && ["ches", "shes", "sses", "xes", "zes", "ses", "oes"]
            .iter()
            .any(|s| word.ends_with(s))
    {
        return word[..word.len() - 2].to_string();
    }
    if word.len() >= 4
        && word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        return word[..word.len() - 1].to_string();
    }

    // Participles.
    if word.len() >= 5 && word.ends_with("ing") {
        if let Some(stem) = strip_participle(word, 3) {
            return stem;
        }
        return word.to_string();
    }
    if word.len() >= 5 && word.ends_with("ied") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.len() >= 4 && word.ends_with("ed") && !word.ends_with("eed") {
        if let Some(stem) = strip_participle(word, 2) {
            return stem;
        }
        return word.to_string();
    }

    word.to_string()
}

/// Normalize one keyword (possibly multi-word): lowercase, trim
/// non-alphanumeric edges per word, collapse internal whitespace, and
/// lemmatize each word. Returns an empty string when nothing survives.
pub fn normalize_keyword(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let words: Vec<String> = lowered
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(lemmatize)
        .collect();
    words.join(" ")
}

/// Tokens of a free-text description: maximal alphanumeric runs, lowercased.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}
