//! Tokenization, sentence splitting, and stable hashing shared across modules.

use std::collections::HashSet;

/// Trim surrounding whitespace and lowercase. Used for exact-match comparisons.
pub fn fold(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Split into lowercase alphanumeric tokens. Everything else, including
/// hyphens, is a boundary.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Like [`tokenize`], but a hyphenated run is kept as a single token when its
/// lowercase form appears in `keep_whole` (multi-part clinical terms).
/// Otherwise it is split at the hyphens.
pub fn tokenize_keeping(text: &str, keep_whole: &HashSet<String>) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if ch == '-' && !cur.is_empty() {
            cur.push('-');
        } else {
            flush_hyphen_run(&mut cur, keep_whole, &mut tokens);
        }
    }
    flush_hyphen_run(&mut cur, keep_whole, &mut tokens);
    tokens
}

fn flush_hyphen_run(cur: &mut String, keep_whole: &HashSet<String>, out: &mut Vec<String>) {
    if cur.is_empty() {
        return;
    }
    while cur.ends_with('-') {
        cur.pop();
    }
    if cur.is_empty() {
        return;
    }
    let run = std::mem::take(cur);
    if !run.contains('-') || keep_whole.contains(&run) {
        out.push(run);
    } else {
        out.extend(run.split('-').filter(|p| !p.is_empty()).map(str::to_string));
    }
}

/// Split into sentences at '.', '!' or '?' followed by whitespace or end of
/// text. Decimal points ("37.3") do not break a sentence. Fragments without
/// any alphanumeric content are dropped.
pub fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        cur.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                None => true,
                Some(c) => c.is_whitespace(),
            };
            if at_boundary {
                push_sentence(&mut cur, &mut out);
            }
        }
    }
    push_sentence(&mut cur, &mut out);
    out
}

fn push_sentence(cur: &mut String, out: &mut Vec<String>) {
    let trimmed = cur.trim();
    if trimmed.chars().any(char::is_alphanumeric) {
        out.push(trimmed.to_string());
    }
    cur.clear();
}

/// 64-bit FNV-1a, keyed by a seed. Stable across platforms and builds, which
/// the feature hasher and every seeded sampler rely on.
pub fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive an independent RNG seed from a base seed and a context tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    fnv1a(base, tag.as_bytes())
}
