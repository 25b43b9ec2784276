//! Config plumbing shared by the parameter file and scenario parser:
//! strict key validation with typo suggestions, and canonical float
//! formatting for deterministic text output.

use crate::error::{Error, Result};
use toml::Table;

/// Levenshtein distance, used only for "did you mean" hints.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Closest known key to `unknown`, if any is reasonably similar.
pub fn suggest<'a>(unknown: &str, known: &[&'a str]) -> Option<&'a str> {
    known
        .iter()
        .map(|k| (edit_distance(unknown, k), *k))
        .min()
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .map(|(_, k)| k)
}

/// Reject any key of `table` not present in `known`, with a suggestion.
pub fn check_keys(context: &str, table: &Table, known: &[&str]) -> Result<()> {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            let hint = match suggest(key, known) {
                Some(s) => format!("; did you mean \"{s}\"?"),
                None => String::new(),
            };
            return Err(Error::Config(format!(
                "unknown key \"{key}\" in [{context}]{hint}"
            )));
        }
    }
    Ok(())
}

/// Shortest round-trip decimal form of a float. Rust's `Display` for f64
/// already produces the shortest representation that parses back exactly,
/// which keeps text outputs byte-stable across platforms.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 && x.is_sign_negative() {
        // normalize -0 so checksums do not depend on sign of zero
        return "0".to_string();
    }
    format!("{x}")
}
