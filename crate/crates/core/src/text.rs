//! Term normalization shared by the MapReduce and dataflow word counts.

use std::collections::HashSet;
use std::io;
use std::path::Path;

/// How tweet text is turned into terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Normalization {
    /// `,` and `.` become spaces, `-` is deleted, the line is lowercased and
    /// split on whitespace. Every other character (`!`, `?`, `#`, ...) is
    /// kept as part of the term.
    #[default]
    Verbatim,
    /// Lowercase and treat every non-alphanumeric character as a separator.
    Extended,
}

impl Normalization {
    pub fn tokenize(self, line: &str) -> Vec<String> {
        match self {
            Normalization::Verbatim => tokenize(line),
            Normalization::Extended => tokenize_extended(line),
        }
    }
}

/// Splits a line into terms using the verbatim rules.
///
/// ```
/// use miniplex::text::tokenize;
/// assert_eq!(tokenize("The cat, the hat."), ["the", "cat", "the", "hat"]);
/// assert_eq!(tokenize("state-of-the-art rocks"), ["stateoftheart", "rocks"]);
/// assert_eq!(tokenize("cat!"), ["cat!"]);
/// ```
pub fn tokenize(line: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(line.len());
    for c in line.chars() {
        match c {
            ',' | '.' => cleaned.push(' '),
            '-' => {}
            c => cleaned.push(c),
        }
    }
    cleaned.to_lowercase().split_whitespace().map(str::to_string).collect()
}

fn tokenize_extended(line: &str) -> Vec<String> {
    line.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// A set of terms excluded from counting. Matching happens after
/// lowercasing, so entries are stored lowercased.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        StopWords::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn from_file(path: &Path) -> io::Result<Self> {
        Ok(StopWords::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
