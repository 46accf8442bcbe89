//! Word symbol table: bijection between word strings and dense positive ids,
//! with id 0 reserved for epsilon.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const EPSILON_SYMBOL: &str = "<eps>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordTable {
    by_id: Vec<String>,
    by_word: HashMap<String, u32>,
}

impl WordTable {
    /// Build from words for ids 1..=n; `<eps>` takes id 0.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Result<Self> {
        let mut by_id = vec![EPSILON_SYMBOL.to_string()];
        let mut by_word = HashMap::new();
        by_word.insert(EPSILON_SYMBOL.to_string(), 0);
        for w in words {
            if by_word.contains_key(&w) {
                return Err(Error::format(format!("duplicate word '{w}'")));
            }
            by_word.insert(w.clone(), by_id.len() as u32);
            by_id.push(w);
        }
        Ok(WordTable { by_id, by_word })
    }

    /// Parse `word id` lines. Ids must be dense from 1 (0 = `<eps>`).
    pub fn parse_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (ln, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Io(e.to_string()))?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut it = t.split_whitespace();
            let word = it
                .next()
                .ok_or_else(|| Error::format(format!("line {}: missing word", ln + 1)))?
                .to_string();
            let id: u32 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format(format!("line {}: bad id", ln + 1)))?;
            pairs.push((word, id));
        }
        pairs.sort_by_key(|(_, id)| *id);
        let mut words = Vec::new();
        for (i, (word, id)) in pairs.iter().enumerate() {
            if *id != i as u32 {
                return Err(Error::format(format!(
                    "word ids must be dense from 0, missing id {i}"
                )));
            }
            if i == 0 {
                if word != EPSILON_SYMBOL {
                    return Err(Error::format(format!(
                        "id 0 must map to {EPSILON_SYMBOL}, got '{word}'"
                    )));
                }
            } else {
                words.push(word.clone());
            }
        }
        if pairs.is_empty() {
            return Err(Error::format("empty word table"));
        }
        WordTable::from_words(words)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, word) in self.by_id.iter().enumerate() {
            writeln!(w, "{word} {id}").map_err(|e| Error::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.len() <= 1
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.by_id.get(id as usize).map(|s| s.as_str())
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.by_word.get(word).copied()
    }

    /// Render a word-id sequence as a space-separated string.
    pub fn render(&self, ids: &[u32]) -> Result<String> {
        let mut parts = Vec::with_capacity(ids.len());
        for &id in ids {
            parts.push(
                self.word(id)
                    .ok_or_else(|| Error::format(format!("word id {id} out of table range")))?,
            );
        }
        Ok(parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_lookup() {
        let t = WordTable::from_words(["alpha".into(), "bravo".into()]).unwrap();
        assert_eq!(t.id("<eps>"), Some(0));
        assert_eq!(t.id("bravo"), Some(2));
        assert_eq!(t.word(1), Some("alpha"));
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = WordTable::parse_text(&buf[..]).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn rejects_sparse_ids() {
        let src = b"<eps> 0\nalpha 2\n";
        assert!(WordTable::parse_text(&src[..]).is_err());
    }

    #[test]
    fn rejects_wrong_epsilon() {
        let src = b"hello 0\nalpha 1\n";
        assert!(WordTable::parse_text(&src[..]).is_err());
    }
}
