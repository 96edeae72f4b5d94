//! Token-window chunking of source documents.
//!
//! The tokenizer here is shared by every component that counts tokens
//! (completions, evaluation items, ROUGE), so counts agree across the crate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_SIZE: usize = 512;
pub const DEFAULT_OVERLAP: usize = 64;

/// A token with its byte span in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits text into maximal runs of word characters (alphanumerics and `_`)
/// and single punctuation characters. Whitespace only separates.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = word_start.take() {
            tokens.push(Token {
                text: &text[s..i],
                start: s,
                end: i,
            });
        }
        if !c.is_whitespace() {
            let end = i + c.len_utf8();
            tokens.push(Token {
                text: &text[i..end],
                start: i,
                end,
            });
        }
    }
    if let Some(s) = word_start {
        tokens.push(Token {
            text: &text[s..],
            start: s,
            end: text.len(),
        });
    }
    tokens
}

/// Number of tokens `tokenize` would produce.
pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            source_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    pub token_start: usize,
    /// Exclusive.
    pub token_end: usize,
}

impl Chunk {
    /// Store id of this chunk: `<doc_id>:<index>`.
    pub fn record_id(&self) -> String {
        format!("{}:{}", self.doc_id, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

impl ChunkConfig {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self> {
        let config = ChunkConfig {
            chunk_size,
            overlap,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be positive".into()));
        }
        if self.overlap >= self.chunk_size {
            return Err(Error::InvalidConfig(format!(
                "overlap ({}) must be smaller than chunk_size ({})",
                self.overlap, self.chunk_size
            )));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

/// Token spans `[start, end)` of the sliding windows over `n` tokens.
pub fn window_spans(n: usize, config: ChunkConfig) -> Result<Vec<(usize, usize)>> {
    config.validate()?;
    let mut spans = Vec::new();
    if n == 0 {
        return Ok(spans);
    }
    let mut start = 0;
    loop {
        let end = (start + config.chunk_size).min(n);
        spans.push((start, end));
        if end == n {
            break;
        }
        start += config.stride();
    }
    Ok(spans)
}

/// Cuts a document into overlapping token windows. Chunk text is the source
/// slice from the first token's start to the last token's end, so original
/// spacing inside a chunk is preserved.
pub fn chunk_text(doc: &Document, config: ChunkConfig) -> Result<Vec<Chunk>> {
    let tokens = tokenize(&doc.text);
    let spans = window_spans(tokens.len(), config)?;
    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| Chunk {
            doc_id: doc.id.clone(),
            index,
            text: doc.text[tokens[start].start..tokens[end - 1].end].to_string(),
            token_start: start,
            token_end: end,
        })
        .collect())
}

#[derive(Deserialize)]
struct DocumentLine {
    id: String,
    text: String,
}

/// Reads documents from a path. `.jsonl` files hold one `{"id","text"}`
/// record per line; anything else is one plain-text document whose id is the
/// file name.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = Some(path.display().to_string());
    if path.extension().is_some_and(|ext| ext == "jsonl") {
        let mut docs = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: DocumentLine = serde_json::from_str(line).map_err(|e| {
                Error::InvalidInput(format!("{} line {}: {e}", path.display(), i + 1))
            })?;
            if rec.id.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "{} line {}: empty document id",
                    path.display(),
                    i + 1
                )));
            }
            docs.push(Document {
                id: rec.id,
                text: rec.text,
                source_path: source.clone(),
            });
        }
        Ok(docs)
    } else {
        let id = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(vec![Document {
            id,
            text: raw,
            source_path: source,
        }])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[Token<'_>]) -> Vec<String> {
        tokens.iter().map(|t| t.text.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(texts(&tokenize("the cat sat.")), ["the", "cat", "sat", "."]);
        assert_eq!(texts(&tokenize("a  b")), ["a", "b"]);
        assert_eq!(
            texts(&tokenize("singer_in_concert, größe!")),
            ["singer_in_concert", ",", "größe", "!"]
        );
    }

    #[test]
    fn token_offsets_point_into_source() {
        let s = "héllo, wörld";
        for t in tokenize(s) {
            assert_eq!(&s[t.start..t.end], t.text);
        }
    }

    #[test]
    fn ten_tokens_size_four_overlap_one() {
        let doc = Document::new("d", "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9");
        let chunks = chunk_text(&doc, ChunkConfig::new(4, 1).unwrap()).unwrap();
        let spans: Vec<_> = chunks.iter().map(|c| (c.token_start, c.token_end)).collect();
        assert_eq!(spans, [(0, 4), (3, 7), (6, 10)]);
        assert_eq!(chunks[1].text, "t3 t4 t5 t6");
        assert_eq!(chunks[2].record_id(), "d:2");
    }

    #[test]
    fn short_and_empty_documents() {
        let cfg = ChunkConfig::new(8, 2).unwrap();
        assert!(chunk_text(&Document::new("e", ""), cfg).unwrap().is_empty());
        let chunks = chunk_text(&Document::new("s", "one two three"), cfg).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!((chunks[0].token_start, chunks[0].token_end), (0, 3));
        assert_eq!(chunks[0].text, "one two three");
    }

    #[test]
    fn overlap_must_be_smaller_than_window() {
        assert!(matches!(ChunkConfig::new(512, 512), Err(Error::InvalidConfig(_))));
        assert!(matches!(ChunkConfig::new(0, 0), Err(Error::InvalidConfig(_))));
        let bad = ChunkConfig {
            chunk_size: 3,
            overlap: 5,
        };
        assert!(chunk_text(&Document::new("x", "a b c"), bad).is_err());
    }

    proptest! {
        #[test]
        fn windows_cover_and_overlap(n in 0usize..300, size in 1usize..40, overlap_frac in 0.0f64..1.0) {
            let overlap = ((size as f64) * overlap_frac) as usize % size;
            let cfg = ChunkConfig::new(size, overlap).unwrap();
            let spans = window_spans(n, cfg).unwrap();
            let mut covered = vec![false; n];
            for &(s, e) in &spans {
                prop_assert!(s < e);
                prop_assert_eq!(s % (size - overlap), 0);
                covered[s..e].iter_mut().for_each(|c| *c = true);
            }
            prop_assert!(covered.iter().all(|&c| c));
            for w in spans.windows(2) {
                prop_assert!(w[0].0 < w[1].0);
                prop_assert_eq!(w[0].1 - w[0].0, size);
                if w[1].1 - w[1].0 == size {
                    prop_assert_eq!(w[0].1 - w[1].0, overlap);
                }
            }
        }

        #[test]
        fn chunking_is_deterministic(text in "[a-z .,!]{0,200}") {
            let doc = Document::new("p", text);
            let cfg = ChunkConfig::new(7, 3).unwrap();
            prop_assert_eq!(chunk_text(&doc, cfg).unwrap(), chunk_text(&doc, cfg).unwrap());
        }
    }
}
