//! Question answering over chunked documents: ingest documents into a
//! store, then answer a query from its most similar chunks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunker::{chunk_text, ChunkConfig, Document};
use crate::embedder::{Embedder, EmbedderConfig};
use crate::error::{Error, Result};
use crate::llm::{Completion, LlmConfig, LlmGateway};
use crate::vecstore::{Payload, RecordKind, SearchHit, VectorRecord};
use crate::Store;

pub const CONTEXT_HEADER: &str = "Context:\n";
pub const CHUNK_SEPARATOR: &str = "\n\n";
pub const QUESTION_MARKER: &str = "\n\nQuestion: ";
pub const ANSWER_SUFFIX: &str = "\nAnswer:";
pub const DEFAULT_K: usize = 1;

/// A user question; never blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Query(String);

impl Query {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("query is empty".into()));
        }
        Ok(Query(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub id: String,
    pub score: f64,
}

impl From<SearchHit<f64>> for Retrieved {
    fn from(h: SearchHit<f64>) -> Self {
        Retrieved {
            id: h.id,
            score: h.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace {
    pub query: Query,
    pub retrieved: Vec<Retrieved>,
    pub prompt: String,
    pub answer: String,
    pub completion: Completion,
    /// Human label: 1 relevant, 0 irrelevant. Unset until labeled.
    pub truthful: Option<u8>,
}

/// Builds the answer prompt, context first:
/// `Context:\n{c1}\n\n{c2}…\n\nQuestion: {query}\nAnswer:`.
pub fn compose_prompt<S: AsRef<str>>(query: &Query, chunks: &[S]) -> Result<String> {
    if chunks.is_empty() {
        return Err(Error::EmptyContext);
    }
    let mut prompt = String::from(CONTEXT_HEADER);
    for (i, c) in chunks.iter().enumerate() {
        if i > 0 {
            prompt.push_str(CHUNK_SEPARATOR);
        }
        prompt.push_str(c.as_ref());
    }
    prompt.push_str(QUESTION_MARKER);
    prompt.push_str(query.as_str());
    prompt.push_str(ANSWER_SUFFIX);
    Ok(prompt)
}

/// Chunks and embeds `docs`, appending one record per chunk (id
/// `<doc_id>:<index>`) to `store`.
pub fn ingest_into(
    store: &mut Store,
    docs: &[Document],
    chunking: ChunkConfig,
    embedder: &dyn Embedder,
) -> Result<usize> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("no documents to ingest".into()));
    }
    chunking.validate()?;
    check_fingerprint(store, embedder)?;
    let mut chunks = Vec::new();
    for doc in docs {
        if doc.id.is_empty() {
            return Err(Error::InvalidInput("document id is empty".into()));
        }
        chunks.extend(chunk_text(doc, chunking)?);
    }
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    for (chunk, vector) in chunks.iter().zip(vectors) {
        let mut metadata = BTreeMap::new();
        metadata.insert("doc_id".to_string(), chunk.doc_id.clone());
        metadata.insert("token_start".to_string(), chunk.token_start.to_string());
        metadata.insert("token_end".to_string(), chunk.token_end.to_string());
        store.insert(VectorRecord {
            id: chunk.record_id(),
            vector,
            payload: Payload {
                kind: RecordKind::Chunk,
                text: chunk.text.clone(),
                metadata,
            },
        })?;
    }
    Ok(chunks.len())
}

/// Ingests into the store at `store_path` (created if missing, appended to
/// otherwise) and saves it.
pub fn ingest(
    docs: &[Document],
    chunking: ChunkConfig,
    embedder_config: &EmbedderConfig,
    store_path: &Path,
) -> Result<Store> {
    let embedder = embedder_config.build()?;
    let mut store = open_or_create(store_path, embedder.as_ref())?;
    ingest_into(&mut store, docs, chunking, embedder.as_ref())?;
    store.save(store_path)?;
    Ok(store)
}

pub(crate) fn open_or_create(path: &Path, embedder: &dyn Embedder) -> Result<Store> {
    if path.exists() {
        let store = Store::load(path)?;
        check_fingerprint(&store, embedder)?;
        Ok(store)
    } else {
        Store::new(embedder.dim(), embedder.fingerprint())
    }
}

pub(crate) fn check_fingerprint(store: &Store, embedder: &dyn Embedder) -> Result<()> {
    let fp = embedder.fingerprint();
    if store.embedder_fingerprint() != fp || store.dim() != embedder.dim() {
        return Err(Error::FingerprintMismatch {
            store: store.embedder_fingerprint().to_string(),
            embedder: fp,
        });
    }
    Ok(())
}

/// Answers with already-built backends; reuse these across many queries.
pub fn answer_with(
    query: &Query,
    store: &Store,
    k: usize,
    embedder: &dyn Embedder,
    llm: &LlmGateway,
) -> Result<AnswerTrace> {
    if store.is_empty() {
        return Err(Error::InvalidInput("store is empty".into()));
    }
    check_fingerprint(store, embedder)?;
    let q = embedder.embed(query.as_str())?;
    let hits = store.query_top_k(&q, k)?;
    let texts: Vec<&str> = hits
        .iter()
        .map(|h| store.get(&h.id).expect("hit id is in store").payload.text.as_str())
        .collect();
    let prompt = compose_prompt(query, &texts)?;
    let completion = llm.complete(&prompt)?;
    Ok(AnswerTrace {
        query: query.clone(),
        retrieved: hits.into_iter().map(Retrieved::from).collect(),
        prompt,
        answer: completion.text.clone(),
        completion,
        truthful: None,
    })
}

pub fn answer(
    query: &Query,
    store: &Store,
    k: usize,
    embedder_config: &EmbedderConfig,
    llm_config: &LlmConfig,
) -> Result<AnswerTrace> {
    let embedder = embedder_config.build()?;
    let llm = LlmGateway::new(llm_config.clone())?;
    answer_with(query, store, k, embedder.as_ref(), &llm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Query {
        Query::new(s).unwrap()
    }

    #[test]
    fn prompt_template() {
        assert_eq!(
            compose_prompt(&q("Q?"), &["C."]).unwrap(),
            "Context:\nC.\n\nQuestion: Q?\nAnswer:"
        );
        assert_eq!(
            compose_prompt(&q("Q?"), &["first", "second"]).unwrap(),
            "Context:\nfirst\n\nsecond\n\nQuestion: Q?\nAnswer:"
        );
        assert!(matches!(compose_prompt::<&str>(&q("Q?"), &[]), Err(Error::EmptyContext)));
    }

    #[test]
    fn blank_query_rejected() {
        assert!(Query::new("  ").is_err());
    }

    #[test]
    fn ingest_counts_windows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let doc = Document::new("d", "a0 a1 a2 a3 a4 a5 a6 a7 a8 a9");
        let cfg = EmbedderConfig::hashed_bow(32);
        let store = ingest(&[doc.clone()], ChunkConfig::new(4, 1).unwrap(), &cfg, &path).unwrap();
        assert_eq!(store.len(), 3);
        let ids: Vec<_> = store.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["d:0", "d:1", "d:2"]);
        assert_eq!(store.records()[1].payload.text, "a3 a4 a5 a6");
        assert_eq!(Store::load(&path).unwrap(), store);

        let again = ingest(&[doc], ChunkConfig::new(4, 1).unwrap(), &cfg, &path);
        assert!(matches!(again, Err(Error::DuplicateId(id)) if id == "d:0"));
        assert!(matches!(
            ingest(&[], ChunkConfig::default(), &cfg, &path),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn answer_checks_fingerprint_and_emptiness() {
        let embedder = EmbedderConfig::hashed_bow(16).build().unwrap();
        let mut store = Store::new(16, embedder.fingerprint()).unwrap();
        let llm = LlmGateway::new(LlmConfig::echo()).unwrap();
        assert!(matches!(
            answer_with(&q("x"), &store, 1, embedder.as_ref(), &llm),
            Err(Error::InvalidInput(_))
        ));
        ingest_into(&mut store, &[Document::new("d", "C.")], ChunkConfig::default(), embedder.as_ref())
            .unwrap();
        let t = answer_with(&q("what is C?"), &store, 1, embedder.as_ref(), &llm).unwrap();
        assert_eq!(t.answer, "C.");
        assert_eq!(t.truthful, None);

        let other = EmbedderConfig::hashed_bow(32).build().unwrap();
        assert!(matches!(
            answer_with(&q("x"), &store, 1, other.as_ref(), &llm),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn identical_query_ranks_chunk_first() {
        let embedder = EmbedderConfig::default().build().unwrap();
        let mut store = Store::new(embedder.dim(), embedder.fingerprint()).unwrap();
        let docs = [
            Document::new("a", "the river floods in spring"),
            Document::new("b", "stars form from collapsing gas clouds"),
        ];
        ingest_into(&mut store, &docs, ChunkConfig::default(), embedder.as_ref()).unwrap();
        let llm = LlmGateway::new(LlmConfig::fixed("ok")).unwrap();
        let t = answer_with(&q("stars form from collapsing gas clouds"), &store, 2, embedder.as_ref(), &llm)
            .unwrap();
        assert_eq!(t.retrieved[0].id, "b:0");
        assert_eq!(t.retrieved[0].score, 1.0);
        assert!(t.retrieved[0].score >= t.retrieved[1].score);
    }
}
