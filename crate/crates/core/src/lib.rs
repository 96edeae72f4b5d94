//! Retrieval-augmented generation over documents and SQL databases.
//!
//! * Text: [`chunker`] splits documents, [`embedder`] turns chunks into
//!   vectors, [`vecstore`] keeps them and answers cosine top-k queries, and
//!   [`pipeline`] ties retrieval to an [`llm`] backend.
//! * Tables: [`tabular`] profiles every table of a SQLite database, retrieves
//!   the relevant ones for a question, asks the LLM for SQL and runs it
//!   read-only through [`db`].
//! * Evaluation: [`text_metrics`] (ROUGE, semantic answer similarity) and
//!   [`sqleval`] (exact-set-match, execution accuracy, hardness) with the
//!   clause-set SQL parser in [`sql`].
//!
//! Vector math and storage are generic over [`Scalar`] (`f32` or `f64`);
//! overlap metrics are generic over [`MetricValue`], which includes the exact
//! rational [`Ratio<i64>`](num_rational::Ratio). The aliases below fix the
//! types used by the pipelines.

pub mod chunker;
pub mod db;
pub mod embedder;
pub mod error;
mod http;
pub mod llm;
pub mod pipeline;
pub mod scalar;
pub mod sql;
pub mod sqleval;
pub mod tabular;
pub mod text_metrics;
pub mod vecstore;
pub mod vector;

pub use chunker::{chunk_text, load_documents, tokenize, Chunk, ChunkConfig, Document};
pub use db::{execute_sql, Database, ExecLimits, ResultSet, SqlQuery, Value};
pub use embedder::{embed, embed_batch, Embedder, EmbedderBackend, EmbedderConfig};
pub use error::{Error, Result, Stage};
pub use llm::{complete, Completion, LlmBackend, LlmConfig, LlmGateway};
pub use pipeline::{answer, answer_with, compose_prompt, ingest, AnswerTrace, Query, Retrieved};
pub use scalar::{MetricValue, Scalar};
pub use sql::{classify_hardness, exact_set_match, parse_sql, ClauseSets, Hardness, ParseError};
pub use sqleval::{evaluate_suite, execution_accuracy, EvalPair, SqlEvalReport};
pub use tabular::{answer_tabular, profile_tables, select_tables, TableProfile, TabularAnswer, TabularOptions};
pub use text_metrics::{rouge_l, rouge_n, sas, GtrEvalItem, Rouge};
pub use vecstore::{Payload, RecordKind, SearchHit, VectorRecord, VectorStore};
pub use vector::{cosine, EmbeddingVector};

/// Embedding with `f64` components, as produced by every [`Embedder`].
pub type Embedding = EmbeddingVector<f64>;
pub type Embedding32 = EmbeddingVector<f32>;
pub type Store = VectorStore<f64>;
pub type Store32 = VectorStore<f32>;
pub type Hit = SearchHit<f64>;
pub type RougeScore = Rouge<f64>;
/// ROUGE with exact rational precision, recall and F1.
pub type ExactRouge = Rouge<num_rational::Ratio<i64>>;
