//! Text embedding backends.
//!
//! `hashed_bow` is the offline reference backend: lowercased tokens from
//! [`tokenize`](crate::chunker::tokenize) are hashed with 64-bit FNV-1a
//! (offset basis [`FNV_OFFSET_BASIS`] as the fixed seed), bucketed modulo
//! `dim`, counted, and the count vector is L2-normalized.
//!
//! `http` POSTs `{"inputs": [..]}` to an endpoint and expects
//! `{"embeddings": [[..], ..]}` back; replies are re-normalized.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use crate::chunker::tokenize;
use crate::error::{Error, Result};
use crate::http;
use crate::Embedding;

pub const DEFAULT_DIM: usize = 384;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderBackend {
    HashedBow,
    Http { endpoint_url: String, timeout: Duration },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedderConfig {
    pub backend: EmbedderBackend,
    pub dim: usize,
    pub batch_size: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::hashed_bow(DEFAULT_DIM)
    }
}

impl EmbedderConfig {
    pub fn hashed_bow(dim: usize) -> Self {
        EmbedderConfig {
            backend: EmbedderBackend::HashedBow,
            dim,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }

    pub fn http(endpoint_url: impl Into<String>, dim: usize) -> Self {
        EmbedderConfig {
            backend: EmbedderBackend::Http {
                endpoint_url: endpoint_url.into(),
                timeout: http::DEFAULT_TIMEOUT,
            },
            dim,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    /// Identifies the backend, dimension and seed; stores remember it so a
    /// store is never queried with vectors from a different embedder.
    pub fn fingerprint(&self) -> String {
        match &self.backend {
            EmbedderBackend::HashedBow => {
                format!("hashed_bow/fnv1a64/seed={FNV_OFFSET_BASIS:016x}/dim={}", self.dim)
            }
            EmbedderBackend::Http { endpoint_url, .. } => {
                format!("http/{endpoint_url}/dim={}", self.dim)
            }
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(match &self.backend {
            EmbedderBackend::HashedBow => Box::new(HashedBow::new(self.dim)),
            EmbedderBackend::Http {
                endpoint_url,
                timeout,
            } => {
                if endpoint_url.is_empty() {
                    return Err(Error::InvalidConfig("http embedder needs an endpoint url".into()));
                }
                Box::new(HttpEmbedder {
                    client: http::client(*timeout)?,
                    url: endpoint_url.clone(),
                    dim: self.dim,
                    batch_size: self.batch_size,
                    fingerprint: self.fingerprint(),
                })
            }
        })
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn fingerprint(&self) -> String;

    fn embed(&self, text: &str) -> Result<Embedding>;

    /// Element `i` equals `embed(texts[i])`. The first failing element is
    /// reported with its index.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                self.embed(t).map_err(|e| Error::BatchElement {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

fn check_nonempty(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        Err(Error::EmptyText)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HashedBow {
    dim: usize,
}

impl HashedBow {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        HashedBow { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.to_lowercase().as_bytes()) % self.dim as u64) as usize
    }
}

impl Embedder for HashedBow {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        EmbedderConfig::hashed_bow(self.dim).fingerprint()
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        check_nonempty(text)?;
        let mut counts = vec![0.0f64; self.dim];
        for tok in tokenize(text) {
            counts[self.bucket(tok.text)] += 1.0;
        }
        Embedding::normalized(counts)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    inputs: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

pub struct HttpEmbedder {
    client: Client,
    url: String,
    dim: usize,
    batch_size: usize,
    fingerprint: String,
}

impl HttpEmbedder {
    fn request(&self, inputs: &[&str]) -> Result<Vec<Embedding>> {
        let resp: EmbedResponse = http::post_json(&self.client, &self.url, &EmbedRequest { inputs })?;
        if resp.embeddings.len() != inputs.len() {
            return Err(Error::BackendUnavailable(format!(
                "{}: sent {} inputs, got {} embeddings",
                self.url,
                inputs.len(),
                resp.embeddings.len()
            )));
        }
        resp.embeddings
            .into_iter()
            .map(|values| {
                if values.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: values.len(),
                    });
                }
                Embedding::normalized(values)
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        check_nonempty(text)?;
        Ok(self.request(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::BatchElement {
                index,
                source: Box::new(Error::EmptyText),
            });
        }
        let mut out = Vec::with_capacity(texts.len());
        for (n, batch) in texts.chunks(self.batch_size).enumerate() {
            let vectors = self.request(batch).map_err(|e| Error::BatchElement {
                index: n * self.batch_size,
                source: Box::new(e),
            })?;
            out.extend(vectors);
        }
        Ok(out)
    }
}

/// Embeds one text with a freshly built backend.
pub fn embed(text: &str, config: &EmbedderConfig) -> Result<Embedding> {
    config.build()?.embed(text)
}

pub fn embed_batch(texts: &[&str], config: &EmbedderConfig) -> Result<Vec<Embedding>> {
    config.build()?.embed_batch(texts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::cosine;
    use proptest::prelude::*;

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic_and_self_similar() {
        let cfg = EmbedderConfig::default();
        let a = embed("the cat sat on the mat", &cfg).unwrap();
        let b = embed("the cat sat on the mat", &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.dim(), 384);
        let cat = embed("cat", &cfg).unwrap();
        assert_eq!(cosine(&cat, &cat).unwrap(), 1.0);
    }

    #[test]
    fn case_is_folded() {
        let cfg = EmbedderConfig::hashed_bow(64);
        assert_eq!(embed("Cat", &cfg).unwrap(), embed("cat", &cfg).unwrap());
    }

    #[test]
    fn disjoint_buckets_are_orthogonal() {
        let bow = HashedBow::new(384);
        let left = ["alpha", "beta"];
        let right = ["gamma", "delta"];
        let lb: Vec<_> = left.iter().map(|t| bow.bucket(t)).collect();
        let rb: Vec<_> = right.iter().map(|t| bow.bucket(t)).collect();
        assert!(lb.iter().all(|b| !rb.contains(b)), "{lb:?} vs {rb:?}");
        let a = bow.embed("alpha beta").unwrap();
        let b = bow.embed("gamma delta").unwrap();
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn counts_follow_buckets() {
        let bow = HashedBow::new(16);
        let v = bow.embed("x x y").unwrap();
        let (bx, by) = (bow.bucket("x"), bow.bucket("y"));
        let mut expected = vec![0.0; 16];
        expected[bx] += 2.0;
        expected[by] += 1.0;
        let n = (expected.iter().map(|x| x * x).sum::<f64>()).sqrt();
        for (got, want) in v.values().iter().zip(&expected) {
            assert!((got - want / n).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_text_is_an_error() {
        let cfg = EmbedderConfig::default();
        assert!(matches!(embed("   \n\t", &cfg), Err(Error::EmptyText)));
        let err = embed_batch(&["ok", " "], &cfg).unwrap_err();
        assert!(matches!(err, Error::BatchElement { index: 1, .. }));
        assert!(matches!(err.root(), Error::EmptyText));
    }

    #[test]
    fn batch_matches_pointwise() {
        let cfg = EmbedderConfig::default();
        assert!(embed_batch(&[], &cfg).unwrap().is_empty());
        let batch = embed_batch(&["a", "b"], &cfg).unwrap();
        assert_eq!(batch, vec![embed("a", &cfg).unwrap(), embed("b", &cfg).unwrap()]);
    }

    #[test]
    fn config_validation() {
        assert!(EmbedderConfig::hashed_bow(0).build().is_err());
        assert!(EmbedderConfig::default().with_batch_size(0).build().is_err());
        assert!(EmbedderConfig::http("", 8).build().is_err());
        assert_ne!(
            EmbedderConfig::hashed_bow(8).fingerprint(),
            EmbedderConfig::hashed_bow(16).fingerprint()
        );
    }

    proptest! {
        #[test]
        fn unit_norm(text in "[a-zA-Z0-9 ,.?]{1,120}") {
            prop_assume!(!text.trim().is_empty());
            let v = HashedBow::new(384).embed(&text).unwrap();
            prop_assert!((v.norm() - 1.0).abs() <= 1e-9);
        }
    }
}
