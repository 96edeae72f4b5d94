//! Exact cosine search over an append-only collection of embedding records,
//! persisted as line-delimited JSON.
//!
//! The store file is a header line
//! `{"format":"gtr-store","version":1,"dim":N,"embedder":"<fingerprint>"}`
//! followed by one record per line
//! `{"id":…,"vector":[…],"kind":"chunk"|"table","text":…,"metadata":{…}}`.
//! Floats are written in shortest round-trip form, so `load(save(s))` is
//! bit-for-bit `s`.
//!
//! Mutation needs `&mut self` and search needs `&self`; share a loaded store
//! across threads behind `Arc` (or `RwLock` if it is still being written).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vector::{dot, unit_cosine, EmbeddingVector};

pub const STORE_FORMAT: &str = "gtr-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Chunk,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub kind: RecordKind,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorRecord<T> {
    pub id: String,
    pub vector: EmbeddingVector<T>,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit<T> {
    pub id: String,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
    embedder: String,
}

#[derive(Serialize)]
struct RecordLineOut<'a, T> {
    id: &'a str,
    vector: &'a [T],
    kind: RecordKind,
    text: &'a str,
    metadata: &'a BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLineIn<T> {
    id: String,
    vector: Vec<T>,
    kind: RecordKind,
    text: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct VectorStore<T> {
    dim: usize,
    embedder_fingerprint: String,
    records: Vec<VectorRecord<T>>,
    sq_norms: Vec<T>,
    by_id: HashMap<String, usize>,
}

impl<T: Scalar> PartialEq for VectorStore<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.embedder_fingerprint == other.embedder_fingerprint
            && self.records == other.records
    }
}

impl<T: Scalar> VectorStore<T> {
    pub fn new(dim: usize, embedder_fingerprint: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("store dimension must be positive".into()));
        }
        Ok(VectorStore {
            dim,
            embedder_fingerprint: embedder_fingerprint.into(),
            records: Vec::new(),
            sq_norms: Vec::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_fingerprint(&self) -> &str {
        &self.embedder_fingerprint
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[VectorRecord<T>] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&VectorRecord<T>> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn insert(&mut self, record: VectorRecord<T>) -> Result<()> {
        if record.vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: record.vector.dim(),
            });
        }
        if self.by_id.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        self.by_id.insert(record.id.clone(), self.records.len());
        let v = record.vector.values();
        self.sq_norms.push(dot(v, v));
        self.records.push(record);
        Ok(())
    }

    /// The `k` records most cosine-similar to `query`, best first. Equal
    /// scores are ordered by ascending id. Zero-norm records score 0.
    pub fn query_top_k(&self, query: &EmbeddingVector<T>, k: usize) -> Result<Vec<SearchHit<T>>> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be positive".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.dim(),
            });
        }
        let q = query.values();
        let qn2 = dot(q, q);
        if qn2 == T::zero() {
            return Err(Error::ZeroVector);
        }
        let score = |i: usize| {
            let n2 = self.sq_norms[i];
            if n2 == T::zero() {
                T::zero()
            } else {
                unit_cosine(dot(q, self.records[i].vector.values()), qn2, n2)
            }
        };
        let better = |a: &(T, usize), b: &(T, usize)| -> Ordering {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.records[a.1].id.cmp(&self.records[b.1].id))
        };

        let hits: Vec<(T, usize)> = if k == 1 {
            let mut best: Option<(T, usize)> = None;
            for i in 0..self.records.len() {
                let cand = (score(i), i);
                if best.is_none_or(|b| better(&cand, &b) == Ordering::Less) {
                    best = Some(cand);
                }
            }
            best.into_iter().collect()
        } else {
            let mut all: Vec<(T, usize)> = (0..self.records.len()).map(|i| (score(i), i)).collect();
            if k < all.len() {
                all.select_nth_unstable_by(k - 1, better);
                all.truncate(k);
            }
            all.sort_unstable_by(better);
            all
        };
        Ok(hits
            .into_iter()
            .map(|(score, i)| SearchHit {
                id: self.records[i].id.clone(),
                score,
            })
            .collect())
    }

    /// One CSV row per record: `id,kind,d0,…,d{dim-1}`, for external
    /// plotting tools.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "kind".to_string()];
        header.extend((0..self.dim).map(|i| format!("d{i}")));
        w.write_record(&header).expect("in-memory write");
        for r in &self.records {
            let kind = match r.payload.kind {
                RecordKind::Chunk => "chunk",
                RecordKind::Table => "table",
            };
            let mut row = vec![r.id.clone(), kind.to_string()];
            row.extend(r.vector.values().iter().map(|v| v.to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
    }

    /// Serializes the store to its line format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = Header {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            dim: self.dim,
            embedder: self.embedder_fingerprint.clone(),
        };
        serde_json::to_writer(&mut out, &header).expect("header serializes");
        out.push(b'\n');
        for r in &self.records {
            let line = RecordLineOut {
                id: &r.id,
                vector: r.vector.values(),
                kind: r.payload.kind,
                text: &r.payload.text,
                metadata: &r.payload.metadata,
            };
            serde_json::to_writer(&mut out, &line).expect("record serializes");
            out.push(b'\n');
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::CorruptStore {
            line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
            reason: "invalid UTF-8".into(),
        })?;
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l)).peekable();
        let corrupt = |line: usize, reason: String| Error::CorruptStore { line, reason };

        let (_, header_line) = lines.next().expect("split yields at least one item");
        let header: Header = serde_json::from_str(header_line)
            .map_err(|e| corrupt(1, format!("bad header: {e}")))?;
        if header.format != STORE_FORMAT {
            return Err(corrupt(1, format!("unknown format {:?}", header.format)));
        }
        if header.version != STORE_VERSION {
            return Err(corrupt(1, format!("unsupported version {}", header.version)));
        }
        let mut store = VectorStore::new(header.dim, header.embedder)
            .map_err(|e| corrupt(1, e.to_string()))?;

        while let Some((n, line)) = lines.next() {
            if line.is_empty() && lines.peek().is_none() {
                break;
            }
            let rec: RecordLineIn<T> =
                serde_json::from_str(line).map_err(|e| corrupt(n, format!("malformed record: {e}")))?;
            let vector = EmbeddingVector::new(rec.vector).map_err(|e| corrupt(n, e.to_string()))?;
            store
                .insert(VectorRecord {
                    id: rec.id,
                    vector,
                    payload: Payload {
                        kind: rec.kind,
                        text: rec.text,
                        metadata: rec.metadata,
                    },
                })
                .map_err(|e| corrupt(n, e.to_string()))?;
        }
        Ok(store)
    }

    /// Writes the store atomically (temp file + rename in the same directory).
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let file_name = path.file_name().ok_or_else(|| {
            Error::InvalidInput(format!("store path {} has no file name", path.display()))
        })?;
        let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, xs: &[f64]) -> VectorRecord<f64> {
        VectorRecord {
            id: id.into(),
            vector: EmbeddingVector::new(xs.to_vec()).unwrap(),
            payload: Payload {
                kind: RecordKind::Chunk,
                text: format!("text of {id}"),
                metadata: BTreeMap::new(),
            },
        }
    }

    #[test]
    fn insert_and_find_self() {
        let mut s = VectorStore::new(3, "test").unwrap();
        s.insert(rec("a", &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.len(), 1);
        let hits = s.query_top_k(&EmbeddingVector::new(vec![1.0, 2.0, 3.0]).unwrap(), 1).unwrap();
        assert_eq!(hits, [SearchHit { id: "a".into(), score: 1.0 }]);
        assert!(s.get("a").is_some());
    }

    #[test]
    fn insert_errors() {
        let mut s = VectorStore::<f64>::new(384, "test").unwrap();
        assert!(matches!(
            s.insert(rec("a", &[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 384, found: 3 })
        ));
        let mut s = VectorStore::new(2, "test").unwrap();
        s.insert(rec("a", &[1.0, 0.0])).unwrap();
        assert!(matches!(s.insert(rec("a", &[0.0, 1.0])), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn query_edge_cases() {
        let q = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let empty = VectorStore::<f64>::new(2, "t").unwrap();
        assert!(empty.query_top_k(&q, 3).unwrap().is_empty());

        let mut s = VectorStore::new(2, "t").unwrap();
        s.insert(rec("b", &[0.0, 1.0])).unwrap();
        s.insert(rec("a", &[1.0, 1.0])).unwrap();
        s.insert(rec("c", &[1.0, 0.0])).unwrap();
        let ids: Vec<_> = s.query_top_k(&q, 10).unwrap().into_iter().map(|h| h.id).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert!(matches!(s.query_top_k(&q, 0), Err(Error::InvalidInput(_))));
        let q3 = EmbeddingVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(s.query_top_k(&q3, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ties_break_on_ascending_id() {
        let mut s = VectorStore::new(2, "t").unwrap();
        for id in ["z", "m", "b"] {
            s.insert(rec(id, &[2.0, 1.0])).unwrap();
        }
        let q = EmbeddingVector::new(vec![2.0, 1.0]).unwrap();
        let ids: Vec<_> = s.query_top_k(&q, 3).unwrap().into_iter().map(|h| h.id).collect();
        assert_eq!(ids, ["b", "m", "z"]);
        assert_eq!(s.query_top_k(&q, 1).unwrap()[0].id, "b");
        assert_eq!(s.query_top_k(&q, 2).unwrap().len(), 2);
    }

    #[test]
    fn empty_store_round_trip() {
        let s = VectorStore::<f64>::new(4, "hashed_bow").unwrap();
        let bytes = s.to_bytes();
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "{\"format\":\"gtr-store\",\"version\":1,\"dim\":4,\"embedder\":\"hashed_bow\"}\n"
        );
        assert_eq!(VectorStore::<f64>::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn record_line_layout() {
        let mut s = VectorStore::new(2, "e").unwrap();
        let mut r = rec("x", &[0.1, -2.5]);
        r.payload.metadata.insert("name".into(), "singer".into());
        s.insert(r).unwrap();
        let text = String::from_utf8(s.to_bytes()).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            r#"{"id":"x","vector":[0.1,-2.5],"kind":"chunk","text":"text of x","metadata":{"name":"singer"}}"#
        );
    }

    #[test]
    fn load_rejects_corruption_with_line_numbers() {
        let bad_dim = "{\"format\":\"gtr-store\",\"version\":1,\"dim\":384,\"embedder\":\"e\"}\n\
                       {\"id\":\"a\",\"vector\":[1,2,3],\"kind\":\"chunk\",\"text\":\"t\",\"metadata\":{}}\n";
        assert!(matches!(
            VectorStore::<f64>::from_bytes(bad_dim.as_bytes()),
            Err(Error::CorruptStore { line: 2, .. })
        ));
        assert!(matches!(
            VectorStore::<f64>::from_bytes(b"{\"format\":\"other\",\"version\":1,\"dim\":3,\"embedder\":\"e\"}\n"),
            Err(Error::CorruptStore { line: 1, .. })
        ));
        let garbage = "{\"format\":\"gtr-store\",\"version\":1,\"dim\":1,\"embedder\":\"e\"}\n\
                       {\"id\":\"a\",\"vector\":[1],\"kind\":\"chunk\",\"text\":\"t\",\"metadata\":{}}\n\
                       not json\n";
        assert!(matches!(
            VectorStore::<f64>::from_bytes(garbage.as_bytes()),
            Err(Error::CorruptStore { line: 3, .. })
        ));
        assert!(matches!(VectorStore::<f64>::from_bytes(b""), Err(Error::CorruptStore { line: 1, .. })));
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut s = VectorStore::new(2, "e").unwrap();
        s.insert(rec("a", &[0.6, 0.8])).unwrap();
        s.save(&path).unwrap();
        assert_eq!(VectorStore::<f64>::load(&path).unwrap(), s);
        assert!(matches!(
            VectorStore::<f64>::load(&dir.path().join("missing.jsonl")),
            Err(Error::Io { .. })
        ));
    }
}
