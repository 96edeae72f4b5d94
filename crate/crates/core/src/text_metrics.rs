//! Answer-quality metrics for the text pipeline: ROUGE-N, ROUGE-L, semantic
//! answer similarity and truthfulness aggregation.
//!
//! ROUGE works on lowercased tokens from [`crate::chunker::tokenize`], with
//! no stemming and no stopword removal.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunker::{token_count, tokenize};
use crate::embedder::Embedder;
use crate::error::{Error, Result};
use crate::scalar::MetricValue;
use crate::vector::cosine;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rouge<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: MetricValue> Rouge<T> {
    /// Scores `overlap` matches against `cand` candidate units and `refr`
    /// reference units. A side with no units scores zero.
    pub fn from_counts(overlap: usize, cand: usize, refr: usize) -> Self {
        let ratio = |n: usize, d: usize| {
            if d == 0 {
                T::zero()
            } else {
                T::from_count(n) / T::from_count(d)
            }
        };
        let precision = ratio(overlap, cand);
        let recall = ratio(overlap, refr);
        let sum = precision + recall;
        let f1 = if sum > T::zero() {
            T::from_count(2) * precision * recall / sum
        } else {
            T::zero()
        };
        Rouge { precision, recall, f1 }
    }

    pub fn to_f64(self) -> Rouge<f64> {
        Rouge {
            precision: self.precision.to_f64(),
            recall: self.recall.to_f64(),
            f1: self.f1.to_f64(),
        }
    }
}

/// Lowercased tokens as scored by ROUGE.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| t.text.to_lowercase()).collect()
}

/// ROUGE-N with clipped n-gram counts.
///
/// # Panics
///
/// If `n` is zero.
pub fn rouge_n<T: MetricValue>(candidate: &str, reference: &str, n: usize) -> Rouge<T> {
    rouge_n_tokens(&rouge_tokens(candidate), &rouge_tokens(reference), n)
}

pub fn rouge_n_tokens<T: MetricValue, S: Eq + std::hash::Hash>(
    candidate: &[S],
    reference: &[S],
    n: usize,
) -> Rouge<T> {
    assert!(n >= 1, "n-gram order must be at least 1");
    fn grams<S: Eq + std::hash::Hash>(toks: &[S], n: usize) -> HashMap<&[S], usize> {
        let mut counts = HashMap::new();
        for g in toks.windows(n) {
            *counts.entry(g).or_default() += 1;
        }
        counts
    }
    let c = grams(candidate, n);
    let r = grams(reference, n);
    let overlap = c
        .iter()
        .map(|(g, &n)| n.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |t: &[S]| t.len().saturating_sub(n - 1);
    Rouge::from_counts(overlap, total(candidate), total(reference))
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L: precision is LCS / |candidate|, recall is LCS / |reference|.
pub fn rouge_l<T: MetricValue>(candidate: &str, reference: &str) -> Rouge<T> {
    rouge_l_tokens(&rouge_tokens(candidate), &rouge_tokens(reference))
}

pub fn rouge_l_tokens<T: MetricValue, S: PartialEq>(candidate: &[S], reference: &[S]) -> Rouge<T> {
    Rouge::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// Semantic answer similarity: cosine of the two embeddings.
pub fn sas(candidate: &str, reference: &str, embedder: &dyn Embedder) -> Result<f64> {
    let c = embedder.embed(candidate)?;
    let r = embedder.embed(reference)?;
    cosine(&c, &r)
}

/// One judged answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtrEvalItem {
    pub question: String,
    pub reference: String,
    pub candidate: String,
    /// 1 when a rater judged the answer relevant, else 0.
    pub truthful: u8,
    pub response_time_ms: f64,
    /// Filled in from the candidate text when absent.
    #[serde(default)]
    pub candidate_tokens: Option<usize>,
}

impl GtrEvalItem {
    pub fn tokens(&self) -> usize {
        self.candidate_tokens.unwrap_or_else(|| token_count(&self.candidate))
    }
}

/// Reads evaluation items, one JSON object per line. Blank lines are skipped.
pub fn load_eval_items(path: &Path) -> Result<Vec<GtrEvalItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_eval_items(&text)
}

pub fn parse_eval_items(text: &str) -> Result<Vec<GtrEvalItem>> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: GtrEvalItem = serde_json::from_str(line)
            .map_err(|e| Error::InvalidInput(format!("line {}: {e}", i + 1)))?;
        if item.truthful > 1 {
            return Err(Error::InvalidInput(format!("line {}: truthful must be 0 or 1", i + 1)));
        }
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemScores {
    pub question: String,
    pub truthful: u8,
    pub rouge1: Rouge<f64>,
    pub rouge2: Rouge<f64>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Rouge<f64>,
    pub sas: f64,
    pub response_time_ms: f64,
    pub tokens: usize,
}

/// Means over all items.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextSummary {
    pub truthful_pct: f64,
    pub rouge1_p: f64,
    pub rouge2_p: f64,
    #[serde(rename = "rougeL_p")]
    pub rouge_l_p: f64,
    pub sas: f64,
    pub resp_ms: f64,
    pub tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextEvalReport {
    pub items: Vec<ItemScores>,
    pub summary: TextSummary,
}

impl TextEvalReport {
    /// Per-item lines followed by a final `{"summary": …}` line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("serializable"));
            out.push('\n');
        }
        let summary = serde_json::json!({ "summary": self.summary });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }

    pub fn summary_table(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8}  {:>12}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}  {:>8}",
            "items", "truthful_pct", "rouge1_p", "rouge2_p", "rougeL_p", "sas", "resp_ms", "tokens"
        );
        let _ = writeln!(
            out,
            "{:>8}  {:>12.2}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>10.1}  {:>8.1}",
            self.items.len(),
            s.truthful_pct,
            s.rouge1_p,
            s.rouge2_p,
            s.rouge_l_p,
            s.sas,
            s.resp_ms,
            s.tokens
        );
        out
    }
}

pub fn score_item(item: &GtrEvalItem, embedder: &dyn Embedder) -> Result<ItemScores> {
    Ok(ItemScores {
        question: item.question.clone(),
        truthful: item.truthful,
        rouge1: rouge_n(&item.candidate, &item.reference, 1),
        rouge2: rouge_n(&item.candidate, &item.reference, 2),
        rouge_l: rouge_l(&item.candidate, &item.reference),
        sas: sas(&item.candidate, &item.reference, embedder)?,
        response_time_ms: item.response_time_ms,
        tokens: item.tokens(),
    })
}

pub fn aggregate(items: &[GtrEvalItem], embedder: &dyn Embedder) -> Result<TextEvalReport> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no evaluation items".into()));
    }
    let scored = items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            score_item(it, embedder).map_err(|e| Error::BatchElement {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = scored.len() as f64;
    let mean = |f: &dyn Fn(&ItemScores) -> f64| scored.iter().map(f).sum::<f64>() / n;
    let summary = TextSummary {
        truthful_pct: 100.0 * mean(&|s| f64::from(s.truthful)),
        rouge1_p: mean(&|s| s.rouge1.precision),
        rouge2_p: mean(&|s| s.rouge2.precision),
        rouge_l_p: mean(&|s| s.rouge_l.precision),
        sas: mean(&|s| s.sas),
        resp_ms: mean(&|s| s.response_time_ms),
        tokens: mean(&|s| s.tokens as f64),
    };
    Ok(TextEvalReport { items: scored, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::HashedBow;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    #[test]
    fn rouge_examples() {
        let r: Rouge<Q> = rouge_n("a b c", "a b d", 1);
        assert_eq!(r.precision, q(2, 3));
        let r: Rouge<Q> = rouge_n("a b c", "x y z", 2);
        assert_eq!((r.precision, r.recall, r.f1), (q(0, 1), q(0, 1), q(0, 1)));
        let r: Rouge<Q> = rouge_l("the cat sat on the mat", "the cat lay on the mat");
        assert_eq!((r.precision, r.recall), (q(5, 6), q(5, 6)));
        let r: Rouge<f64> = rouge_l("", "the cat");
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r: Rouge<f64> = rouge_l("Same Text.", "same text.");
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn clipping_limits_repeated_ngrams() {
        let r: Rouge<Q> = rouge_n("the the the", "the cat", 1);
        assert_eq!(r.precision, q(1, 3));
        assert_eq!(r.recall, q(1, 2));
    }

    #[test]
    fn sas_examples() {
        let e = HashedBow::new(384);
        assert_eq!(sas("a b", "a b", &e).unwrap(), 1.0);
        assert!(matches!(sas("", "a", &e), Err(Error::EmptyText)));
    }

    #[test]
    fn aggregate_shape() {
        let e = HashedBow::new(64);
        let items: Vec<GtrEvalItem> = [1, 1, 1, 0]
            .iter()
            .map(|&t| GtrEvalItem {
                question: "q".into(),
                reference: "the answer".into(),
                candidate: "the answer".into(),
                truthful: t,
                response_time_ms: 10.0,
                candidate_tokens: None,
            })
            .collect();
        let report = aggregate(&items, &e).unwrap();
        assert_eq!(report.summary.truthful_pct, 75.0);
        assert_eq!(report.summary.tokens, 2.0);
        let v = serde_json::to_value(&report.summary).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["resp_ms", "rouge1_p", "rouge2_p", "rougeL_p", "sas", "tokens", "truthful_pct"]);
        assert!(matches!(aggregate(&[], &e), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn malformed_line_is_named() {
        let err = parse_eval_items("\n{\"question\":1}\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    fn memo_lcs(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + memo_lcs(a, b, i + 1, j + 1, memo)
        } else {
            memo_lcs(a, b, i + 1, j, memo).max(memo_lcs(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }

    proptest! {
        #[test]
        fn rouge_l_duality_and_oracle(
            a in prop::collection::vec(0u8..6, 0..20),
            b in prop::collection::vec(0u8..6, 0..20),
        ) {
            let ab: Rouge<Q> = rouge_l_tokens(&a, &b);
            let ba: Rouge<Q> = rouge_l_tokens(&b, &a);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(lcs_len(&a, &b), memo_lcs(&a, &b, 0, 0, &mut HashMap::new()));
        }

        #[test]
        fn scores_are_bounded(a in "[a-c ]{0,30}", b in "[a-c ]{0,30}") {
            for r in [rouge_n::<f64>(&a, &b, 1), rouge_n(&a, &b, 2), rouge_l(&a, &b)] {
                for v in [r.precision, r.recall, r.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
