use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tokenizer;
use crate::clusterer::{Partition, TopicId};
use crate::corpus::DocumentSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Multiply each term's contribution by its query count instead of
    /// counting every distinct query term once.
    pub weighted_query: bool,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            weighted_query: false,
        }
    }
}

/// `ln(1 + (N − n + 0.5) / (n + 0.5))`, non-negative for `0 ≤ n ≤ N`.
pub fn idf(n_topics: usize, doc_freq: usize) -> f64 {
    let n = n_topics as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicProfile {
    pub topic_id: TopicId,
    /// (term id, frequency), ascending by term id.
    terms: Vec<(u32, u64)>,
    pub length: u64,
    /// Set when no member document contributed any token.
    pub empty: bool,
}

impl TopicProfile {
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredTopic {
    pub topic_id: TopicId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSimilarity {
    pub topic_a: TopicId,
    pub topic_b: TopicId,
    pub sim: f64,
}

/// Word profiles for every non-residual topic plus the shared statistics
/// BM25 needs. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileIndex {
    params: Bm25Params,
    vocab: Vec<String>,
    term_ids: HashMap<String, u32>,
    profiles: Vec<TopicProfile>,
    postings: Vec<Vec<(TopicId, u64)>>,
    avg_len: f64,
}

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    params: Bm25Params,
    vocab: Vec<String>,
    profiles: Vec<TopicProfile>,
}

impl ProfileIndex {
    /// Builds an index from per-topic token counts. `counts[t]` is topic `t`'s profile.
    pub fn from_counts(counts: Vec<BTreeMap<String, u64>>, params: Bm25Params) -> Self {
        let mut vocab: Vec<String> = counts
            .iter()
            .flat_map(|c| c.keys().cloned())
            .collect();
        vocab.sort_unstable();
        vocab.dedup();
        let term_ids: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let profiles = counts
            .into_iter()
            .enumerate()
            .map(|(t, c)| {
                let terms: Vec<(u32, u64)> = c
                    .into_iter()
                    .filter(|&(_, f)| f > 0)
                    .map(|(term, f)| (term_ids[&term], f))
                    .collect();
                let length = terms.iter().map(|&(_, f)| f).sum();
                TopicProfile {
                    topic_id: t as TopicId,
                    empty: terms.is_empty(),
                    terms,
                    length,
                }
            })
            .collect();
        Self::assemble(params, vocab, profiles)
    }

    fn assemble(params: Bm25Params, vocab: Vec<String>, profiles: Vec<TopicProfile>) -> Self {
        let term_ids = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut postings = vec![Vec::new(); vocab.len()];
        for p in &profiles {
            for &(term, f) in &p.terms {
                postings[term as usize].push((p.topic_id, f));
            }
        }
        let total: u64 = profiles.iter().map(|p| p.length).sum();
        let avg_len = if profiles.is_empty() {
            0.0
        } else {
            total as f64 / profiles.len() as f64
        };
        ProfileIndex {
            params,
            vocab,
            term_ids,
            profiles,
            postings,
            avg_len,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn topic_count(&self) -> usize {
        self.profiles.len()
    }

    pub fn avg_profile_length(&self) -> f64 {
        self.avg_len
    }

    pub fn profile(&self, topic: TopicId) -> Option<&TopicProfile> {
        self.profiles.get(topic as usize)
    }

    pub fn profiles(&self) -> &[TopicProfile] {
        &self.profiles
    }

    /// Number of topics whose profile contains `term`.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.term_ids
            .get(term)
            .map_or(0, |&id| self.postings[id as usize].len())
    }

    pub fn term_freq(&self, topic: TopicId, term: &str) -> u64 {
        let (Some(&id), Some(p)) = (self.term_ids.get(term), self.profile(topic)) else {
            return 0;
        };
        p.terms
            .binary_search_by_key(&id, |&(t, _)| t)
            .map_or(0, |i| p.terms[i].1)
    }

    /// (term, frequency) pairs of a profile, most frequent first, ties by term.
    pub fn top_terms(&self, topic: TopicId, limit: usize) -> Vec<(&str, u64)> {
        let Some(p) = self.profile(topic) else {
            return Vec::new();
        };
        let mut terms: Vec<(&str, u64)> = p
            .terms
            .iter()
            .map(|&(t, f)| (self.vocab[t as usize].as_str(), f))
            .collect();
        terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        terms.truncate(limit);
        terms
    }

    fn term_weight(&self, term: u32, tf: u64, length: u64) -> f64 {
        let Bm25Params { k1, b, .. } = self.params;
        let f = tf as f64;
        let norm = if self.avg_len > 0.0 {
            length as f64 / self.avg_len
        } else {
            0.0
        };
        idf(self.profiles.len(), self.postings[term as usize].len()) * f * (k1 + 1.0)
            / (f + k1 * (1.0 - b + b * norm))
    }

    /// Query term ids with their multiplicities; unknown terms are skipped.
    fn query_terms<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(u32, f64)> {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for token in tokens {
            if let Some(&id) = self.term_ids.get(token.as_ref()) {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        counts
            .into_iter()
            .map(|(id, c)| (id, if self.params.weighted_query { c } else { 1.0 }))
            .collect()
    }

    /// BM25 score of the query against every topic, indexed by topic id.
    pub fn score_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut scores = vec![0.0; self.profiles.len()];
        for (term, mult) in self.query_terms(tokens) {
            for &(topic, tf) in &self.postings[term as usize] {
                let length = self.profiles[topic as usize].length;
                scores[topic as usize] += mult * self.term_weight(term, tf, length);
            }
        }
        scores
    }

    /// Topics ranked by descending score, ties by ascending topic id, cut to `top_k`.
    pub fn score_text<S: AsRef<str>>(&self, tokens: &[S], top_k: Option<usize>) -> Result<Vec<ScoredTopic>> {
        if self.profiles.is_empty() {
            return Err(Error::EmptyIndex);
        }
        Ok(rank(self.score_all(tokens), top_k))
    }

    /// Symmetrized topic-topic similarity: the mean of each profile scored as
    /// a query against the other. Only positive similarities are returned,
    /// ordered by (topic_a, topic_b) with `topic_a < topic_b`.
    pub fn topic_topic_similarity(&self) -> Vec<TopicSimilarity> {
        let rows: Vec<BTreeMap<TopicId, f64>> = self
            .profiles
            .iter()
            .map(|p| {
                let mut row = BTreeMap::new();
                for &(term, tf) in &p.terms {
                    let mult = if self.params.weighted_query { tf as f64 } else { 1.0 };
                    for &(other, otf) in &self.postings[term as usize] {
                        if other == p.topic_id {
                            continue;
                        }
                        let length = self.profiles[other as usize].length;
                        *row.entry(other).or_insert(0.0) += mult * self.term_weight(term, otf, length);
                    }
                }
                row
            })
            .collect();
        let mut out = Vec::new();
        for (a, row) in rows.iter().enumerate() {
            for (&b, &ab) in row.range((a as TopicId + 1)..) {
                let ba = rows[b as usize].get(&(a as TopicId)).copied().unwrap_or(0.0);
                let sim = (ab + ba) / 2.0;
                if sim > 0.0 {
                    out.push(TopicSimilarity {
                        topic_a: a as TopicId,
                        topic_b: b,
                        sim,
                    });
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let stored = StoredIndex {
            params: self.params,
            vocab: self.vocab.clone(),
            profiles: self.profiles.clone(),
        };
        bincode::serialize_into(BufWriter::new(file), &stored)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredIndex = bincode::deserialize_from(BufReader::new(file))?;
        let n_terms = stored.vocab.len() as u32;
        let valid = stored.profiles.iter().enumerate().all(|(i, p)| {
            p.topic_id as usize == i && p.terms.iter().all(|&(t, _)| t < n_terms)
        });
        if !valid {
            return Err(Error::Serialization(format!(
                "{}: inconsistent profile index",
                path.display()
            )));
        }
        Ok(Self::assemble(stored.params, stored.vocab, stored.profiles))
    }

    /// Writes `topic_id,term,freq` rows.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = crate::corpus::csv_writer(path)?;
        w.write_record(["topic_id", "term", "freq"])?;
        for p in &self.profiles {
            for &(term, f) in &p.terms {
                w.write_record([
                    p.topic_id.to_string(),
                    self.vocab[term as usize].clone(),
                    f.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Sorts scores descending with ties by ascending topic id.
pub fn rank(scores: Vec<f64>, top_k: Option<usize>) -> Vec<ScoredTopic> {
    let mut ranked: Vec<ScoredTopic> = scores
        .into_iter()
        .enumerate()
        .map(|(t, score)| ScoredTopic {
            topic_id: t as TopicId,
            score,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.topic_id.cmp(&b.topic_id))
    });
    if let Some(k) = top_k {
        ranked.truncate(k);
    }
    ranked
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub topics: usize,
    pub vocabulary: usize,
    /// Topics whose members contributed no text.
    pub empty_topics: Vec<TopicId>,
}

/// One profile per non-residual topic, aggregated over member titles and
/// abstracts. With `top_terms`, each profile keeps only its most frequent terms
/// (ties by term).
pub fn build_profiles(
    docs: &DocumentSet,
    p: &Partition,
    tokenizer: &Tokenizer,
    params: Bm25Params,
    top_terms: Option<usize>,
) -> (ProfileIndex, ProfileReport) {
    let mut counts: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); p.topic_count()];
    for doc in docs {
        let Some(topic) = p.topic_of(&doc.doc_id) else {
            continue;
        };
        for token in tokenizer.tokenize(&doc.text()) {
            *counts[topic as usize].entry(token).or_insert(0) += 1;
        }
    }
    if let Some(limit) = top_terms {
        for c in counts.iter_mut() {
            if c.len() > limit {
                let mut ordered: Vec<(String, u64)> = std::mem::take(c).into_iter().collect();
                ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                ordered.truncate(limit);
                *c = ordered.into_iter().collect();
            }
        }
    }
    let index = ProfileIndex::from_counts(counts, params);
    let report = ProfileReport {
        topics: index.topic_count(),
        vocabulary: index.vocab.len(),
        empty_topics: index
            .profiles
            .iter()
            .filter(|p| p.empty)
            .map(|p| p.topic_id)
            .collect(),
    };
    (index, report)
}
