use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{csv_writer, read_csv};
use crate::error::{Error, Result};

pub type TopicId = u32;

/// Written in place of a topic id for residual documents.
pub const RESIDUAL_LABEL: i64 = -1;

/// Assignment of documents to topics. `None` marks the residual group.
///
/// Topic ids are dense and ordered by descending member count, ties broken by
/// the smallest member doc_id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    labels: BTreeMap<String, Option<TopicId>>,
    sizes: Vec<usize>,
    pub resolution: Option<f64>,
    pub quality: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRow {
    doc_id: String,
    topic_id: i64,
}

impl Partition {
    /// Builds a partition from arbitrary group labels, renumbering groups into
    /// the canonical order.
    pub fn from_groups<G: Ord + Clone>(
        entries: impl IntoIterator<Item = (String, Option<G>)>,
    ) -> Self {
        let entries: BTreeMap<String, Option<G>> = entries.into_iter().collect();
        // BTreeMap iteration is ascending by doc_id, so the first member seen is the smallest.
        let mut groups: BTreeMap<G, (usize, String)> = BTreeMap::new();
        for (doc_id, group) in &entries {
            if let Some(g) = group {
                groups
                    .entry(g.clone())
                    .or_insert_with(|| (0, doc_id.clone()))
                    .0 += 1;
            }
        }
        let mut order: Vec<(G, usize, String)> = groups
            .into_iter()
            .map(|(g, (count, first))| (g, count, first))
            .collect();
        order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)));
        let renumber: BTreeMap<G, TopicId> = order
            .iter()
            .enumerate()
            .map(|(i, (g, _, _))| (g.clone(), i as TopicId))
            .collect();
        let sizes = order.iter().map(|(_, count, _)| *count).collect();
        let labels = entries
            .into_iter()
            .map(|(doc_id, g)| (doc_id, g.map(|g| renumber[&g])))
            .collect();
        Partition {
            labels,
            sizes,
            resolution: None,
            quality: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.labels.contains_key(doc_id)
    }

    /// `None` when the document is unknown, `Some(None)` when it is residual.
    pub fn label(&self, doc_id: &str) -> Option<Option<TopicId>> {
        self.labels.get(doc_id).copied()
    }

    /// The topic of a document, or `None` for residual and unknown documents.
    pub fn topic_of(&self, doc_id: &str) -> Option<TopicId> {
        self.labels.get(doc_id).copied().flatten()
    }

    pub fn topic_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn topic_size(&self, topic: TopicId) -> usize {
        self.sizes.get(topic as usize).copied().unwrap_or(0)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn topics(&self) -> impl Iterator<Item = TopicId> {
        0..self.sizes.len() as TopicId
    }

    pub fn residual_count(&self) -> usize {
        self.labels.values().filter(|l| l.is_none()).count()
    }

    pub fn residual_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.residual_count() as f64 / self.labels.len() as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<TopicId>)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Member doc_ids per topic, each list ascending.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (doc_id, label) in &self.labels {
            if let Some(t) = label {
                out[*t as usize].push(doc_id.as_str());
            }
        }
        out
    }

    /// Adds a document to an existing topic (or the residual group) without
    /// renumbering, so incremental assignment keeps topic ids stable.
    pub fn insert(&mut self, doc_id: String, topic: Option<TopicId>) -> Result<()> {
        if let Some(t) = topic {
            if t as usize >= self.sizes.len() {
                return Err(Error::UnknownTopic(t.to_string()));
            }
        }
        if let Some(old) = self.labels.insert(doc_id.clone(), topic) {
            self.labels.insert(doc_id.clone(), old);
            return Err(Error::DuplicateDocument(doc_id));
        }
        if let Some(t) = topic {
            self.sizes[t as usize] += 1;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        for (doc_id, label) in &self.labels {
            w.serialize(PartitionRow {
                doc_id: doc_id.clone(),
                topic_id: label.map_or(RESIDUAL_LABEL, i64::from),
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Loads `partition.csv`. Topic ids are kept as written; they must be dense.
    pub fn load(path: &Path) -> Result<Self> {
        let rows: Vec<PartitionRow> = read_csv(path)?;
        let mut labels = BTreeMap::new();
        let mut sizes: Vec<usize> = Vec::new();
        for (i, row) in rows.into_iter().enumerate() {
            let label = match row.topic_id {
                RESIDUAL_LABEL => None,
                t if t >= 0 && t <= TopicId::MAX as i64 => Some(t as TopicId),
                t => {
                    return Err(Error::Malformed {
                        path: path.to_path_buf(),
                        line: i + 2,
                        message: format!("invalid topic id {t}"),
                    })
                }
            };
            if let Some(t) = label {
                if sizes.len() <= t as usize {
                    sizes.resize(t as usize + 1, 0);
                }
                sizes[t as usize] += 1;
            }
            if labels.insert(row.doc_id.clone(), label).is_some() {
                return Err(Error::DuplicateDocument(row.doc_id));
            }
        }
        if let Some(t) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: 0,
                message: format!("topic ids are not dense: topic {t} has no members"),
            });
        }
        Ok(Partition {
            labels,
            sizes,
            resolution: None,
            quality: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinSizeReport {
    pub topics_kept: usize,
    pub topics_dropped: usize,
    pub residual_docs: usize,
    pub total_docs: usize,
    pub residual_fraction: f64,
}

/// Moves members of topics smaller than `min_size` to the residual group and
/// renumbers the survivors.
pub fn apply_min_size(p: &Partition, min_size: usize) -> Result<(Partition, MinSizeReport)> {
    if min_size < 1 {
        return Err(Error::InvalidParameter("min_size must be at least 1".into()));
    }
    let out = Partition::from_groups(p.iter().map(|(doc_id, label)| {
        let kept = label.filter(|&t| p.topic_size(t) >= min_size);
        (doc_id.to_string(), kept)
    }));
    let out = Partition {
        resolution: p.resolution,
        quality: None,
        ..out
    };
    let report = MinSizeReport {
        topics_kept: out.topic_count(),
        topics_dropped: p.topic_count() - out.topic_count(),
        residual_docs: out.residual_count(),
        total_docs: out.len(),
        residual_fraction: out.residual_fraction(),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sized(groups: &[(usize, u32)]) -> Partition {
        let mut entries = Vec::new();
        let mut n = 0;
        for &(count, g) in groups {
            for _ in 0..count {
                entries.push((format!("doc{n:05}"), Some(g)));
                n += 1;
            }
        }
        Partition::from_groups(entries)
    }

    #[test]
    fn canonical_numbering() {
        let p = Partition::from_groups(vec![
            ("a".to_string(), Some(7)),
            ("b".to_string(), Some(3)),
            ("c".to_string(), Some(3)),
            ("d".to_string(), Some(9)),
            ("e".to_string(), None),
        ]);
        assert_eq!(p.topic_of("b"), Some(0));
        assert_eq!(p.topic_of("a"), Some(1));
        assert_eq!(p.topic_of("d"), Some(2));
        assert_eq!(p.label("e"), Some(None));
        assert_eq!(p.sizes(), &[2, 1, 1]);
    }

    #[test]
    fn min_size_residualizes_small_topics() {
        let p = sized(&[(3, 0), (60, 1), (50, 2)]);
        let (q, report) = apply_min_size(&p, 50).unwrap();
        assert_eq!(q.topic_count(), 2);
        assert_eq!(q.sizes(), &[60, 50]);
        assert_eq!(report.residual_docs, 3);
        assert_eq!(report.topics_dropped, 1);
        assert!((report.residual_fraction - 3.0 / 113.0).abs() < 1e-15);
    }

    #[test]
    fn min_size_one_only_renumbers() {
        let p = sized(&[(2, 5), (4, 1)]);
        let (q, _) = apply_min_size(&p, 1).unwrap();
        assert_eq!(q, Partition { resolution: None, quality: None, ..p.clone() });
        assert!(apply_min_size(&p, 0).is_err());
    }

    #[test]
    fn residual_fraction_at_reference_scale() {
        let fraction = 134_066f64 / 48_398_815f64;
        assert!((fraction - 0.0028).abs() < 0.00005);
    }

    #[test]
    fn insert_keeps_ids_stable() {
        let mut p = sized(&[(2, 0), (1, 1)]);
        p.insert("zzz".into(), Some(1)).unwrap();
        assert_eq!(p.sizes(), &[2, 2]);
        assert!(p.insert("zzz".into(), Some(0)).is_err());
        assert!(p.insert("yyy".into(), Some(9)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.csv");
        let p = Partition::from_groups(vec![
            ("a".to_string(), Some(1)),
            ("b".to_string(), None),
            ("c".to_string(), Some(1)),
            ("d".to_string(), Some(2)),
        ]);
        p.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("b,-1"));
        assert_eq!(Partition::load(&path).unwrap(), p);
    }
}
